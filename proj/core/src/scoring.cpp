#include "scentrank/scoring.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "scentrank/error.hpp"
#include "scentrank/parallel.hpp"
#include "scentrank/tokenizer.hpp"

namespace scentrank {
namespace {

void require_target(const ScoringRequest& request) {
    if (request.target.empty()) throw ValidationError("scoring request target must be non-empty");
}

/// Number of code points in a UTF-8 string; continuation bytes are skipped.
std::size_t code_points(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

}  // namespace

std::vector<std::vector<TokenLogProb>> ScoringBackend::score_batch(std::span<const ScoringRequest> requests) {
    std::vector<std::vector<TokenLogProb>> out;
    out.reserve(requests.size());
    for (const auto& r : requests) out.push_back(score(r));
    return out;
}

std::vector<TokenLogProb> score_unigram(const ScoringRequest& request, const UnigramOracleParams& params) {
    require_target(request);
    if (!(params.alpha > 0.0)) throw ValidationError("unigram alpha must be > 0");
    auto prefix = tokenize(request.prefix);
    auto target = tokenize(request.target);
    std::unordered_map<std::string_view, std::size_t> counts;
    for (const auto& t : prefix) ++counts[t];
    std::unordered_set<std::string_view> vocab;
    for (const auto& t : prefix) vocab.insert(t);
    for (const auto& t : target) vocab.insert(t);
    const double denom = static_cast<double>(prefix.size()) + params.alpha * static_cast<double>(vocab.size());
    std::vector<TokenLogProb> out;
    out.reserve(target.size());
    for (const auto& t : target) {
        auto it = counts.find(t);
        double count = it == counts.end() ? 0.0 : static_cast<double>(it->second);
        out.push_back({t, std::log((count + params.alpha) / denom)});
    }
    return out;
}

UnigramBackend::UnigramBackend(UnigramOracleParams params) : params_(params) {
    if (!(params_.alpha > 0.0)) throw ValidationError("unigram alpha must be > 0");
}

std::vector<TokenLogProb> UnigramBackend::score(const ScoringRequest& request) { return score_unigram(request, params_); }

std::vector<TokenLogProb> extract_target_logprobs(const nlohmann::json& logprobs, std::size_t prefix_chars) {
    if (!logprobs.is_object() || !logprobs.contains("tokens") || !logprobs.contains("token_logprobs") ||
        !logprobs.contains("text_offset")) {
        throw CapabilityError("completion reply lacks logprobs.tokens/token_logprobs/text_offset");
    }
    const auto& tokens = logprobs["tokens"];
    const auto& values = logprobs["token_logprobs"];
    const auto& offsets = logprobs["text_offset"];
    if (tokens.size() != values.size() || tokens.size() != offsets.size()) {
        throw BackendError("completion logprobs arrays differ in length");
    }
    std::vector<TokenLogProb> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto token = tokens[i].get<std::string>();
        auto start = offsets[i].get<std::size_t>();
        auto end = start + code_points(token);
        if (end <= prefix_chars) continue;
        // The first prompt token has no conditional probability; it can only
        // land in the target when the prefix is empty.
        if (values[i].is_null()) continue;
        out.push_back({std::move(token), values[i].get<double>()});
    }
    return out;
}

CompletionsScoringBackend::CompletionsScoringBackend(RemoteScoringConfig config)
    : config_(std::move(config)), in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(config_.max_in_flight, 1))) {
    if (config_.model.empty()) throw ValidationError("scoring.model is not configured");
}

void CompletionsScoringBackend::probe() {
    auto reply = score_once({"Question: probe\nAnswer:", " yes"});
    if (reply.empty()) throw CapabilityError("scoring endpoint returned no target-token logprobs during probe");
}

std::vector<TokenLogProb> CompletionsScoringBackend::score_once(const ScoringRequest& request) {
    require_target(request);
    nlohmann::json body = {{"model", config_.model},
                           {"prompt", request.prefix + request.target},
                           {"max_tokens", 0},
                           {"echo", true},
                           {"logprobs", 0},
                           {"temperature", 0.0}};
    in_flight_.acquire();
    nlohmann::json reply;
    try {
        reply = post_json(config_.endpoint, "/v1/completions", body);
    } catch (...) {
        in_flight_.release();
        throw;
    }
    in_flight_.release();
    const nlohmann::json* logprobs = nullptr;
    try {
        logprobs = &reply.at("choices").at(0).at("logprobs");
    } catch (const nlohmann::json::exception&) {
        throw CapabilityError("completion reply lacks choices[0].logprobs; endpoint cannot echo prompt logprobs");
    }
    if (logprobs->is_null()) throw CapabilityError("endpoint returned null logprobs for an echoed prompt");
    return extract_target_logprobs(*logprobs, code_points(request.prefix));
}

std::vector<TokenLogProb> CompletionsScoringBackend::score(const ScoringRequest& request) {
    require_target(request);
    return with_retry(config_.retry, [&] { return score_once(request); });
}

std::vector<std::vector<TokenLogProb>> CompletionsScoringBackend::score_batch(std::span<const ScoringRequest> requests) {
    std::vector<std::vector<TokenLogProb>> out(requests.size());
    parallel_for(requests.size(), config_.max_in_flight, [&](std::size_t i) { out[i] = score(requests[i]); });
    return out;
}

std::vector<TokenLogProb> MemoizingScoringBackend::score(const ScoringRequest& request) {
    std::string key;
    key.reserve(request.prefix.size() + request.target.size() + 1);
    key.append(request.prefix).push_back('\0');
    key.append(request.target);
    {
        std::lock_guard lock(mutex_);
        if (auto it = memo_.find(key); it != memo_.end()) {
            ++hits_;
            return it->second;
        }
    }
    auto reply = inner_.score(request);
    std::lock_guard lock(mutex_);
    ++misses_;
    memo_.emplace(std::move(key), reply);
    return reply;
}

std::size_t MemoizingScoringBackend::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::size_t MemoizingScoringBackend::misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
}

}  // namespace scentrank
