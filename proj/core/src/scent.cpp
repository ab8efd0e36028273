#include "scentrank/scent.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include <openssl/evp.h>

#include "scentrank/error.hpp"
#include "scentrank/parallel.hpp"
#include "scentrank/tokenizer.hpp"

namespace scentrank {
namespace {

constexpr std::string_view kPlaceholder = "{question}";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
    return n;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

nlohmann::json to_json(const AnswerScent& s) {
    return {{"query_id", s.query_id},
            {"scent", s.text},
            {"model", s.model_name},
            {"params_digest", s.params_digest},
            {"created_at", s.created_at}};
}

AnswerScent from_json(const nlohmann::json& j) {
    AnswerScent s;
    s.query_id = j.at("query_id").get<std::string>();
    s.text = j.at("scent").get<std::string>();
    s.model_name = j.at("model").get<std::string>();
    s.params_digest = j.at("params_digest").get<std::string>();
    s.created_at = j.at("created_at").get<std::string>();
    return s;
}

}  // namespace

void ScentParams::validate() const {
    if (!(temperature >= 0.0)) throw ValidationError("scent temperature must be >= 0");
    if (max_tokens < 1) throw ValidationError("scent max_tokens must be >= 1");
    if (count_occurrences(prompt_template, kPlaceholder) != 1) {
        throw ValidationError("scent prompt template must contain exactly one {question} placeholder");
    }
}

std::string ScentParams::digest() const {
    nlohmann::json canonical = {{"max_tokens", max_tokens},
                                {"model", model_name},
                                {"prompt_template", prompt_template},
                                {"temperature", temperature}};
    return sha256_hex(canonical.dump()).substr(0, 16);
}

std::string build_scent_prompt(std::string_view question, std::string_view prompt_template) {
    if (count_occurrences(prompt_template, kPlaceholder) != 1) {
        throw ValidationError("scent prompt template must contain exactly one {question} placeholder");
    }
    auto pos = prompt_template.find(kPlaceholder);
    std::string out;
    out.reserve(prompt_template.size() + question.size());
    out.append(prompt_template.substr(0, pos));
    out.append(question);
    out.append(prompt_template.substr(pos + kPlaceholder.size()));
    return out;
}

std::string ChatCompletionsBackend::complete(const GenerationRequest& request) {
    nlohmann::json body = {{"model", request.model},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
                           {"temperature", request.temperature},
                           {"max_tokens", request.max_tokens}};
    auto reply = post_json(endpoint_, "/v1/chat/completions", body);
    try {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("chat completion reply lacks choices[0].message.content: ") + e.what());
    }
}

std::string LeadExtractiveBackend::complete(const GenerationRequest& request) {
    std::string_view prompt = request.prompt;
    auto header = prompt.find("[1]");
    if (header != std::string_view::npos) {
        auto line_end = prompt.find('\n', header);
        auto rest = line_end == std::string_view::npos ? std::string_view() : prompt.substr(line_end + 1);
        prompt = rest.substr(0, rest.find('\n'));
    }
    auto spans = token_spans(prompt);
    if (spans.empty()) return {};
    auto text = truncate_tokens(prompt.substr(spans.front().begin), request.max_tokens);
    return std::string(text);
}

ScentCache::ScentCache(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(*path_)) {
        for (auto& s : load_scent_file(*path_)) entries_.try_emplace({s.query_id, s.params_digest}, std::move(s));
    }
}

std::optional<AnswerScent> ScentCache::find(std::string_view query_id, std::string_view params_digest) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(std::pair<std::string, std::string>(query_id, params_digest));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ScentCache::put(const AnswerScent& scent) {
    std::lock_guard lock(mutex_);
    auto [it, inserted] = entries_.try_emplace({scent.query_id, scent.params_digest}, scent);
    if (!inserted || !path_) return;
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    if (!out) throw ValidationError("cannot append to scent cache " + path_->string());
    out << to_json(scent).dump() << '\n';
}

std::size_t ScentCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::vector<AnswerScent> load_scent_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open scent file " + path.string());
    std::vector<AnswerScent> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad scent record: " + e.what());
        }
    }
    return out;
}

void write_scent_file(std::span<const AnswerScent> scents, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write scent file " + path.string());
    for (const auto& s : scents) out << to_json(s).dump() << '\n';
}

AnswerScent generate_scent(GenerationBackend& backend, std::string_view query_id, std::string_view question,
                           const ScentParams& params, ScentCache* cache, const RetryPolicy& retry) {
    params.validate();
    auto digest = params.digest();
    if (cache) {
        if (auto hit = cache->find(query_id, digest)) return *hit;
    }
    GenerationRequest request{params.model_name, build_scent_prompt(question, params.prompt_template),
                              params.temperature, params.max_tokens};
    auto text = with_retry(retry, [&] { return backend.complete(request); });
    if (text.empty()) throw BackendError("empty scent completion for query \"" + std::string(query_id) + "\"");
    AnswerScent scent{std::string(query_id), std::move(text), params.model_name, utc_timestamp(), digest};
    if (cache) cache->put(scent);
    return scent;
}

std::vector<AnswerScent> generate_scents(GenerationBackend& backend, const QADataset& qa, const ScentParams& params,
                                         ScentCache* cache, const RetryPolicy& retry, std::size_t parallelism) {
    auto examples = qa.examples();
    std::vector<AnswerScent> out(examples.size());
    parallel_for(examples.size(), parallelism, [&](std::size_t i) {
        out[i] = generate_scent(backend, examples[i].query_id, examples[i].question, params, cache, retry);
    });
    return out;
}

AnswerScent constant_scent(std::string_view token) {
    if (token.empty()) throw ValidationError("constant scent token must be non-empty");
    return AnswerScent{"", std::string(token), "constant", "", "constant:" + std::string(token)};
}

AnswerScent gold_scent(const QAExample& example) {
    if (example.gold_answers.empty()) throw ValidationError("query \"" + example.query_id + "\" has no gold answer");
    return AnswerScent{example.query_id, example.gold_answers.front(), "gold", "", "gold"};
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace scentrank
