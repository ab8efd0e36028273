#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scentrank/http_client.hpp"

namespace scentrank {

/// Conditioning context and the sequence whose likelihood is measured.
struct ScoringRequest {
    std::string prefix;
    std::string target;

    bool operator==(const ScoringRequest&) const = default;
};

struct TokenLogProb {
    std::string token;
    double logprob = 0.0;  // natural log, <= 0

    bool operator==(const TokenLogProb&) const = default;
};

/// Token log-probability service. Implementations must tolerate concurrent calls.
class ScoringBackend {
  public:
    virtual ~ScoringBackend() = default;
    /// One entry per target token, in order. Empty target throws ValidationError.
    virtual std::vector<TokenLogProb> score(const ScoringRequest& request) = 0;
    /// Replies in request order.
    virtual std::vector<std::vector<TokenLogProb>> score_batch(std::span<const ScoringRequest> requests);
};

struct UnigramOracleParams {
    double alpha = 1.0;  // add-alpha smoothing, > 0
};

/// logprob(w) = ln((count_prefix(w) + alpha) / (|prefix| + alpha * |V|)) with
/// V the distinct tokens of prefix and target, both tokenized with tokenize().
std::vector<TokenLogProb> score_unigram(const ScoringRequest& request, const UnigramOracleParams& params = {});

class UnigramBackend final : public ScoringBackend {
  public:
    explicit UnigramBackend(UnigramOracleParams params = {});
    std::vector<TokenLogProb> score(const ScoringRequest& request) override;

  private:
    UnigramOracleParams params_;
};

struct RemoteScoringConfig {
    EndpointConfig endpoint;
    std::string model;
    std::size_t max_in_flight = 8;
    RetryPolicy retry;
};

/// OpenAI-compatible POST /v1/completions with echo=true, max_tokens=0 and
/// logprobs requested. The prompt is prefix + target; target tokens are picked
/// by text_offset (counted in code points) at or past the prefix end.
class CompletionsScoringBackend final : public ScoringBackend {
  public:
    explicit CompletionsScoringBackend(RemoteScoringConfig config);

    /// One tiny request; throws CapabilityError when prompt logprobs are missing.
    void probe();
    std::vector<TokenLogProb> score(const ScoringRequest& request) override;
    std::vector<std::vector<TokenLogProb>> score_batch(std::span<const ScoringRequest> requests) override;

  private:
    std::vector<TokenLogProb> score_once(const ScoringRequest& request);

    RemoteScoringConfig config_;
    std::counting_semaphore<> in_flight_;
};

/// Extracts target-region logprobs from a completions "logprobs" object
/// ({tokens, token_logprobs, text_offset}). A token belongs to the target when
/// it ends past `prefix_chars`. Throws CapabilityError if fields are missing.
std::vector<TokenLogProb> extract_target_logprobs(const nlohmann::json& logprobs, std::size_t prefix_chars);

/// Memoizes replies by (prefix, target). Used to share scores across sweep points.
class MemoizingScoringBackend final : public ScoringBackend {
  public:
    explicit MemoizingScoringBackend(ScoringBackend& inner) : inner_(inner) {}
    std::vector<TokenLogProb> score(const ScoringRequest& request) override;
    std::size_t hits() const;
    std::size_t misses() const;

  private:
    ScoringBackend& inner_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::vector<TokenLogProb>> memo_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

}  // namespace scentrank
