#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scentrank/corpus.hpp"
#include "scentrank/http_client.hpp"

namespace scentrank {

inline constexpr std::string_view kDefaultScentPrompt =
    "Generate a brief, insightful answer scent to the following question: {question}";

struct ScentParams {
    double temperature = 0.7;
    std::size_t max_tokens = 128;
    std::string model_name = "gpt-3.5-turbo-0125";
    std::string prompt_template{kDefaultScentPrompt};

    /// Throws ValidationError: negative temperature, max_tokens == 0, or a
    /// template without exactly one "{question}".
    void validate() const;
    /// Stable hex digest of every field; the scent cache key.
    std::string digest() const;
};

struct AnswerScent {
    std::string query_id;
    std::string text;
    std::string model_name;
    std::string created_at;
    std::string params_digest;

    bool operator==(const AnswerScent&) const = default;
};

/// Substitutes the single "{question}" placeholder verbatim.
std::string build_scent_prompt(std::string_view question, std::string_view prompt_template);

struct GenerationRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
    std::size_t max_tokens = 128;
};

/// Text completion service (scent model and RAG reader).
class GenerationBackend {
  public:
    virtual ~GenerationBackend() = default;
    virtual std::string complete(const GenerationRequest& request) = 0;
};

/// OpenAI-compatible POST /v1/chat/completions with a single user message.
class ChatCompletionsBackend final : public GenerationBackend {
  public:
    explicit ChatCompletionsBackend(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}
    std::string complete(const GenerationRequest& request) override;

  private:
    EndpointConfig endpoint_;
};

/// Offline stand-in: returns the first `max_tokens` tokens of the text that
/// follows the first "[1]" header line of the prompt, or of the whole prompt
/// when there is none.
class LeadExtractiveBackend final : public GenerationBackend {
  public:
    std::string complete(const GenerationRequest& request) override;
};

/// Append-only jsonl store keyed by (query_id, params_digest). Safe for
/// concurrent use; writes are serialized. Without a path it is memory-only.
class ScentCache {
  public:
    ScentCache() = default;
    explicit ScentCache(std::filesystem::path path);

    std::optional<AnswerScent> find(std::string_view query_id, std::string_view params_digest) const;
    /// No-op when the key is already present.
    void put(const AnswerScent& scent);
    std::size_t size() const;
    const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

  private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, std::string>, AnswerScent, std::less<>> entries_;
};

/// Reads a scent cache file in file order.
std::vector<AnswerScent> load_scent_file(const std::filesystem::path& path);
void write_scent_file(std::span<const AnswerScent> scents, const std::filesystem::path& path);

/// One backend call per (query, params) at most; later calls hit the cache.
/// Throws BackendError when the completion is empty, or after exhausting retries.
AnswerScent generate_scent(GenerationBackend& backend, std::string_view query_id, std::string_view question,
                           const ScentParams& params, ScentCache* cache = nullptr, const RetryPolicy& retry = {});

/// Every dataset question, `parallelism` at a time; result is in dataset order.
std::vector<AnswerScent> generate_scents(GenerationBackend& backend, const QADataset& qa, const ScentParams& params,
                                         ScentCache* cache, const RetryPolicy& retry = {},
                                         std::size_t parallelism = 1);

/// Fixed scent (e.g. "<UNK>") used for the no-scent ablation.
AnswerScent constant_scent(std::string_view token);

/// Scent equal to the first gold answer.
AnswerScent gold_scent(const QAExample& example);

/// UTC timestamp, ISO-8601 with seconds.
std::string utc_timestamp();

}  // namespace scentrank
