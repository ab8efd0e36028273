#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scentrank/corpus.hpp"

namespace scentrank {

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);

/// True when a normalized gold answer occurs on token boundaries inside the
/// normalized title + body.
bool has_answer(const Passage& passage, std::span<const std::string> golds);

struct MetricRow {
    std::string metric;
    std::optional<std::size_t> k;
    double value = 0.0;
    std::size_t n_queries = 0;

    bool operator==(const MetricRow&) const = default;
};

/// Flat table of metric rows; column order metric, k, value, n_queries.
class EvalReport {
  public:
    std::vector<MetricRow> rows;
    std::vector<std::size_t> ks;
    std::size_t n_queries = 0;

    /// Throws ValidationError when absent.
    double value(std::string_view metric, std::optional<std::size_t> k = std::nullopt) const;
    const MetricRow* find(std::string_view metric, std::optional<std::size_t> k = std::nullopt) const;
    void append(const EvalReport& other);

    /// Tab separated with a header line; values with 6 fractional digits.
    void write_tsv(std::ostream& out) const;
    void write_jsonl(const std::filesystem::path& path) const;
    static EvalReport load_jsonl(const std::filesystem::path& path);
};

inline constexpr std::string_view kTopKMetric = "top_k_accuracy";
inline constexpr std::string_view kTopKAvgMetric = "top_k_avg";

/// Top-K accuracy from per-query has_answer flags in rank order. Adds one row
/// per k plus the arithmetic mean of those rows.
EvalReport topk_accuracy_from_flags(std::span<const std::vector<bool>> flags, std::span<const std::size_t> ks);

/// Every QA query is evaluated; queries absent from the run count as misses
/// (reported through `warnings`). Throws if a run query is not in `qa`.
EvalReport topk_accuracy(const RetrievalRun& run, const QADataset& qa, const Corpus& corpus,
                         std::span<const std::size_t> ks, std::vector<std::string>* warnings = nullptr);

/// has_answer flags in rank order for one ranked list.
std::vector<bool> answer_flags(const std::vector<RunEntry>& entries, const QAExample& example, const Corpus& corpus);

/// Mean nDCG@k over run queries, gain 2^g - 1, discount log2(rank + 1).
/// Queries without relevant documents contribute 0.
double ndcg_at_k(const RetrievalRun& run, const QrelSet& qrels, std::size_t k);

/// nDCG@k of one ranked list of grades against the ideal ordering of `judged`.
double ndcg_of_grades(std::span<const int> ranked_grades, std::span<const int> judged, std::size_t k);

struct ReaderScores {
    int em = 0;
    double recall = 0.0;
    int containment = 0;
};

ReaderScores reader_metrics(std::string_view prediction, std::span<const std::string> golds);

enum class Phase { scent, score, total };
std::string_view phase_name(Phase phase);
Phase parse_phase(std::string_view name);

struct LatencySample {
    std::string query_id;
    Phase phase = Phase::total;
    double millis = 0.0;
};

/// Thread-safe collector of latency samples.
class LatencySink {
  public:
    void add(std::string query_id, Phase phase, double millis);
    std::vector<LatencySample> samples() const;

    void write_jsonl(const std::filesystem::path& path) const;
    static std::vector<LatencySample> load_jsonl(const std::filesystem::path& path);

  private:
    mutable std::mutex mutex_;
    std::vector<LatencySample> samples_;
};

/// Milliseconds elapsed since construction on the steady clock.
class Stopwatch {
  public:
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// mean/p50/p95 per phase present in `samples`; rows "latency_<phase>_<stat>".
/// Throws ValidationError on an empty sample list.
EvalReport latency_report(std::span<const LatencySample> samples);

/// Adds a `total` sample per query equal to its scent plus score samples,
/// for queries that have no explicit total.
std::vector<LatencySample> with_derived_totals(std::span<const LatencySample> samples);

/// Linear-interpolated percentile (q in [0,1]) of a non-empty sample.
double percentile(std::vector<double> values, double q);

}  // namespace scentrank
