#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scentrank/corpus.hpp"
#include "scentrank/evaluator.hpp"
#include "scentrank/scent.hpp"
#include "scentrank/scoring.hpp"

namespace scentrank {

enum class TargetSource { scent, gold_answer, constant };
enum class ScoringMode { asrank, asrank_bayes, upr, retrieval_only };
/// How token log-probabilities are reduced to one number per candidate.
enum class Aggregation { mean, sum };

TargetSource parse_target_source(std::string_view name);
ScoringMode parse_scoring_mode(std::string_view name);
Aggregation parse_aggregation(std::string_view name);
std::string_view to_string(TargetSource value);
std::string_view to_string(ScoringMode value);
std::string_view to_string(Aggregation value);

inline constexpr std::string_view kDefaultRankLayout = "Document: {document}\nQuestion: {question}\nHint: {scent}\nAnswer:";
inline constexpr std::string_view kDefaultUprPrefix = "Question: {question}\nPassage:";

struct RankTemplate {
    std::string layout{kDefaultRankLayout};
    TargetSource target_source = TargetSource::scent;
    std::string target_constant;
    std::size_t doc_token_cap = 220;
    std::size_t target_token_cap = 128;
    /// Prefix for UPR mode; must hold exactly one "{question}".
    std::string upr_prefix{kDefaultUprPrefix};

    void validate() const;
};

/// prefix = layout with {document} (title + body, capped), {question} and
/// {scent}; target per target_source, capped. Throws ValidationError when the
/// target is empty after truncation.
ScoringRequest build_rank_input(const Passage& passage, std::string_view question, const AnswerScent& scent,
                                const RankTemplate& rank_template, std::span<const std::string> gold_answers = {});

struct CandidateScore {
    double mean_loglik = 0.0;
    double sum_loglik = 0.0;
    std::size_t token_count = 0;
};

/// Mean and sum of the backend's token logprobs. An empty reply throws BackendError.
CandidateScore score_candidate(ScoringBackend& backend, const ScoringRequest& request);

/// (1 - lambda) * loglik + lambda * log_softmax(retrieval_scores)[index].
double combine_with_prior(double loglik, std::span<const double> retrieval_scores, std::size_t index, double lambda);

/// Mean token log-likelihood of the passage text (capped at `cap` tokens)
/// given the UPR prefix built from the question.
double upr_score(ScoringBackend& backend, std::string_view question, const Passage& passage, std::size_t cap,
                 std::string_view prefix_template = kDefaultUprPrefix);

struct Candidate {
    const Passage* passage = nullptr;
    int retrieval_rank = 0;
    double retrieval_score = 0.0;
};

struct ScoredCandidate {
    std::string passage_id;
    int retrieval_rank = 0;
    double retrieval_score = 0.0;
    double mean_loglik = 0.0;
    double sum_loglik = 0.0;
    std::size_t token_count = 0;
    double combined_score = 0.0;
    bool failed = false;
    std::string diagnostic;
};

struct RerankResult {
    std::string query_id;
    std::vector<ScoredCandidate> candidates;
    std::string selected;
    ScoringMode mode = ScoringMode::asrank;
    bool partial = false;
};

struct RerankOptions {
    ScoringMode mode = ScoringMode::asrank;
    double lambda = 0.0;
    Aggregation aggregation = Aggregation::mean;
    /// Abort on the first candidate failure instead of sinking it.
    bool strict = false;
    std::size_t parallelism = 1;
};

/// Scores every candidate (one backend call each in the asrank and upr modes,
/// none for retrieval_only) and sorts by combined score descending, ties by
/// retrieval rank. Failed candidates sink to the bottom unless strict.
/// Records one `score` latency sample when `latency` is set.
RerankResult rerank(ScoringBackend& backend, std::string_view query_id, std::string_view question,
                    const AnswerScent* scent, std::span<const Candidate> candidates,
                    const RankTemplate& rank_template, const RerankOptions& options = {},
                    std::span<const std::string> gold_answers = {}, LatencySink* latency = nullptr);

/// Candidates for one run query resolved against the corpus (at most `depth`).
std::vector<Candidate> candidates_from_run(const std::vector<RunEntry>& entries, const Corpus& corpus,
                                           std::size_t depth);

/// Reranked lists as a run (combined score as score, tag "asrank").
RetrievalRun to_run(std::span<const RerankResult> results);

/// Trec run file of the reranked lists.
void write_rerank_run(std::span<const RerankResult> results, const std::filesystem::path& path);
/// jsonl: one object per candidate with query_id, passage_id, rank,
/// retrieval_rank, retrieval_score, mean_loglik, sum_loglik, token_count,
/// combined_score, failed.
void write_rerank_sidecar(std::span<const RerankResult> results, const std::filesystem::path& path);
std::vector<RerankResult> load_rerank_sidecar(const std::filesystem::path& path);

}  // namespace scentrank
