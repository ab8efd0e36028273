#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "scentrank/config.hpp"
#include "scentrank/evaluator.hpp"
#include "scentrank/scent.hpp"
#include "scentrank/scoring.hpp"

namespace scentrank {

/// Non-owning backend handles a Pipeline uses. Null members are only an
/// error for the commands that need them.
struct Backends {
    GenerationBackend* generation = nullptr;
    ScoringBackend* scoring = nullptr;
    GenerationBackend* reader = nullptr;
};

/// Backends constructed from configuration.
struct OwnedBackends {
    std::unique_ptr<GenerationBackend> generation;
    std::unique_ptr<ScoringBackend> scoring;

    Backends view() const { return {generation.get(), scoring.get(), generation.get()}; }
};

/// Builds the configured generation and scoring backends. A remote scoring
/// backend is probed for logprob support when `probe` is set.
OwnedBackends make_backends(const PipelineConfig& config, bool probe = true);

struct SweepPoint {
    std::size_t candidate_count = 0;
    std::size_t scent_max_tokens = 0;
    std::size_t target_token_cap = 0;
    EvalReport report;
};

struct SweepReport {
    std::vector<SweepPoint> points;
    void write_tsv(std::ostream& out) const;
};

/// Stage runner. Each command reads and writes only files under the
/// configured paths, so stages can be re-run independently.
class Pipeline {
  public:
    Pipeline(PipelineConfig config, Backends backends, std::ostream& out);

    std::filesystem::path cmd_index();
    std::filesystem::path cmd_retrieve();
    std::filesystem::path cmd_scent();
    std::filesystem::path cmd_rerank();
    EvalReport cmd_eval();
    std::filesystem::path cmd_rag();
    SweepReport cmd_sweep();

    const PipelineConfig& config() const noexcept { return config_; }

    std::filesystem::path index_path() const;
    std::filesystem::path retrieval_run_path() const;
    /// config.run when set, otherwise retrieval_run_path().
    std::filesystem::path first_stage_run_path() const;
    std::filesystem::path scent_path() const;
    std::filesystem::path rerank_run_path() const;
    std::filesystem::path rerank_sidecar_path() const;
    std::filesystem::path predictions_path() const;
    std::filesystem::path report_path() const;
    std::filesystem::path latency_report_path() const;
    std::filesystem::path scent_latency_path() const;
    std::filesystem::path score_latency_path() const;
    std::filesystem::path sweep_path() const;

    /// Number of scent generations issued to the backend by this object.
    std::size_t scent_backend_calls() const noexcept { return scent_backend_calls_; }

  private:
    const Corpus& corpus();
    const QADataset& qa();
    RetrievalRun first_stage_run();
    std::unordered_map<std::string, AnswerScent> resolve_scents(const ScentParams& params, LatencySink* latency);
    std::unordered_map<std::string, AnswerScent> load_scents();
    std::string scent_digest(const ScentParams& params) const;
    bool mode_needs_scent() const;
    std::vector<RerankResult> rerank_all(const RetrievalRun& run, const std::unordered_map<std::string, AnswerScent>& scents,
                                         std::size_t depth, const RankTemplate& rank_template,
                                         ScoringBackend& scoring, LatencySink* latency);

    PipelineConfig config_;
    Backends backends_;
    std::ostream& out_;
    std::optional<Corpus> corpus_;
    std::optional<QADataset> qa_;
    std::size_t scent_backend_calls_ = 0;
};

}  // namespace scentrank
