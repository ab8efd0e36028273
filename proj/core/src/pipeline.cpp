#include "scentrank/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scentrank/bm25.hpp"
#include "scentrank/error.hpp"
#include "scentrank/parallel.hpp"
#include "scentrank/rag_reader.hpp"
#include "scentrank/reranker.hpp"

namespace scentrank {
namespace {

void require_file(const std::filesystem::path& path, std::string_view what, std::string_view producer) {
    if (path.empty()) throw ValidationError(std::string(what) + " path is not configured (" + std::string(producer) + ")");
    if (!std::filesystem::exists(path)) {
        throw ValidationError(std::string(what) + " " + path.string() + " not found; " + std::string(producer));
    }
}

std::string format_fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

OwnedBackends make_backends(const PipelineConfig& config, bool probe) {
    OwnedBackends out;
    if (config.generation_backend == "lead") {
        out.generation = std::make_unique<LeadExtractiveBackend>();
    } else if (!config.generation_endpoint.base_url.empty()) {
        out.generation = std::make_unique<ChatCompletionsBackend>(config.generation_endpoint);
    }
    if (config.scoring_backend == "remote") {
        auto remote_config = config.scoring_remote;
        remote_config.retry = config.retry;
        auto remote = std::make_unique<CompletionsScoringBackend>(std::move(remote_config));
        if (probe) remote->probe();
        out.scoring = std::move(remote);
    } else {
        out.scoring = std::make_unique<UnigramBackend>(config.unigram);
    }
    return out;
}

void SweepReport::write_tsv(std::ostream& out) const {
    out << "candidate_count\tscent_max_tokens\ttarget_token_cap\tmetric\tk\tvalue\tn_queries\n";
    for (const auto& p : points) {
        for (const auto& row : p.report.rows) {
            out << p.candidate_count << '\t' << p.scent_max_tokens << '\t' << p.target_token_cap << '\t' << row.metric
                << '\t' << (row.k ? std::to_string(*row.k) : "-") << '\t' << format_fixed(row.value) << '\t'
                << row.n_queries << '\n';
        }
    }
}

Pipeline::Pipeline(PipelineConfig config, Backends backends, std::ostream& out)
    : config_(std::move(config)), backends_(backends), out_(out) {
    config_.validate();
}

std::filesystem::path Pipeline::index_path() const { return config_.work_dir / "index.snapshot"; }
std::filesystem::path Pipeline::retrieval_run_path() const { return config_.work_dir / "run.bm25.trec"; }
std::filesystem::path Pipeline::first_stage_run_path() const {
    return config_.run.empty() ? retrieval_run_path() : config_.run;
}
std::filesystem::path Pipeline::scent_path() const { return config_.effective_cache_dir() / "scents.jsonl"; }
std::filesystem::path Pipeline::rerank_run_path() const {
    return config_.work_dir / ("run." + std::string(to_string(config_.rerank.mode)) + ".trec");
}
std::filesystem::path Pipeline::rerank_sidecar_path() const {
    return config_.work_dir / ("run." + std::string(to_string(config_.rerank.mode)) + ".jsonl");
}
std::filesystem::path Pipeline::predictions_path() const { return config_.work_dir / "predictions.jsonl"; }
std::filesystem::path Pipeline::report_path() const { return config_.work_dir / ("eval." + config_.eval_target + ".jsonl"); }
std::filesystem::path Pipeline::latency_report_path() const { return config_.work_dir / "eval.latency.jsonl"; }
std::filesystem::path Pipeline::scent_latency_path() const { return config_.work_dir / "latency.scent.jsonl"; }
std::filesystem::path Pipeline::score_latency_path() const { return config_.work_dir / "latency.score.jsonl"; }
std::filesystem::path Pipeline::sweep_path() const { return config_.work_dir / "sweep.tsv"; }

const Corpus& Pipeline::corpus() {
    if (!corpus_) {
        require_file(config_.corpus, "corpus", "set scentrank.corpus");
        corpus_ = load_passages(config_.corpus, config_.corpus_format);
    }
    return *corpus_;
}

const QADataset& Pipeline::qa() {
    if (!qa_) {
        require_file(config_.qa, "qa dataset", "set scentrank.qa");
        qa_ = load_qa(config_.qa);
    }
    return *qa_;
}

RetrievalRun Pipeline::first_stage_run() {
    auto path = first_stage_run_path();
    if (config_.run.empty()) {
        require_file(path, "first-stage run", "produce it with `scentrank retrieve`");
        return load_run(path, RunFormat::trec, {&corpus(), nullptr});
    }
    require_file(path, "first-stage run", "check scentrank.run");
    return load_run(path, config_.run_format, {&corpus(), nullptr});
}

bool Pipeline::mode_needs_scent() const {
    return config_.rerank.mode == ScoringMode::asrank || config_.rerank.mode == ScoringMode::asrank_bayes;
}

std::string Pipeline::scent_digest(const ScentParams& params) const {
    switch (config_.scent_source) {
        case ScentSource::llm: return params.digest();
        case ScentSource::gold: return "gold";
        case ScentSource::constant: return "constant:" + config_.scent_constant;
    }
    return {};
}

std::unordered_map<std::string, AnswerScent> Pipeline::resolve_scents(const ScentParams& params, LatencySink* latency) {
    const auto& dataset = qa();
    ScentCache cache(scent_path());
    auto digest = scent_digest(params);
    auto examples = dataset.examples();
    std::vector<AnswerScent> scents(examples.size());
    std::atomic<std::size_t> calls{0};

    if (config_.scent_source == ScentSource::llm && !backends_.generation) {
        throw ValidationError("scent.source=llm needs a generation backend; set scentrank.generation.endpoint");
    }
    std::filesystem::create_directories(config_.effective_cache_dir());
    auto workers = config_.scent_source == ScentSource::llm ? config_.scent_parallelism : 1;
    parallel_for(examples.size(), workers, [&](std::size_t i) {
        const auto& ex = examples[i];
        Stopwatch watch;
        if (auto hit = cache.find(ex.query_id, digest)) {
            scents[i] = *hit;
        } else if (config_.scent_source == ScentSource::llm) {
            ++calls;
            scents[i] = generate_scent(*backends_.generation, ex.query_id, ex.question, params, &cache, config_.retry);
        } else {
            auto s = config_.scent_source == ScentSource::gold ? gold_scent(ex) : constant_scent(config_.scent_constant);
            s.query_id = ex.query_id;
            s.created_at = utc_timestamp();
            cache.put(s);
            scents[i] = std::move(s);
        }
        if (latency) latency->add(ex.query_id, Phase::scent, watch.elapsed_ms());
    });
    scent_backend_calls_ += calls.load();
    std::unordered_map<std::string, AnswerScent> out;
    for (auto& s : scents) out.emplace(s.query_id, std::move(s));
    return out;
}

std::unordered_map<std::string, AnswerScent> Pipeline::load_scents() {
    require_file(scent_path(), "scent cache", "produce it with `scentrank scent`");
    ScentCache cache(scent_path());
    auto digest = scent_digest(config_.scent);
    std::unordered_map<std::string, AnswerScent> out;
    for (const auto& ex : qa().examples()) {
        auto hit = cache.find(ex.query_id, digest);
        if (!hit) {
            throw ValidationError("no scent for query \"" + ex.query_id + "\" with the current scent settings in " +
                                  scent_path().string() + "; run `scentrank scent`");
        }
        out.emplace(ex.query_id, std::move(*hit));
    }
    return out;
}

std::vector<RerankResult> Pipeline::rerank_all(const RetrievalRun& run,
                                               const std::unordered_map<std::string, AnswerScent>& scents,
                                               std::size_t depth, const RankTemplate& rank_template,
                                               ScoringBackend& scoring, LatencySink* latency) {
    std::vector<RerankResult> results;
    results.reserve(run.size());
    for (const auto& [qid, entries] : run.queries()) {
        const auto* ex = qa().find(qid);
        if (!ex) throw ValidationError("run query \"" + qid + "\" is not in the QA dataset");
        if (entries.empty()) continue;
        auto candidates = candidates_from_run(entries, corpus(), depth);
        const AnswerScent* scent = nullptr;
        if (auto it = scents.find(qid); it != scents.end()) scent = &it->second;
        results.push_back(rerank(scoring, qid, ex->question, scent, candidates, rank_template, config_.rerank,
                                 ex->gold_answers, latency));
    }
    return results;
}

std::filesystem::path Pipeline::cmd_index() {
    auto index = build_index(corpus());
    std::filesystem::create_directories(config_.work_dir);
    index.save(index_path());
    out_ << "indexed " << index.doc_count() << " passages (" << index.vocabulary_size() << " terms) -> "
         << index_path().string() << '\n';
    return index_path();
}

std::filesystem::path Pipeline::cmd_retrieve() {
    require_file(index_path(), "index snapshot", "produce it with `scentrank index`");
    auto index = InvertedIndex::load(index_path());
    auto run = retrieve_all(index, qa(), config_.candidate_count, config_.bm25, config_.threads);
    std::filesystem::create_directories(config_.work_dir);
    write_run(run, retrieval_run_path());
    out_ << "retrieved top-" << config_.candidate_count << " for " << run.size() << " queries -> "
         << retrieval_run_path().string() << '\n';
    return retrieval_run_path();
}

std::filesystem::path Pipeline::cmd_scent() {
    LatencySink latency;
    auto before = scent_backend_calls_;
    auto scents = resolve_scents(config_.scent, &latency);
    std::filesystem::create_directories(config_.work_dir);
    latency.write_jsonl(scent_latency_path());
    out_ << "scents for " << scents.size() << " queries (" << (scent_backend_calls_ - before)
         << " generated) -> " << scent_path().string() << '\n';
    return scent_path();
}

std::filesystem::path Pipeline::cmd_rerank() {
    if (config_.rerank.mode != ScoringMode::retrieval_only && !backends_.scoring) {
        throw ValidationError("rerank needs a scoring backend");
    }
    auto run = first_stage_run();
    std::unordered_map<std::string, AnswerScent> scents;
    if (mode_needs_scent()) scents = load_scents();
    LatencySink latency;
    UnigramBackend unused;
    ScoringBackend& scoring = backends_.scoring ? *backends_.scoring : unused;
    auto results = rerank_all(run, scents, config_.candidate_count, config_.rank_template, scoring, &latency);
    std::filesystem::create_directories(config_.work_dir);
    write_rerank_run(results, rerank_run_path());
    write_rerank_sidecar(results, rerank_sidecar_path());
    latency.write_jsonl(score_latency_path());
    auto partial = std::count_if(results.begin(), results.end(), [](const RerankResult& r) { return r.partial; });
    out_ << "reranked " << results.size() << " queries (mode " << to_string(config_.rerank.mode) << ")";
    if (partial) out_ << ", " << partial << " partial";
    out_ << " -> " << rerank_run_path().string() << '\n';
    return rerank_run_path();
}

EvalReport Pipeline::cmd_eval() {
    RetrievalRun run;
    if (config_.eval_target == "rerank") {
        require_file(rerank_run_path(), "reranked run", "produce it with `scentrank rerank`");
        run = load_run(rerank_run_path(), RunFormat::trec, {&corpus(), nullptr});
    } else {
        run = first_stage_run();
    }
    auto report = topk_accuracy(run, qa(), corpus(), config_.ks);
    if (!config_.qrels.empty()) {
        require_file(config_.qrels, "qrels", "check scentrank.qrels");
        auto qrels = load_qrels(config_.qrels);
        report.rows.push_back({"ndcg", config_.ndcg_k, ndcg_at_k(run, qrels, config_.ndcg_k), run.size()});
    }
    if (std::filesystem::exists(predictions_path())) {
        auto predictions = load_predictions(predictions_path());
        report.append(reader_report(predictions, qa()));
    }
    std::filesystem::create_directories(config_.work_dir);
    report.write_jsonl(report_path());
    report.write_tsv(out_);

    std::vector<LatencySample> samples;
    for (const auto& path : {scent_latency_path(), score_latency_path()}) {
        if (!std::filesystem::exists(path)) continue;
        auto part = LatencySink::load_jsonl(path);
        samples.insert(samples.end(), part.begin(), part.end());
    }
    if (!samples.empty()) {
        auto latency = latency_report(with_derived_totals(samples));
        latency.write_jsonl(latency_report_path());
        latency.write_tsv(out_);
    }
    return report;
}

std::filesystem::path Pipeline::cmd_rag() {
    if (!backends_.reader) {
        throw ValidationError("rag needs a generation backend; set scentrank.generation.endpoint or generation.backend=lead");
    }
    require_file(rerank_sidecar_path(), "rerank sidecar", "produce it with `scentrank rerank`");
    auto results = load_rerank_sidecar(rerank_sidecar_path());
    const auto& dataset = qa();
    const auto& passages = corpus();
    std::vector<Prediction> predictions(results.size());
    parallel_for(results.size(), config_.scent_parallelism, [&](std::size_t i) {
        const auto* ex = dataset.find(results[i].query_id);
        if (!ex) throw ValidationError("reranked query \"" + results[i].query_id + "\" is not in the QA dataset");
        predictions[i] = answer(*backends_.reader, ex->question, results[i], passages, config_.reader, config_.retry);
    });
    std::filesystem::create_directories(config_.work_dir);
    write_predictions(predictions, predictions_path());
    out_ << "answered " << predictions.size() << " queries -> " << predictions_path().string() << '\n';
    return predictions_path();
}

SweepReport Pipeline::cmd_sweep() {
    std::size_t axes = !config_.sweep_candidate_counts.empty() + !config_.sweep_scent_max_tokens.empty() +
                       !config_.sweep_target_caps.empty();
    if (axes == 0) {
        throw ValidationError(
            "sweep needs one axis: sweep.candidate_count, sweep.scent_max_tokens or sweep.target_token_cap");
    }
    if (axes > 1 && !config_.sweep_allow_multi_axis) {
        throw ValidationError("sweep over several axes multiplies the work; set sweep.allow_multi_axis=true to allow it");
    }
    if (config_.rerank.mode != ScoringMode::retrieval_only && !backends_.scoring) {
        throw ValidationError("sweep needs a scoring backend");
    }
    auto or_default = [](const std::vector<std::size_t>& values, std::size_t fallback) {
        return values.empty() ? std::vector<std::size_t>{fallback} : values;
    };
    auto counts = or_default(config_.sweep_candidate_counts, config_.candidate_count);
    auto scent_lengths = or_default(config_.sweep_scent_max_tokens, config_.scent.max_tokens);
    auto target_caps = or_default(config_.sweep_target_caps, config_.rank_template.target_token_cap);
    for (auto c : counts) {
        if (c < 1) throw ValidationError("sweep candidate counts must be >= 1");
    }

    auto run = first_stage_run();
    (void)qa();
    UnigramBackend unused;
    MemoizingScoringBackend memo(backends_.scoring ? *backends_.scoring : unused);

    SweepReport sweep;
    for (auto scent_len : scent_lengths) {
        auto params = config_.scent;
        params.max_tokens = scent_len;
        std::unordered_map<std::string, AnswerScent> scents;
        if (mode_needs_scent()) scents = resolve_scents(params, nullptr);
        for (auto cap : target_caps) {
            auto rank_template = config_.rank_template;
            rank_template.target_token_cap = cap;
            for (auto count : counts) {
                auto results = rerank_all(run, scents, count, rank_template, memo, nullptr);
                auto report = topk_accuracy(to_run(results), qa(), corpus(), config_.ks);
                sweep.points.push_back({count, scent_len, cap, std::move(report)});
            }
        }
    }
    std::filesystem::create_directories(config_.work_dir);
    {
        std::ofstream file(sweep_path(), std::ios::binary | std::ios::trunc);
        if (!file) throw ValidationError("cannot write " + sweep_path().string());
        sweep.write_tsv(file);
    }
    sweep.write_tsv(out_);
    return sweep;
}

}  // namespace scentrank
