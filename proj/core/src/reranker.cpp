#include "scentrank/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "scentrank/error.hpp"
#include "scentrank/parallel.hpp"
#include "scentrank/tokenizer.hpp"

namespace scentrank {
namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
    return n;
}

/// Replaces each placeholder exactly once, scanning left to right so that
/// substituted values are never re-expanded.
std::string fill(std::string_view layout, std::span<const std::pair<std::string_view, std::string_view>> values) {
    std::string out;
    std::size_t pos = 0;
    while (pos < layout.size()) {
        std::size_t best = std::string_view::npos;
        const std::pair<std::string_view, std::string_view>* hit = nullptr;
        for (const auto& kv : values) {
            auto at = layout.find(kv.first, pos);
            if (at < best) {
                best = at;
                hit = &kv;
            }
        }
        if (!hit) {
            out.append(layout.substr(pos));
            break;
        }
        out.append(layout.substr(pos, best - pos));
        out.append(hit->second);
        pos = best + hit->first.size();
    }
    return out;
}

ScoringRequest upr_request(std::string_view question, const Passage& passage, std::size_t cap,
                           std::string_view prefix_template) {
    if (count_occurrences(prefix_template, "{question}") != 1) {
        throw ValidationError("UPR prefix must contain {question} exactly once");
    }
    auto full = passage.full_text();
    auto target = truncate_tokens(full, cap);
    if (token_spans(target).empty()) throw ValidationError("passage \"" + passage.id + "\" has no scorable tokens");
    const std::pair<std::string_view, std::string_view> values[] = {{"{question}", question}};
    return {fill(prefix_template, values), std::string(target)};
}

double log_softmax(std::span<const double> scores, std::size_t index) {
    double max = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - max);
    return (scores[index] - max) - std::log(sum);
}

nlohmann::json candidate_json(const RerankResult& r, const ScoredCandidate& c, std::size_t rank) {
    nlohmann::json j = {{"query_id", r.query_id},
                        {"passage_id", c.passage_id},
                        {"rank", rank},
                        {"retrieval_rank", c.retrieval_rank},
                        {"retrieval_score", c.retrieval_score},
                        {"mean_loglik", c.mean_loglik},
                        {"sum_loglik", c.sum_loglik},
                        {"token_count", c.token_count},
                        {"combined_score", c.combined_score},
                        {"mode", to_string(r.mode)},
                        {"failed", c.failed}};
    if (!c.diagnostic.empty()) j["diagnostic"] = c.diagnostic;
    return j;
}

}  // namespace

TargetSource parse_target_source(std::string_view name) {
    if (name == "scent") return TargetSource::scent;
    if (name == "gold_answer") return TargetSource::gold_answer;
    if (name == "constant") return TargetSource::constant;
    throw ValidationError("unknown target source \"" + std::string(name) + "\" (scent, gold_answer, constant)");
}

ScoringMode parse_scoring_mode(std::string_view name) {
    if (name == "asrank") return ScoringMode::asrank;
    if (name == "asrank_bayes") return ScoringMode::asrank_bayes;
    if (name == "upr") return ScoringMode::upr;
    if (name == "retrieval_only") return ScoringMode::retrieval_only;
    throw ValidationError("unknown scoring mode \"" + std::string(name) +
                          "\" (asrank, asrank_bayes, upr, retrieval_only)");
}

Aggregation parse_aggregation(std::string_view name) {
    if (name == "mean") return Aggregation::mean;
    if (name == "sum") return Aggregation::sum;
    throw ValidationError("unknown aggregation \"" + std::string(name) + "\" (mean, sum)");
}

std::string_view to_string(TargetSource value) {
    switch (value) {
        case TargetSource::scent: return "scent";
        case TargetSource::gold_answer: return "gold_answer";
        case TargetSource::constant: return "constant";
    }
    return "?";
}

std::string_view to_string(ScoringMode value) {
    switch (value) {
        case ScoringMode::asrank: return "asrank";
        case ScoringMode::asrank_bayes: return "asrank_bayes";
        case ScoringMode::upr: return "upr";
        case ScoringMode::retrieval_only: return "retrieval_only";
    }
    return "?";
}

std::string_view to_string(Aggregation value) { return value == Aggregation::mean ? "mean" : "sum"; }

void RankTemplate::validate() const {
    for (std::string_view p : {"{document}", "{question}", "{scent}"}) {
        if (count_occurrences(layout, p) != 1) {
            throw ValidationError("rank layout must contain " + std::string(p) + " exactly once");
        }
    }
    if (count_occurrences(upr_prefix, "{question}") != 1) {
        throw ValidationError("UPR prefix must contain {question} exactly once");
    }
    if (doc_token_cap < 1 || target_token_cap < 1) throw ValidationError("rank token caps must be >= 1");
}

ScoringRequest build_rank_input(const Passage& passage, std::string_view question, const AnswerScent& scent,
                                const RankTemplate& rank_template, std::span<const std::string> gold_answers) {
    rank_template.validate();
    auto full = passage.full_text();
    auto document = truncate_tokens(full, rank_template.doc_token_cap);
    const std::pair<std::string_view, std::string_view> values[] = {
        {"{document}", document}, {"{question}", question}, {"{scent}", scent.text}};

    std::string_view target;
    switch (rank_template.target_source) {
        case TargetSource::scent: target = scent.text; break;
        case TargetSource::gold_answer:
            if (gold_answers.empty()) throw ValidationError("target_source=gold_answer needs gold answers");
            target = gold_answers.front();
            break;
        case TargetSource::constant: target = rank_template.target_constant; break;
    }
    target = truncate_tokens(target, rank_template.target_token_cap);
    if (target.empty() || token_spans(target).empty()) {
        throw ValidationError("rank target is empty after truncation (source " +
                              std::string(to_string(rank_template.target_source)) + ")");
    }
    return ScoringRequest{fill(rank_template.layout, values), std::string(target)};
}

CandidateScore score_candidate(ScoringBackend& backend, const ScoringRequest& request) {
    auto reply = backend.score(request);
    if (reply.empty()) throw BackendError("backend returned no target token logprobs");
    CandidateScore out;
    out.token_count = reply.size();
    for (const auto& t : reply) out.sum_loglik += t.logprob;
    out.mean_loglik = out.sum_loglik / static_cast<double>(out.token_count);
    return out;
}

double combine_with_prior(double loglik, std::span<const double> retrieval_scores, std::size_t index, double lambda) {
    if (retrieval_scores.empty()) throw ValidationError("combine_with_prior needs retrieval scores");
    if (index >= retrieval_scores.size()) throw ValidationError("combine_with_prior index out of range");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
    if (lambda == 0.0) return loglik;
    return (1.0 - lambda) * loglik + lambda * log_softmax(retrieval_scores, index);
}

double upr_score(ScoringBackend& backend, std::string_view question, const Passage& passage, std::size_t cap,
                 std::string_view prefix_template) {
    return score_candidate(backend, upr_request(question, passage, cap, prefix_template)).mean_loglik;
}

RerankResult rerank(ScoringBackend& backend, std::string_view query_id, std::string_view question,
                    const AnswerScent* scent, std::span<const Candidate> candidates,
                    const RankTemplate& rank_template, const RerankOptions& options,
                    std::span<const std::string> gold_answers, LatencySink* latency) {
    if (candidates.empty()) throw ValidationError("rerank needs at least one candidate");
    const bool needs_scent = options.mode == ScoringMode::asrank || options.mode == ScoringMode::asrank_bayes;
    if (needs_scent && !scent) throw ValidationError("rerank mode " + std::string(to_string(options.mode)) + " needs a scent");
    if (!(options.lambda >= 0.0 && options.lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
    rank_template.validate();

    RerankResult result;
    result.query_id = std::string(query_id);
    result.mode = options.mode;
    result.candidates.resize(candidates.size());
    std::vector<double> retrieval_scores(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!candidates[i].passage) throw ValidationError("rerank candidate without a passage");
        auto& c = result.candidates[i];
        c.passage_id = candidates[i].passage->id;
        c.retrieval_rank = candidates[i].retrieval_rank;
        c.retrieval_score = candidates[i].retrieval_score;
        retrieval_scores[i] = candidates[i].retrieval_score;
    }

    Stopwatch watch;
    if (options.mode == ScoringMode::retrieval_only) {
        for (auto& c : result.candidates) c.combined_score = c.retrieval_score;
    } else {
        // Results land at the candidate's input index, so completion order
        // never influences the outcome.
        parallel_for(candidates.size(), options.parallelism, [&](std::size_t i) {
            auto& c = result.candidates[i];
            try {
                auto request = options.mode == ScoringMode::upr
                                   ? upr_request(question, *candidates[i].passage, rank_template.doc_token_cap,
                                                 rank_template.upr_prefix)
                                   : build_rank_input(*candidates[i].passage, question, *scent, rank_template,
                                                      gold_answers);
                auto s = score_candidate(backend, request);
                c.mean_loglik = s.mean_loglik;
                c.sum_loglik = s.sum_loglik;
                c.token_count = s.token_count;
            } catch (const Error& e) {
                if (options.strict) {
                    throw BackendError("scoring passage \"" + c.passage_id + "\" for query \"" + result.query_id +
                                       "\" failed: " + e.what());
                }
                c.failed = true;
                c.diagnostic = e.what();
            }
        });
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            auto& c = result.candidates[i];
            if (c.failed) {
                c.combined_score = -std::numeric_limits<double>::infinity();
                result.partial = true;
                continue;
            }
            double loglik = options.aggregation == Aggregation::mean ? c.mean_loglik : c.sum_loglik;
            c.combined_score = options.mode == ScoringMode::asrank_bayes
                                   ? combine_with_prior(loglik, retrieval_scores, i, options.lambda)
                                   : loglik;
        }
    }
    if (latency) latency->add(result.query_id, Phase::score, watch.elapsed_ms());

    std::stable_sort(result.candidates.begin(), result.candidates.end(),
                     [](const ScoredCandidate& a, const ScoredCandidate& b) {
                         if (a.failed != b.failed) return !a.failed;
                         if (!a.failed && a.combined_score != b.combined_score) return a.combined_score > b.combined_score;
                         return a.retrieval_rank < b.retrieval_rank;
                     });
    result.selected = result.candidates.front().passage_id;
    return result;
}

std::vector<Candidate> candidates_from_run(const std::vector<RunEntry>& entries, const Corpus& corpus,
                                           std::size_t depth) {
    std::vector<Candidate> out;
    auto n = std::min(depth, entries.size());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({&corpus.at(entries[i].passage_id), entries[i].rank, entries[i].score});
    }
    return out;
}

RetrievalRun to_run(std::span<const RerankResult> results) {
    RetrievalRun run("asrank");
    for (const auto& r : results) {
        std::vector<RunEntry> entries;
        entries.reserve(r.candidates.size());
        // Failed candidates carry -inf; give them finite, still-descending scores.
        double floor = std::numeric_limits<double>::infinity();
        for (const auto& c : r.candidates) {
            if (!c.failed) floor = std::min(floor, c.combined_score);
        }
        if (!std::isfinite(floor)) floor = 0.0;
        double sink = floor - 1.0;
        for (std::size_t i = 0; i < r.candidates.size(); ++i) {
            const auto& c = r.candidates[i];
            double score = c.failed ? sink-- : c.combined_score;
            entries.push_back({c.passage_id, score, static_cast<int>(i + 1)});
        }
        run.add_query(r.query_id, std::move(entries));
    }
    return run;
}

void write_rerank_run(std::span<const RerankResult> results, const std::filesystem::path& path) {
    write_run(to_run(results), path);
}

void write_rerank_sidecar(std::span<const RerankResult> results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write rerank sidecar " + path.string());
    for (const auto& r : results) {
        for (std::size_t i = 0; i < r.candidates.size(); ++i) out << candidate_json(r, r.candidates[i], i + 1).dump() << '\n';
    }
}

std::vector<RerankResult> load_rerank_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open rerank sidecar " + path.string());
    std::vector<RerankResult> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            auto qid = j.at("query_id").get<std::string>();
            if (out.empty() || out.back().query_id != qid) {
                out.emplace_back();
                out.back().query_id = qid;
                out.back().mode = parse_scoring_mode(j.at("mode").get<std::string>());
            }
            ScoredCandidate c;
            c.passage_id = j.at("passage_id").get<std::string>();
            c.retrieval_rank = j.at("retrieval_rank").get<int>();
            c.retrieval_score = j.at("retrieval_score").get<double>();
            c.mean_loglik = j.at("mean_loglik").get<double>();
            c.sum_loglik = j.at("sum_loglik").get<double>();
            c.token_count = j.at("token_count").get<std::size_t>();
            c.failed = j.at("failed").get<bool>();
            c.combined_score = c.failed ? -std::numeric_limits<double>::infinity() : j.at("combined_score").get<double>();
            if (j.contains("diagnostic")) c.diagnostic = j["diagnostic"].get<std::string>();
            if (c.failed) out.back().partial = true;
            out.back().candidates.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad sidecar record: " + e.what());
        }
    }
    for (auto& r : out) r.selected = r.candidates.front().passage_id;
    return out;
}

}  // namespace scentrank
