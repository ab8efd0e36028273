#include "scentrank/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "scentrank/error.hpp"
#include "scentrank/tokenizer.hpp"

namespace scentrank {
namespace {

bool is_ascii_punct(unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w) out.push_back(std::move(w));
    return out;
}

bool contains_on_boundary(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return false;
    std::string padded_h = " " + std::string(haystack) + " ";
    std::string padded_n = " " + std::string(needle) + " ";
    return padded_h.find(padded_n) != std::string::npos;
}

std::string format_fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

nlohmann::json row_json(const MetricRow& row) {
    nlohmann::json j = {{"metric", row.metric}, {"k", nullptr}, {"value", row.value}, {"n_queries", row.n_queries}};
    if (row.k) j["k"] = *row.k;
    return j;
}

}  // namespace

std::string normalize_answer(std::string_view text) {
    auto lowered = to_lower_utf8(text);
    std::string no_punct;
    no_punct.reserve(lowered.size());
    for (unsigned char c : lowered) {
        if (!is_ascii_punct(c)) no_punct.push_back(static_cast<char>(c));
    }
    std::string out;
    for (const auto& word : split_ws(no_punct)) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

bool has_answer(const Passage& passage, std::span<const std::string> golds) {
    auto text = normalize_answer(passage.full_text());
    return std::any_of(golds.begin(), golds.end(),
                       [&](const std::string& g) { return contains_on_boundary(text, normalize_answer(g)); });
}

const MetricRow* EvalReport::find(std::string_view metric, std::optional<std::size_t> k) const {
    for (const auto& row : rows) {
        if (row.metric == metric && row.k == k) return &row;
    }
    return nullptr;
}

double EvalReport::value(std::string_view metric, std::optional<std::size_t> k) const {
    if (const auto* row = find(metric, k)) return row->value;
    throw ValidationError("report has no metric " + std::string(metric) + (k ? "@" + std::to_string(*k) : ""));
}

void EvalReport::append(const EvalReport& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    if (ks.empty()) ks = other.ks;
    n_queries = std::max(n_queries, other.n_queries);
}

void EvalReport::write_tsv(std::ostream& out) const {
    out << "metric\tk\tvalue\tn_queries\n";
    for (const auto& row : rows) {
        out << row.metric << '\t' << (row.k ? std::to_string(*row.k) : "-") << '\t' << format_fixed(row.value) << '\t'
            << row.n_queries << '\n';
    }
}

void EvalReport::write_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write report " + path.string());
    for (const auto& row : rows) out << row_json(row).dump() << '\n';
}

EvalReport EvalReport::load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open report " + path.string());
    EvalReport report;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            MetricRow row;
            row.metric = j.at("metric").get<std::string>();
            if (!j.at("k").is_null()) {
                row.k = j["k"].get<std::size_t>();
                if (std::find(report.ks.begin(), report.ks.end(), *row.k) == report.ks.end()) report.ks.push_back(*row.k);
            }
            row.value = j.at("value").get<double>();
            row.n_queries = j.at("n_queries").get<std::size_t>();
            report.n_queries = std::max(report.n_queries, row.n_queries);
            report.rows.push_back(std::move(row));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad report row: " + e.what());
        }
    }
    return report;
}

EvalReport topk_accuracy_from_flags(std::span<const std::vector<bool>> flags, std::span<const std::size_t> ks) {
    if (ks.empty()) throw ValidationError("topk_accuracy needs at least one cutoff");
    EvalReport report;
    report.ks.assign(ks.begin(), ks.end());
    report.n_queries = flags.size();
    double sum = 0.0;
    for (auto k : ks) {
        if (k < 1) throw ValidationError("Top-K cutoff must be >= 1");
        std::size_t hits = 0;
        for (const auto& q : flags) {
            auto end = q.begin() + static_cast<std::ptrdiff_t>(std::min(k, q.size()));
            hits += std::find(q.begin(), end, true) != end;
        }
        double acc = flags.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(flags.size());
        report.rows.push_back({std::string(kTopKMetric), k, acc, flags.size()});
        sum += acc;
    }
    report.rows.push_back({std::string(kTopKAvgMetric), std::nullopt, sum / static_cast<double>(ks.size()), flags.size()});
    return report;
}

std::vector<bool> answer_flags(const std::vector<RunEntry>& entries, const QAExample& example, const Corpus& corpus) {
    std::vector<bool> flags;
    flags.reserve(entries.size());
    for (const auto& e : entries) flags.push_back(has_answer(corpus.at(e.passage_id), example.gold_answers));
    return flags;
}

EvalReport topk_accuracy(const RetrievalRun& run, const QADataset& qa, const Corpus& corpus,
                         std::span<const std::size_t> ks, std::vector<std::string>* warnings) {
    for (const auto& [qid, entries] : run.queries()) {
        if (!qa.find(qid)) throw ValidationError("run query \"" + qid + "\" is not in the QA dataset");
    }
    std::vector<std::vector<bool>> flags;
    flags.reserve(qa.size());
    std::size_t missing = 0;
    for (const auto& ex : qa.examples()) {
        const auto* entries = run.find(ex.query_id);
        if (!entries) {
            ++missing;
            flags.emplace_back();
            continue;
        }
        flags.push_back(answer_flags(*entries, ex, corpus));
    }
    if (missing > 0) {
        auto message = std::to_string(missing) + " QA queries missing from the run; counted as misses";
        std::cerr << "warning: " << message << '\n';
        if (warnings) warnings->push_back(std::move(message));
    }
    return topk_accuracy_from_flags(flags, ks);
}

double ndcg_of_grades(std::span<const int> ranked_grades, std::span<const int> judged, std::size_t k) {
    if (k < 1) throw ValidationError("nDCG cutoff must be >= 1");
    auto dcg = [k](std::span<const int> grades) {
        double sum = 0.0;
        for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
            if (grades[i] > 0) sum += (std::exp2(grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
        }
        return sum;
    };
    std::vector<int> ideal(judged.begin(), judged.end());
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = dcg(ideal);
    if (idcg <= 0.0) return 0.0;
    return dcg(ranked_grades) / idcg;
}

double ndcg_at_k(const RetrievalRun& run, const QrelSet& qrels, std::size_t k) {
    if (k < 1) throw ValidationError("nDCG cutoff must be >= 1");
    if (run.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [qid, entries] : run.queries()) {
        std::vector<int> ranked;
        ranked.reserve(std::min(k, entries.size()));
        for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) ranked.push_back(qrels.grade(qid, entries[i].passage_id));
        sum += ndcg_of_grades(ranked, qrels.grades(qid), k);
    }
    return sum / static_cast<double>(run.size());
}

ReaderScores reader_metrics(std::string_view prediction, std::span<const std::string> golds) {
    if (golds.empty()) throw ValidationError("reader_metrics needs at least one gold answer");
    ReaderScores out;
    auto pred = normalize_answer(prediction);
    auto pred_tokens = split_ws(pred);
    for (const auto& g : golds) {
        auto gold = normalize_answer(g);
        if (!gold.empty() && pred == gold) out.em = 1;
        if (!gold.empty() && pred.find(gold) != std::string::npos) out.containment = 1;
        auto gold_tokens = split_ws(gold);
        if (gold_tokens.empty()) continue;
        std::size_t matched = 0;
        for (const auto& t : gold_tokens) {
            matched += std::find(pred_tokens.begin(), pred_tokens.end(), t) != pred_tokens.end();
        }
        out.recall = std::max(out.recall, static_cast<double>(matched) / static_cast<double>(gold_tokens.size()));
    }
    return out;
}

std::string_view phase_name(Phase phase) {
    switch (phase) {
        case Phase::scent: return "scent";
        case Phase::score: return "score";
        case Phase::total: return "total";
    }
    return "?";
}

Phase parse_phase(std::string_view name) {
    if (name == "scent") return Phase::scent;
    if (name == "score") return Phase::score;
    if (name == "total") return Phase::total;
    throw ValidationError("unknown latency phase \"" + std::string(name) + "\"");
}

void LatencySink::add(std::string query_id, Phase phase, double millis) {
    std::lock_guard lock(mutex_);
    samples_.push_back({std::move(query_id), phase, millis});
}

std::vector<LatencySample> LatencySink::samples() const {
    std::lock_guard lock(mutex_);
    return samples_;
}

void LatencySink::write_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write latency file " + path.string());
    for (const auto& s : samples()) {
        out << nlohmann::json{{"query_id", s.query_id}, {"phase", phase_name(s.phase)}, {"millis", s.millis}}.dump() << '\n';
    }
}

std::vector<LatencySample> LatencySink::load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open latency file " + path.string());
    std::vector<LatencySample> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            out.push_back({j.at("query_id").get<std::string>(), parse_phase(j.at("phase").get<std::string>()),
                           j.at("millis").get<double>()});
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ": bad latency record: " + e.what());
        }
    }
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = static_cast<std::size_t>(std::ceil(pos));
    return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

std::vector<LatencySample> with_derived_totals(std::span<const LatencySample> samples) {
    std::vector<LatencySample> out(samples.begin(), samples.end());
    std::map<std::string, double> parts;
    std::map<std::string, bool> has_total;
    for (const auto& s : samples) {
        if (s.phase == Phase::total) {
            has_total[s.query_id] = true;
        } else {
            parts[s.query_id] += s.millis;
        }
    }
    for (const auto& [qid, millis] : parts) {
        if (!has_total[qid]) out.push_back({qid, Phase::total, millis});
    }
    return out;
}

EvalReport latency_report(std::span<const LatencySample> samples) {
    if (samples.empty()) throw ValidationError("latency_report needs at least one sample");
    EvalReport report;
    for (Phase phase : {Phase::scent, Phase::score, Phase::total}) {
        std::vector<double> values;
        for (const auto& s : samples) {
            if (s.phase == phase) values.push_back(s.millis);
        }
        if (values.empty()) continue;
        auto prefix = "latency_" + std::string(phase_name(phase)) + "_";
        double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        report.rows.push_back({prefix + "mean_ms", std::nullopt, mean, values.size()});
        report.rows.push_back({prefix + "p50_ms", std::nullopt, percentile(values, 0.5), values.size()});
        report.rows.push_back({prefix + "p95_ms", std::nullopt, percentile(values, 0.95), values.size()});
        report.n_queries = std::max(report.n_queries, values.size());
    }
    return report;
}

}  // namespace scentrank
