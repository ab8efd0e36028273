#include "scentrank/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "scentrank/error.hpp"

namespace scentrank {
namespace {

constexpr std::string_view kPrefix = "scentrank.";

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::size_t to_count(std::string_view key, std::string_view value) {
    auto v = trim(value);
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
        throw ValidationError("config " + std::string(key) + ": expected a non-negative integer, got \"" + std::string(value) + "\"");
    }
    return out;
}

int to_int(std::string_view key, std::string_view value) {
    auto v = trim(value);
    int out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
        throw ValidationError("config " + std::string(key) + ": expected an integer, got \"" + std::string(value) + "\"");
    }
    return out;
}

double to_real(std::string_view key, std::string_view value) {
    auto v = trim(value);
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ValidationError("config " + std::string(key) + ": expected a number, got \"" + std::string(value) + "\"");
}

bool to_bool(std::string_view key, std::string_view value) {
    auto v = trim(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError("config " + std::string(key) + ": expected a boolean, got \"" + std::string(value) + "\"");
}

std::string real_text(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string list_text(const std::vector<std::size_t>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(values[i]);
    }
    return out;
}

struct Key {
    std::string name;
    std::function<void(PipelineConfig&, std::string_view)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

#define SR_PATH(key, field)                                                                        \
    Key{key, [](PipelineConfig& c, std::string_view v) { c.field = std::string(v); },             \
        [](const PipelineConfig& c) { return c.field.string(); }}
#define SR_STRING(key, field)                                                                      \
    Key{key, [](PipelineConfig& c, std::string_view v) { c.field = std::string(v); },             \
        [](const PipelineConfig& c) { return std::string(c.field); }}
#define SR_COUNT(key, field)                                                                       \
    Key{key, [](PipelineConfig& c, std::string_view v) { c.field = to_count(key, v); },           \
        [](const PipelineConfig& c) { return std::to_string(c.field); }}
#define SR_REAL(key, field)                                                                        \
    Key{key, [](PipelineConfig& c, std::string_view v) { c.field = to_real(key, v); },            \
        [](const PipelineConfig& c) { return real_text(c.field); }}
#define SR_BOOL(key, field)                                                                        \
    Key{key, [](PipelineConfig& c, std::string_view v) { c.field = to_bool(key, v); },            \
        [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define SR_LIST(key, field)                                                                        \
    Key{key, [](PipelineConfig& c, std::string_view v) { c.field = parse_count_list(v); },        \
        [](const PipelineConfig& c) { return list_text(c.field); }}
#define SR_MILLIS(key, field)                                                                      \
    Key{key,                                                                                       \
        [](PipelineConfig& c, std::string_view v) { c.field = std::chrono::milliseconds(to_count(key, v)); }, \
        [](const PipelineConfig& c) { return std::to_string(c.field.count()); }}

const std::vector<Key>& registry() {
    static const std::vector<Key> keys = {
        SR_PATH("scentrank.corpus", corpus),
        Key{"scentrank.corpus_format",
            [](PipelineConfig& c, std::string_view v) { c.corpus_format = parse_passage_format(trim(v)); },
            [](const PipelineConfig& c) {
                return std::string(c.corpus_format == PassageFormat::jsonl ? "jsonl" : "tsv");
            }},
        SR_PATH("scentrank.qa", qa),
        SR_PATH("scentrank.run", run),
        Key{"scentrank.run_format", [](PipelineConfig& c, std::string_view v) { c.run_format = parse_run_format(trim(v)); },
            [](const PipelineConfig& c) { return std::string(c.run_format == RunFormat::trec ? "trec" : "jsonl"); }},
        SR_PATH("scentrank.qrels", qrels),
        SR_PATH("scentrank.work_dir", work_dir),
        SR_PATH("scentrank.cache_dir", cache_dir),
        SR_REAL("scentrank.retriever.k1", bm25.k1),
        SR_REAL("scentrank.retriever.b", bm25.b),
        SR_COUNT("scentrank.candidate_count", candidate_count),
        SR_COUNT("scentrank.threads", threads),
        Key{"scentrank.scent.source", [](PipelineConfig& c, std::string_view v) { c.scent_source = parse_scent_source(trim(v)); },
            [](const PipelineConfig& c) { return std::string(to_string(c.scent_source)); }},
        SR_STRING("scentrank.scent.constant", scent_constant),
        SR_STRING("scentrank.scent.model", scent.model_name),
        SR_REAL("scentrank.scent.temperature", scent.temperature),
        SR_COUNT("scentrank.scent.max_tokens", scent.max_tokens),
        SR_STRING("scentrank.scent.prompt_template", scent.prompt_template),
        SR_COUNT("scentrank.scent.parallelism", scent_parallelism),
        SR_STRING("scentrank.generation.backend", generation_backend),
        SR_STRING("scentrank.generation.endpoint", generation_endpoint.base_url),
        SR_MILLIS("scentrank.generation.timeout_ms", generation_endpoint.timeout),
        SR_STRING("scentrank.scoring.backend", scoring_backend),
        SR_REAL("scentrank.scoring.alpha", unigram.alpha),
        SR_STRING("scentrank.scoring.endpoint", scoring_remote.endpoint.base_url),
        SR_STRING("scentrank.scoring.model", scoring_remote.model),
        SR_COUNT("scentrank.scoring.max_in_flight", scoring_remote.max_in_flight),
        SR_MILLIS("scentrank.scoring.timeout_ms", scoring_remote.endpoint.timeout),
        SR_STRING("scentrank.rank.layout", rank_template.layout),
        Key{"scentrank.rank.target_source",
            [](PipelineConfig& c, std::string_view v) { c.rank_template.target_source = parse_target_source(trim(v)); },
            [](const PipelineConfig& c) { return std::string(to_string(c.rank_template.target_source)); }},
        SR_STRING("scentrank.rank.target_constant", rank_template.target_constant),
        SR_COUNT("scentrank.rank.doc_token_cap", rank_template.doc_token_cap),
        SR_COUNT("scentrank.rank.target_token_cap", rank_template.target_token_cap),
        SR_STRING("scentrank.rank.upr_prefix", rank_template.upr_prefix),
        Key{"scentrank.rank.mode", [](PipelineConfig& c, std::string_view v) { c.rerank.mode = parse_scoring_mode(trim(v)); },
            [](const PipelineConfig& c) { return std::string(to_string(c.rerank.mode)); }},
        SR_REAL("scentrank.rank.lambda", rerank.lambda),
        Key{"scentrank.rank.aggregation",
            [](PipelineConfig& c, std::string_view v) { c.rerank.aggregation = parse_aggregation(trim(v)); },
            [](const PipelineConfig& c) { return std::string(to_string(c.rerank.aggregation)); }},
        SR_BOOL("scentrank.rank.strict", rerank.strict),
        SR_COUNT("scentrank.rank.parallelism", rerank.parallelism),
        SR_LIST("scentrank.eval.ks", ks),
        SR_COUNT("scentrank.eval.ndcg_k", ndcg_k),
        SR_STRING("scentrank.eval.target", eval_target),
        SR_COUNT("scentrank.reader.top_k_docs", reader.top_k_docs),
        SR_STRING("scentrank.reader.template", reader.prompt_template),
        SR_STRING("scentrank.reader.question_only_template", reader.question_only_template),
        SR_COUNT("scentrank.reader.max_answer_tokens", reader.max_answer_tokens),
        SR_REAL("scentrank.reader.temperature", reader.temperature),
        SR_STRING("scentrank.reader.model", reader.model_name),
        SR_BOOL("scentrank.reader.question_only", reader.question_only),
        SR_LIST("scentrank.sweep.candidate_count", sweep_candidate_counts),
        SR_LIST("scentrank.sweep.scent_max_tokens", sweep_scent_max_tokens),
        SR_LIST("scentrank.sweep.target_token_cap", sweep_target_caps),
        SR_BOOL("scentrank.sweep.allow_multi_axis", sweep_allow_multi_axis),
        SR_STRING("scentrank.serve.host", serve_host),
        Key{"scentrank.serve.port", [](PipelineConfig& c, std::string_view v) { c.serve_port = to_int("scentrank.serve.port", v); },
            [](const PipelineConfig& c) { return std::to_string(c.serve_port); }},
        Key{"scentrank.retry.attempts",
            [](PipelineConfig& c, std::string_view v) { c.retry.attempts = to_int("scentrank.retry.attempts", v); },
            [](const PipelineConfig& c) { return std::to_string(c.retry.attempts); }},
        SR_MILLIS("scentrank.retry.initial_backoff_ms", retry.initial_backoff),
    };
    return keys;
}

#undef SR_PATH
#undef SR_STRING
#undef SR_COUNT
#undef SR_REAL
#undef SR_BOOL
#undef SR_LIST
#undef SR_MILLIS

const Key& lookup(std::string_view key) {
    std::string full = key.starts_with(kPrefix) ? std::string(key) : std::string(kPrefix) + std::string(key);
    for (const auto& k : registry()) {
        if (k.name == full) return k;
    }
    throw ValidationError("unknown config key \"" + std::string(key) + "\"");
}

std::string yaml_scalar(const std::string& key, const YAML::Node& node) {
    if (node.IsScalar()) return node.as<std::string>();
    if (node.IsNull()) return {};
    if (node.IsSequence()) {
        std::string out;
        for (std::size_t i = 0; i < node.size(); ++i) {
            if (!node[i].IsScalar()) throw ValidationError("config " + key + ": list items must be scalars");
            if (i) out += ",";
            out += node[i].as<std::string>();
        }
        return out;
    }
    throw ValidationError("config " + key + ": nested mappings are not allowed; use flat dotted keys");
}

}  // namespace

ScentSource parse_scent_source(std::string_view name) {
    if (name == "llm") return ScentSource::llm;
    if (name == "gold") return ScentSource::gold;
    if (name == "constant") return ScentSource::constant;
    throw ValidationError("unknown scent source \"" + std::string(name) + "\" (llm, gold, constant)");
}

std::string_view to_string(ScentSource value) {
    switch (value) {
        case ScentSource::llm: return "llm";
        case ScentSource::gold: return "gold";
        case ScentSource::constant: return "constant";
    }
    return "?";
}

std::filesystem::path PipelineConfig::effective_cache_dir() const {
    return cache_dir.empty() ? work_dir / "cache" : cache_dir;
}

void PipelineConfig::validate() const {
    bm25.validate();
    scent.validate();
    rank_template.validate();
    reader.validate();
    if (candidate_count < 1) throw ValidationError("candidate_count must be >= 1");
    if (ks.empty()) throw ValidationError("eval.ks must list at least one cutoff");
    for (auto k : ks) {
        if (k < 1) throw ValidationError("eval.ks entries must be >= 1");
        if (k > candidate_count) {
            throw ValidationError("candidate_count (" + std::to_string(candidate_count) + ") must be >= max(eval.ks) (" +
                                  std::to_string(k) + ")");
        }
    }
    if (ndcg_k < 1) throw ValidationError("eval.ndcg_k must be >= 1");
    if (!(rerank.lambda >= 0.0 && rerank.lambda <= 1.0)) throw ValidationError("rank.lambda must lie in [0, 1]");
    if (scent_source == ScentSource::constant && scent_constant.empty()) {
        throw ValidationError("scent.constant must be non-empty");
    }
    if (generation_backend != "remote" && generation_backend != "lead") {
        throw ValidationError("generation.backend must be remote or lead");
    }
    if (scoring_backend != "unigram" && scoring_backend != "remote") {
        throw ValidationError("scoring.backend must be unigram or remote");
    }
    if (!(unigram.alpha > 0.0)) throw ValidationError("scoring.alpha must be > 0");
    if (eval_target != "rerank" && eval_target != "retrieval") {
        throw ValidationError("eval.target must be rerank or retrieval");
    }
    if (retry.attempts < 1) throw ValidationError("retry.attempts must be >= 1");
}

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value) {
    lookup(key).set(config, value);
}

std::string get_config_value(const PipelineConfig& config, std::string_view key) { return lookup(key).get(config); }

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : registry()) out.push_back(k.name);
    return out;
}

std::vector<std::size_t> parse_count_list(std::string_view text) {
    std::vector<std::size_t> out;
    std::string item;
    std::istringstream in{std::string(text)};
    while (std::getline(in, item, ',')) {
        auto t = trim(item);
        if (t.empty()) continue;
        out.push_back(to_count("list", t));
    }
    return out;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
    PipelineConfig config;
    if (file) {
        YAML::Node root;
        try {
            root = YAML::LoadFile(file->string());
        } catch (const YAML::Exception& e) {
            throw ValidationError("cannot read config " + file->string() + ": " + e.what());
        }
        if (root && !root.IsNull()) {
            if (!root.IsMap()) throw ValidationError("config " + file->string() + " must be a mapping of dotted keys");
            for (const auto& kv : root) {
                auto key = kv.first.as<std::string>();
                set_config_value(config, key, yaml_scalar(key, kv.second));
            }
        }
    }
    for (const auto& [key, value] : overrides) set_config_value(config, key, value);
    auto key = api_key_from_environment();
    config.generation_endpoint.api_key = key;
    config.scoring_remote.endpoint.api_key = key;
    config.scoring_remote.retry = config.retry;
    config.validate();
    return config;
}

}  // namespace scentrank
