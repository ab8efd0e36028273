#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scentrank/bm25.hpp"
#include "scentrank/corpus.hpp"
#include "scentrank/http_client.hpp"
#include "scentrank/rag_reader.hpp"
#include "scentrank/reranker.hpp"
#include "scentrank/scent.hpp"
#include "scentrank/scoring.hpp"

namespace scentrank {

enum class ScentSource { llm, gold, constant };
ScentSource parse_scent_source(std::string_view name);
std::string_view to_string(ScentSource value);

/// Every pipeline setting. Keys live in a flat "scentrank.*" namespace; see
/// config_keys() for the full list.
struct PipelineConfig {
    std::filesystem::path corpus;
    PassageFormat corpus_format = PassageFormat::jsonl;
    std::filesystem::path qa;
    /// Externally produced first-stage run; empty means the built-in BM25 run.
    std::filesystem::path run;
    RunFormat run_format = RunFormat::trec;
    std::filesystem::path qrels;
    std::filesystem::path work_dir = "scentrank-work";
    /// Defaults to <work_dir>/cache.
    std::filesystem::path cache_dir;

    Bm25Params bm25;
    std::size_t candidate_count = 1000;
    std::size_t threads = 1;

    ScentSource scent_source = ScentSource::llm;
    std::string scent_constant = "<UNK>";
    ScentParams scent;
    std::size_t scent_parallelism = 4;

    /// "remote" or "lead" (offline extractive stand-in).
    std::string generation_backend = "remote";
    EndpointConfig generation_endpoint;

    /// "unigram" or "remote".
    std::string scoring_backend = "unigram";
    UnigramOracleParams unigram;
    RemoteScoringConfig scoring_remote;

    RankTemplate rank_template;
    RerankOptions rerank;

    std::vector<std::size_t> ks{1, 5, 10};
    std::size_t ndcg_k = 10;
    /// "rerank" or "retrieval": which run cmd_eval scores.
    std::string eval_target = "rerank";

    ReaderConfig reader;

    std::vector<std::size_t> sweep_candidate_counts;
    std::vector<std::size_t> sweep_scent_max_tokens;
    std::vector<std::size_t> sweep_target_caps;
    bool sweep_allow_multi_axis = false;

    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;

    RetryPolicy retry;

    std::filesystem::path effective_cache_dir() const;
    /// Value-level checks shared by all commands (paths are checked per command).
    void validate() const;
};

/// Sets one key from its textual value. Keys may omit the "scentrank." prefix.
/// Throws ValidationError for unknown keys or unparsable values.
void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value);

/// Current value of a key, formatted as it would be written in a config file.
std::string get_config_value(const PipelineConfig& config, std::string_view key);

/// All recognised keys, fully qualified.
std::vector<std::string> config_keys();

/// Defaults, then the YAML file (flat mapping of dotted keys), then overrides
/// in order. The API key is taken from SCENTRANK_API_KEY.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Splits "1, 5,10" into counts. Throws ValidationError on junk.
std::vector<std::size_t> parse_count_list(std::string_view text);

}  // namespace scentrank
