// scentrank: retrieval, answer-scent generation, likelihood reranking and
// evaluation from the command line.
//
//   scentrank <command> [--config file.yaml] [--scentrank.<key>=<value> ...]
//
// Exit codes: 0 success, 1 validation/configuration error, 2 backend error.

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scentrank/config.hpp"
#include "scentrank/error.hpp"
#include "scentrank/pipeline.hpp"
#include "scentrank/service.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitBackend = 2;

/// Pulls "--scentrank.key=value" and "--scentrank.key value" out of argv.
std::vector<std::pair<std::string, std::string>> take_overrides(std::vector<std::string>& args) {
    std::vector<std::pair<std::string, std::string>> overrides;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& a = args[i];
        if (!a.starts_with("--scentrank.")) {
            rest.push_back(a);
            continue;
        }
        auto body = a.substr(2);
        auto eq = body.find('=');
        if (eq != std::string::npos) {
            overrides.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else if (i + 1 < args.size()) {
            overrides.emplace_back(body, args[++i]);
        } else {
            throw scentrank::ValidationError("missing value for --" + body);
        }
    }
    args = std::move(rest);
    return overrides;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace scentrank;
    CLI::App app{"Answer-scent reranking pipeline: index, retrieve, scent, rerank, eval, rag, sweep, serve"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand
    app.footer("Any config key can be overridden with --scentrank.<key>=<value>; run `scentrank keys` to list them.");

    std::optional<std::string> config_file;
    std::optional<double> k1, b;
    std::optional<std::size_t> topk;
    app.add_option("-c,--config", config_file, "YAML file of flat scentrank.* keys");
    app.add_option("--k1", k1, "BM25 k1 (scentrank.retriever.k1)");
    app.add_option("--b", b, "BM25 b (scentrank.retriever.b)");
    app.add_option("--topk", topk, "candidates per query (scentrank.candidate_count)");

    auto* index = app.add_subcommand("index", "build the BM25 index snapshot from the corpus");
    auto* retrieve = app.add_subcommand("retrieve", "BM25 top-k retrieval for every question -> trec run");
    auto* scent = app.add_subcommand("scent", "generate (or load cached) answer scents, one per question");
    auto* rerank = app.add_subcommand("rerank", "rescore first-stage candidates by target log-likelihood");
    auto* eval = app.add_subcommand("eval", "Top-K accuracy, nDCG, reader metrics and latency");
    auto* rag = app.add_subcommand("rag", "answer questions from the top reranked passages");
    auto* sweep = app.add_subcommand("sweep", "evaluate over one swept axis");
    auto* serve = app.add_subcommand("serve", "HTTP service: POST /rerank");
    auto* keys = app.add_subcommand("keys", "list configuration keys with their current values");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        auto overrides = take_overrides(args);
        std::reverse(args.begin(), args.end());
        app.parse(args);

        if (k1) overrides.emplace_back("scentrank.retriever.k1", std::to_string(*k1));
        if (b) overrides.emplace_back("scentrank.retriever.b", std::to_string(*b));
        if (topk) overrides.emplace_back("scentrank.candidate_count", std::to_string(*topk));
        auto config = load_config(config_file ? std::optional<std::filesystem::path>(*config_file) : std::nullopt, overrides);

        if (*keys) {
            for (const auto& key : config_keys()) std::cout << key << " = " << get_config_value(config, key) << '\n';
            return kExitOk;
        }

        const bool needs_scoring = (*rerank || *sweep || *serve) && config.rerank.mode != ScoringMode::retrieval_only;
        auto backends = make_backends(config, needs_scoring && config.scoring_backend == "remote");

        if (*serve) {
            config.validate();
            RerankService service(*backends.scoring, config.rank_template, config.rerank);
            std::cerr << "serving POST /rerank on " << config.serve_host << ':' << config.serve_port << '\n';
            service.listen(config.serve_host, config.serve_port);
            return kExitOk;
        }

        Pipeline pipeline(config, backends.view(), std::cout);
        if (*index) pipeline.cmd_index();
        if (*retrieve) pipeline.cmd_retrieve();
        if (*scent) pipeline.cmd_scent();
        if (*rerank) pipeline.cmd_rerank();
        if (*eval) pipeline.cmd_eval();
        if (*rag) pipeline.cmd_rag();
        if (*sweep) pipeline.cmd_sweep();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}
