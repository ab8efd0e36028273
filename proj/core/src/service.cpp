#include <httplib.h>

#include "scentrank/service.hpp"

#include <atomic>

#include "scentrank/error.hpp"

namespace scentrank {

nlohmann::json handle_rerank_request(const nlohmann::json& body, ScoringBackend& backend,
                                     const RankTemplate& rank_template, const RerankOptions& defaults) {
    if (!body.is_object()) throw ValidationError("request body must be a json object");
    RerankOptions options = defaults;
    std::string question;
    std::string query_id = "q";
    std::vector<Passage> passages;
    std::vector<double> scores;
    std::optional<AnswerScent> scent;
    try {
        question = body.at("question").get<std::string>();
        if (body.contains("query_id")) query_id = body["query_id"].get<std::string>();
        if (body.contains("mode")) options.mode = parse_scoring_mode(body["mode"].get<std::string>());
        if (body.contains("lambda")) options.lambda = body["lambda"].get<double>();
        if (body.contains("scent") && !body["scent"].is_null()) {
            auto text = body["scent"].get<std::string>();
            if (text.empty()) throw ValidationError("scent must be non-empty when given");
            scent = AnswerScent{query_id, std::move(text), "request", "", "request"};
        }
        const auto& list = body.at("candidates");
        if (!list.is_array() || list.empty()) throw ValidationError("candidates must be a non-empty array");
        for (const auto& c : list) {
            Passage p;
            p.id = c.at("id").get<std::string>();
            p.title = c.value("title", std::string());
            p.body = c.at("text").get<std::string>();
            passages.push_back(std::move(p));
            scores.push_back(c.value("score", 0.0));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad rerank request: ") + e.what());
    }
    Corpus corpus(passages);
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        candidates.push_back({&corpus.at(passages[i].id), static_cast<int>(i + 1), scores[i]});
    }
    auto result = rerank(backend, query_id, question, scent ? &*scent : nullptr, candidates, rank_template, options);

    nlohmann::json reply = {{"query_id", result.query_id},
                            {"selected", result.selected},
                            {"mode", to_string(result.mode)},
                            {"partial", result.partial},
                            {"candidates", nlohmann::json::array()}};
    for (const auto& c : result.candidates) {
        nlohmann::json item = {{"id", c.passage_id},
                               {"retrieval_rank", c.retrieval_rank},
                               {"retrieval_score", c.retrieval_score},
                               {"mean_loglik", c.mean_loglik},
                               {"token_count", c.token_count},
                               {"score", c.failed ? nlohmann::json(nullptr) : nlohmann::json(c.combined_score)},
                               {"failed", c.failed}};
        if (!c.diagnostic.empty()) item["diagnostic"] = c.diagnostic;
        reply["candidates"].push_back(std::move(item));
    }
    return reply;
}

struct RerankService::Impl {
    Impl(ScoringBackend& b, RankTemplate t, RerankOptions d) : backend(b), rank_template(std::move(t)), defaults(d) {}

    ScoringBackend& backend;
    RankTemplate rank_template;
    RerankOptions defaults;
    httplib::Server server;
};

RerankService::RerankService(ScoringBackend& backend, RankTemplate rank_template, RerankOptions defaults)
    : impl_(std::make_unique<Impl>(backend, std::move(rank_template), defaults)) {
    impl_->rank_template.validate();
    impl_->server.Post("/rerank", [this](const httplib::Request& req, httplib::Response& res) {
        auto error = [&](int status, const std::string& message) {
            res.status = status;
            res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
        };
        try {
            auto body = nlohmann::json::parse(req.body);
            auto reply = handle_rerank_request(body, impl_->backend, impl_->rank_template, impl_->defaults);
            res.set_content(reply.dump(), "application/json");
        } catch (const nlohmann::json::parse_error& e) {
            error(400, std::string("invalid json: ") + e.what());
        } catch (const ValidationError& e) {
            error(400, e.what());
        } catch (const BackendError& e) {
            error(502, e.what());
        } catch (const std::exception& e) {
            error(500, e.what());
        }
    });
}

RerankService::~RerankService() { stop(); }

void RerankService::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw ValidationError("cannot listen on " + host + ":" + std::to_string(port));
}

int RerankService::bind(const std::string& host, int port) {
    int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw ValidationError("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void RerankService::listen_after_bind() { impl_->server.listen_after_bind(); }

void RerankService::stop() {
    if (impl_) impl_->server.stop();
}

bool RerankService::running() const { return impl_->server.is_running(); }

}  // namespace scentrank
