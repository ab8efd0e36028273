#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "scentrank/reranker.hpp"
#include "scentrank/scoring.hpp"

namespace scentrank {

/// Body of POST /rerank:
///   {"question": str, "scent"?: str, "query_id"?: str, "mode"?: str,
///    "lambda"?: num, "candidates": [{"id", "title"?, "text", "score"?}]}
/// Reply: {"query_id", "selected", "mode", "partial", "candidates": [{"id",
/// "retrieval_rank", "retrieval_score", "mean_loglik", "token_count", "score",
/// "failed"}]} in reranked order. Throws ValidationError on a bad body.
nlohmann::json handle_rerank_request(const nlohmann::json& body, ScoringBackend& backend,
                                     const RankTemplate& rank_template, const RerankOptions& defaults);

class RerankService {
  public:
    RerankService(ScoringBackend& backend, RankTemplate rank_template, RerankOptions defaults);
    ~RerankService();
    RerankService(const RerankService&) = delete;
    RerankService& operator=(const RerankService&) = delete;

    /// Binds and serves until stop().
    void listen(const std::string& host, int port);
    /// Binds and returns the bound port (port 0 picks a free one); serve with listen_after_bind().
    int bind(const std::string& host, int port);
    void listen_after_bind();
    void stop();
    bool running() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace scentrank
