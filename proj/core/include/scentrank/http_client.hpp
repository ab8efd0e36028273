#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "scentrank/error.hpp"

namespace scentrank {

struct EndpointConfig {
    /// e.g. "http://localhost:8000" or "https://api.openai.com"; "/v1/..." is appended.
    std::string base_url;
    /// Sent as "Authorization: Bearer <key>" when non-empty.
    std::string api_key;
    std::chrono::milliseconds timeout{60000};
};

/// Reads SCENTRANK_API_KEY, empty when unset.
std::string api_key_from_environment();

/// POSTs a JSON body and parses the JSON reply. Connection failures, timeouts,
/// 429 and 5xx raise TransportError; other non-2xx replies raise BackendError.
nlohmann::json post_json(const EndpointConfig& endpoint, const std::string& path, const nlohmann::json& body);

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

/// Calls fn() until it returns without TransportError, sleeping
/// initial_backoff * multiplier^i between attempts. The last error propagates.
template <class Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    auto delay = std::chrono::duration<double, std::milli>(policy.initial_backoff);
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const TransportError&) {
            if (attempt >= policy.attempts) throw;
        }
        std::this_thread::sleep_for(delay);
        delay *= policy.multiplier;
    }
}

}  // namespace scentrank
