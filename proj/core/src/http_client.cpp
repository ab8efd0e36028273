#include "scentrank/http_client.hpp"

#include <httplib.h>

#include <cstdlib>

namespace scentrank {
namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
    if (url.empty()) throw ValidationError("endpoint URL is not configured");
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint URL lacks a scheme: " + url);
    auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ValidationError("unsupported URL scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    out.scheme_host_port = url.substr(0, path_start);
    if (path_start != std::string::npos) {
        out.path_prefix = url.substr(path_start);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    }
    return out;
}

}  // namespace

std::string api_key_from_environment() {
    const char* key = std::getenv("SCENTRANK_API_KEY");
    return key ? std::string(key) : std::string();
}

nlohmann::json post_json(const EndpointConfig& endpoint, const std::string& path, const nlohmann::json& body) {
    auto url = parse_base_url(endpoint.base_url);
    httplib::Client client(url.scheme_host_port);
    auto seconds = endpoint.timeout.count() / 1000;
    auto micros = (endpoint.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    auto full_path = url.path_prefix + path;
    auto res = client.Post(full_path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("POST " + endpoint.base_url + path + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("POST " + full_path + " returned HTTP " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("POST " + full_path + " returned HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 500));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw BackendError("POST " + full_path + " returned invalid json: " + e.what());
    }
}

}  // namespace scentrank
