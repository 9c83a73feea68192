#include "http.hpp"

#include <httplib.h>

#include "dex/errors.hpp"

namespace dex::detail {

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers, int attempts,
                         std::chrono::milliseconds timeout) {
    const auto [base, path] = split_url(url);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    const auto payload = body.dump();
    std::string last_error = "no attempt made";
    const int max_attempts = std::max(attempts, 1);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        httplib::Client client(base);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        auto res = client.Post(path, hdrs, payload, "application/json");
        if (!res) {
            last_error = "POST " + url + ": " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "POST " + url + ": HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw ProtocolError("POST " + url + ": HTTP " + std::to_string(res->status));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError("POST " + url + ": malformed JSON response: " + e.what());
        }
    }
    throw TransportError(last_error, max_attempts);
}

} // namespace dex::detail
