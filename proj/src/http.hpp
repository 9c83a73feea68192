#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace dex::detail {

/// POSTs a JSON body and parses a JSON response. Retries transport failures and 5xx
/// responses up to `attempts` times; throws TransportError or ProtocolError.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers, int attempts,
                         std::chrono::milliseconds timeout);

} // namespace dex::detail
