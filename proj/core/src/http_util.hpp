#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace ssn::detail {

struct HttpResult {
    int status = 0;  // 0 when the request never produced a response
    std::string body;
    std::string error;
};

struct UrlParts {
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // "" or "/v1" style, no trailing slash
};

UrlParts split_url(const std::string& url);

using Headers = std::vector<std::pair<std::string, std::string>>;

HttpResult post_json(const std::string& base_url, const std::string& path, const std::string& body,
                     const Headers& headers, std::chrono::milliseconds timeout);

}  // namespace ssn::detail
