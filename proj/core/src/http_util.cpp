#include "http_util.hpp"

#include "ssn/errors.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace ssn::detail {

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("URL '" + url + "' has no scheme");
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("URL '" + url + "' must be http or https");
    const auto path_start = url.find('/', scheme_end + 3);
    UrlParts parts;
    if (path_start == std::string::npos) {
        parts.origin = url;
    } else {
        parts.origin = url.substr(0, path_start);
        parts.path_prefix = url.substr(path_start);
        while (!parts.path_prefix.empty() && parts.path_prefix.back() == '/') parts.path_prefix.pop_back();
    }
    if (parts.origin.size() <= scheme_end + 3) throw ConfigError("URL '" + url + "' has no host");
    return parts;
}

HttpResult post_json(const std::string& base_url, const std::string& path, const std::string& body,
                     const Headers& headers, std::chrono::milliseconds timeout) {
    const auto parts = split_url(base_url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);

    HttpResult out;
    auto res = client.Post(parts.path_prefix + path, hdrs, body, "application/json");
    if (!res) {
        out.error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

}  // namespace ssn::detail
