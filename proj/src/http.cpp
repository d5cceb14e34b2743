#include "arag/http.hpp"

#include "arag/errors.hpp"

#include <httplib.h>

namespace arag {

ParsedUrl parse_url(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos)
        raise(Errc::ConfigError, "endpoint URL must include a scheme: " + std::string(url));
    std::string_view scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        raise(Errc::ConfigError, "unsupported URL scheme \"" + std::string(scheme) + "\"");
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string_view::npos) {
        out.host_port = std::string(url);
        out.path = "/";
    } else {
        out.host_port = std::string(url.substr(0, path_start));
        out.path = std::string(url.substr(path_start));
    }
    return out;
}

std::string http_post_json(const std::string& url, const std::string& body,
                           const std::string& bearer, int timeout_ms) {
    ParsedUrl parsed = parse_url(url);
    httplib::Client client(parsed.host_port);
    client.set_connection_timeout(0, timeout_ms * 1000);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);

    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

    auto res = client.Post(parsed.path, headers, body, "application/json");
    if (!res)
        raise(Errc::Timeout, "request to " + parsed.host_port + " failed: " +
                                 httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw Error(Errc::HttpStatus,
                    "HTTP " + std::to_string(res->status) + " from " + parsed.host_port, res->status);
    return res->body;
}

} // namespace arag
