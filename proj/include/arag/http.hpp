#pragma once

#include <string>
#include <string_view>

namespace arag {

struct ParsedUrl {
    std::string host_port; // "http://host:port"
    std::string path;      // "/v1/chat/completions"
};

ParsedUrl parse_url(std::string_view url); // throws ConfigError on bad URLs

// Single POST of a JSON body, no retries. Returns the response body on 2xx;
// throws Timeout on transport failure, HttpStatus otherwise. The bearer token
// goes into the Authorization header only and is never echoed in errors.
std::string http_post_json(const std::string& url, const std::string& body,
                           const std::string& bearer, int timeout_ms);

} // namespace arag
