// The only translation unit that includes cpp-httplib.
#ifdef ESD_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "esd/error.hpp"
#include "esd/provider.hpp"

namespace esd {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ProviderError("endpoint '" + url + "' has no scheme");
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw ProviderError("endpoint scheme '" + scheme + "' is not supported");
#ifndef ESD_HAVE_OPENSSL
    if (scheme == "https") throw ProviderError("built without TLS support; cannot reach " + url);
#endif
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string http_post_json(const HttpSettings& settings, const std::string& body) {
    const auto [origin, path] = split_url(settings.endpoint);
    httplib::Client client(origin);
    client.set_connection_timeout(settings.timeout);
    client.set_read_timeout(settings.timeout);
    client.set_write_timeout(settings.timeout);

    httplib::Headers headers;
    if (!settings.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings.api_key);

    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
        throw ProviderError("POST " + settings.endpoint + " failed: " +
                            httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw ProviderError("POST " + settings.endpoint + " returned HTTP " +
                            std::to_string(res->status));
    }
    return res->body;
}

}  // namespace esd
