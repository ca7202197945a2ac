#pragma once

#include <map>
#include <string>

#include <httplib.h>

#include "gapcast/common.hpp"
#include "gapcast/dataset.hpp"

namespace gapcast {

/// Generic parameterized GET. Network access is opt-in; tests run against
/// local fixture servers.
struct FetchConfig {
    bool network_enabled = false;
    int timeout_seconds = 30;
};

namespace fetch {

/// Downloads one report and writes the body verbatim to `out`; the caller
/// feeds the file to load_csv. The endpoint is split as scheme://host[:port]
/// and the remainder becomes the request path.
inline std::string fetch_http_report(const std::string& endpoint,
                                     const std::map<std::string, std::string>& query,
                                     const std::string& out, const FetchConfig& config) {
    if (!config.network_enabled)
        fail("NetworkDisabled", "network access is off; enable it in the fetcher config");

    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) fail("BadConfig", "endpoint needs a scheme: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? endpoint : endpoint.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);

    if (!query.empty()) {
        path += '?';
        bool first = true;
        for (const auto& [key, value] : query) {
            if (!first) path += '&';
            first = false;
            path += httplib::detail::encode_query_param(key) + "=" +
                    httplib::detail::encode_query_param(value);
        }
    }

    httplib::Client client(origin);
    client.set_connection_timeout(config.timeout_seconds, 0);
    client.set_read_timeout(config.timeout_seconds, 0);

    const httplib::Result res = client.Get(path);
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
            fail("Timeout", "no response from " + origin + " within " +
                                std::to_string(config.timeout_seconds) + "s");
        fail("Timeout", "request to " + origin + " failed: " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300)
        fail("HttpStatus", "HTTP " + std::to_string(res->status) + " from " + origin + path);

    write_file(out, res->body);
    return out;
}

}  // namespace fetch
}  // namespace gapcast
