#pragma once

#include <stdexcept>
#include <string>

namespace arag {

// Error categories. The CLI maps these onto exit codes: usage/config -> 1,
// data -> 2, backend -> 3.
enum class Errc {
    // data / input
    EmptyInput,
    EmptyLabels,
    EmptyCorpus,
    EmptyQuery,
    EmptyTerminology,
    DegenerateCorpus,
    IndexOutOfRange,
    TooFewUnits,
    SegmentationFailure,
    DataError,
    IoFailure,
    SchemaMismatch,
    // config / usage
    ConfigError,
    MissingBinding,
    // backend
    Timeout,
    HttpStatus,
    NoMatchingRule,
    MalformedProviderPayload,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
    Error(Errc code, std::string msg, int http_status)
        : std::runtime_error(std::move(msg)), code_(code), http_status_(http_status) {}

    Errc code() const noexcept { return code_; }
    int http_status() const noexcept { return http_status_; }

private:
    Errc code_;
    int http_status_ = 0;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) { throw Error(code, msg); }

} // namespace arag
