#ifndef STAMP_TOOLS_CLI_UTIL_HPP_
#define STAMP_TOOLS_CLI_UTIL_HPP_

#include <cstdio>

#include "stamp/errors.hpp"

namespace stamp::cli {

// Exit codes shared by all binaries; tabulated in docs/cli.md.
enum ExitCode {
    kOk = 0,
    kUsageError = 2,       // bad flags or config file
    kConnectError = 3,     // control endpoint unreachable
    kRemoteError = 4,      // typed error reply from a node
    kValidationError = 5,  // rejected before leaving the client
    kIoError = 6,          // local file I/O
};

inline int fail(ExitCode code, const Error& err) {
    std::fprintf(stderr, "error: %s: %s\n", errc_name(err.code), err.message.c_str());
    return code;
}

inline int fail(ExitCode code, const char* message) {
    std::fprintf(stderr, "error: %s\n", message);
    return code;
}

// Remote typed errors and connection failures exit differently so scripts
// can tell them apart.
inline int fail_remote(const Error& err) {
    return fail(err.code == Errc::unreachable ? kConnectError : kRemoteError, err);
}

}  // namespace stamp::cli

#endif  // STAMP_TOOLS_CLI_UTIL_HPP_
