#ifndef STAMP_ERRORS_HPP_
#define STAMP_ERRORS_HPP_

#include <string>
#include <utility>
#include <variant>

namespace stamp {

// Error codes shared by the codecs, the session engines and the control
// plane. Control replies carry these as strings, see errc_name().
enum class Errc {
    ok = 0,
    // codec
    too_short,
    ssid_zero,
    bad_error_estimate,
    empty_segment_list,
    too_many_segments,
    len_mismatch,
    bad_header,
    checksum_mismatch,
    // timebase
    era_overflow,
    // sessions
    duplicate_ssid,
    invalid_config,
    unknown_ssid,
    not_running,
    illegal_transition,
    // control plane
    not_initialized,
    already_initialized,
    unsupported,
    bad_request,
    unreachable,
    // transport
    unroutable,
    privilege_required,
    // analytics / loadgen / io
    empty_series,
    non_monotone,
    io_error,
    parse_error,
};

const char* errc_name(Errc c);

struct Error {
    Errc code = Errc::ok;
    std::string message;
};

inline Error make_error(Errc code, std::string message = {}) {
    return Error{code, std::move(message)};
}

// Minimal value-or-error carrier. std::expected is C++23; this covers the
// subset we need without pulling in a third dependency.
template <typename T>
class Result {
public:
    Result(T value) : v_(std::move(value)) {}
    Result(Error err) : v_(std::move(err)) {}
    Result(Errc code, std::string message = {}) : v_(Error{code, std::move(message)}) {}

    bool ok() const { return std::holds_alternative<T>(v_); }
    explicit operator bool() const { return ok(); }

    T& value() { return std::get<T>(v_); }
    const T& value() const { return std::get<T>(v_); }
    const Error& error() const { return std::get<Error>(v_); }

    T value_or(T fallback) const { return ok() ? value() : std::move(fallback); }

private:
    std::variant<T, Error> v_;
};

// Result<void> equivalent.
class Status {
public:
    Status() = default;
    Status(Error err) : err_(std::move(err)) {}
    Status(Errc code, std::string message = {}) : err_(Error{code, std::move(message)}) {}

    bool ok() const { return err_.code == Errc::ok; }
    explicit operator bool() const { return ok(); }
    const Error& error() const { return err_; }

private:
    Error err_;
};

}  // namespace stamp

#endif  // STAMP_ERRORS_HPP_
