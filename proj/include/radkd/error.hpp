#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace radkd {

enum class ErrorKind {
    Config,
    ShapeMismatch,
    NonFinite,
    UnusableDataset,
    BelowCriticalSpeed,
    Io,
    BadMagic,
    VersionMismatch,
    Truncated,
    CrcMismatch,
    Corrupt,
    CountMismatch,
    ModelKindMismatch,
    Undefined,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::ShapeMismatch: return "shape_mismatch";
    case ErrorKind::NonFinite: return "non_finite";
    case ErrorKind::UnusableDataset: return "unusable_dataset";
    case ErrorKind::BelowCriticalSpeed: return "below_critical_speed";
    case ErrorKind::Io: return "io";
    case ErrorKind::BadMagic: return "bad_magic";
    case ErrorKind::VersionMismatch: return "version_mismatch";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::CrcMismatch: return "crc_mismatch";
    case ErrorKind::Corrupt: return "corrupt";
    case ErrorKind::CountMismatch: return "count_mismatch";
    case ErrorKind::ModelKindMismatch: return "model_kind_mismatch";
    case ErrorKind::Undefined: return "undefined";
    }
    return "unknown";
}

/// Process exit code for the CLI: 2 usage/config, 3 data, 4 numeric.
constexpr int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::ShapeMismatch:
        return 2;
    case ErrorKind::NonFinite:
        return 4;
    default:
        return 3;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

} // namespace radkd
