#pragma once

#include <stdexcept>
#include <string>

namespace dsketch {

/// Root of every error raised by the library. `kind()` is a stable, machine-readable
/// class name that the CLI prints and maps to an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

#define DSKETCH_DEFINE_ERROR(Name, Kind)                                  \
    class Name : public Error {                                           \
    public:                                                               \
        using Error::Error;                                               \
        const char* kind() const noexcept override { return Kind; }       \
    }

DSKETCH_DEFINE_ERROR(CorpusLoadError, "corpus-load");
DSKETCH_DEFINE_ERROR(ConfigError, "config");
DSKETCH_DEFINE_ERROR(DecodeError, "decode");
DSKETCH_DEFINE_ERROR(UnsupportedVersionError, "unsupported-version");
DSKETCH_DEFINE_ERROR(FormatError, "format");
DSKETCH_DEFINE_ERROR(WeightLoadError, "weight-load");
DSKETCH_DEFINE_ERROR(NotFoundError, "not-found");
DSKETCH_DEFINE_ERROR(StoreIoError, "store-io");
DSKETCH_DEFINE_ERROR(VerifyError, "verify");
DSKETCH_DEFINE_ERROR(GuardError, "guard");
DSKETCH_DEFINE_ERROR(MismatchError, "mismatch");

#undef DSKETCH_DEFINE_ERROR

}  // namespace dsketch
