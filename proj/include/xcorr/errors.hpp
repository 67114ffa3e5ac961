#pragma once

#include <stdexcept>
#include <string>

namespace xcorr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define XCORR_ERROR(Name)                     \
    struct Name : Error {                     \
        using Error::Error;                   \
    }

XCORR_ERROR(SingularPoint);
XCORR_ERROR(AlphaOutOfRange);
XCORR_ERROR(EmbeddingFailure);
XCORR_ERROR(InsufficientWindow);
XCORR_ERROR(WindowMismatch);
XCORR_ERROR(TauOffGrid);
XCORR_ERROR(SizeLimit);
XCORR_ERROR(MissingMoment);
XCORR_ERROR(TooFewReplicates);
XCORR_ERROR(ValidityRegion);
XCORR_ERROR(NonPSD);
XCORR_ERROR(ConfigError);

#undef XCORR_ERROR

}  // namespace xcorr
