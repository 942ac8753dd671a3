#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace caudalung {

// CLI exit-code categories: config errors exit 2, stage/internal failures
// exit 3, data errors exit 4.
enum class ErrorCategory : int { config = 2, stage = 3, data = 4 };

class Error : public std::runtime_error {
public:
    Error(std::string msg, ErrorCategory cat)
        : std::runtime_error(std::move(msg)), cat_(cat) {}
    [[nodiscard]] ErrorCategory category() const noexcept { return cat_; }

private:
    ErrorCategory cat_;
};

#define CAUDALUNG_ERROR(NAME, CATEGORY)                                   \
    class NAME : public ::caudalung::Error {                              \
    public:                                                               \
        explicit NAME(const std::string& msg)                             \
            : Error(std::string(#NAME) + ": " + msg,                      \
                    ::caudalung::ErrorCategory::CATEGORY) {}              \
    }

// Configuration / argument validation
CAUDALUNG_ERROR(ConfigInvalid, config);
CAUDALUNG_ERROR(InvalidArgument, config);
CAUDALUNG_ERROR(BadTarget, config);
CAUDALUNG_ERROR(BadPartition, config);

// Data-shaped problems (bad inputs, empty sets, broken files)
CAUDALUNG_ERROR(EmptyBody, data);
CAUDALUNG_ERROR(MaskClipped, data);
CAUDALUNG_ERROR(EmptyMask, data);
CAUDALUNG_ERROR(InsufficientStratum, data);
CAUDALUNG_ERROR(InfeasibleDamage, data);
CAUDALUNG_ERROR(ShapeMismatch, data);
CAUDALUNG_ERROR(EmptySet, data);
CAUDALUNG_ERROR(RowOutOfRange, data);
CAUDALUNG_ERROR(BadResolution, data);
CAUDALUNG_ERROR(DataEmpty, data);
CAUDALUNG_ERROR(EmptyManifest, data);
CAUDALUNG_ERROR(IoError, data);

// Runtime / pipeline failures
CAUDALUNG_ERROR(NonFiniteLoss, stage);
CAUDALUNG_ERROR(IncompleteLatents, stage);
CAUDALUNG_ERROR(StageFailed, stage);
CAUDALUNG_ERROR(Internal, stage);

#undef CAUDALUNG_ERROR

} // namespace caudalung
