#pragma once

#include <stdexcept>
#include <string>

namespace faceaudit {

/// Broad failure class; the CLI maps these onto exit codes.
enum class ErrorKind {
    input,      // bad files, bad config, misaligned data
    numerical,  // degenerate statistics, singular systems
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define FACEAUDIT_DEFINE_ERROR(NAME, KIND)                                 \
    class NAME : public Error {                                            \
    public:                                                                \
        explicit NAME(const std::string& what) : Error(ErrorKind::KIND, what) {} \
    }

FACEAUDIT_DEFINE_ERROR(FormatError, input);
FACEAUDIT_DEFINE_ERROR(ValidationError, input);
FACEAUDIT_DEFINE_ERROR(IoError, input);
FACEAUDIT_DEFINE_ERROR(AlignmentError, input);
FACEAUDIT_DEFINE_ERROR(DimensionError, input);
FACEAUDIT_DEFINE_ERROR(MissingPromptError, input);
FACEAUDIT_DEFINE_ERROR(InsufficientDataError, input);

FACEAUDIT_DEFINE_ERROR(DegenerateVectorError, numerical);
FACEAUDIT_DEFINE_ERROR(UndefinedCorrelationError, numerical);
FACEAUDIT_DEFINE_ERROR(DegenerateVarianceError, numerical);
FACEAUDIT_DEFINE_ERROR(DegenerateTargetError, numerical);
FACEAUDIT_DEFINE_ERROR(SingularDesignError, numerical);
FACEAUDIT_DEFINE_ERROR(NormalizationError, numerical);
FACEAUDIT_DEFINE_ERROR(DomainError, numerical);

#undef FACEAUDIT_DEFINE_ERROR

} // namespace faceaudit
