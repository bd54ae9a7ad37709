#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace annolab {

enum class ErrorKind {
    MissingFile,
    InvalidManifest,
    DimensionMismatch,
    DuplicateSampleId,
    UnknownClassInGroundTruth,
    UnknownSample,
    DegenerateInput,
    CalibrationFailure,
    ShapeMismatch,
    NonFiniteCoordinate,
    DuplicateName,
    NotFound,
    LengthMismatch,
    BudgetExceedsPopulation,
    UnknownClass,
    OutOfOrderLabel,
    SessionComplete,
    InvalidAction,
    EmptyQueue,
    CorruptSnapshot,
    UnmappedClass,
    EmptyLabelSet,
    SchemeMismatch,
    TooFewHistograms,
    EmptyInput,
    NoRareClass,
    IncompleteRankTable,
    EmptyTrainingSet,
    EmptyTestSet,
    CheckpointExceedsLabels,
    MissingGroundTruth,
    InvalidArgument,
    Cancelled,
    BindFailure,
    IngestFailure,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::InvalidManifest: return "InvalidManifest";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorKind::UnknownClassInGroundTruth: return "UnknownClassInGroundTruth";
    case ErrorKind::UnknownSample: return "UnknownSample";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::CalibrationFailure: return "CalibrationFailure";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::BudgetExceedsPopulation: return "BudgetExceedsPopulation";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::OutOfOrderLabel: return "OutOfOrderLabel";
    case ErrorKind::SessionComplete: return "SessionComplete";
    case ErrorKind::InvalidAction: return "InvalidAction";
    case ErrorKind::EmptyQueue: return "EmptyQueue";
    case ErrorKind::CorruptSnapshot: return "CorruptSnapshot";
    case ErrorKind::UnmappedClass: return "UnmappedClass";
    case ErrorKind::EmptyLabelSet: return "EmptyLabelSet";
    case ErrorKind::SchemeMismatch: return "SchemeMismatch";
    case ErrorKind::TooFewHistograms: return "TooFewHistograms";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoRareClass: return "NoRareClass";
    case ErrorKind::IncompleteRankTable: return "IncompleteRankTable";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::EmptyTestSet: return "EmptyTestSet";
    case ErrorKind::CheckpointExceedsLabels: return "CheckpointExceedsLabels";
    case ErrorKind::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Cancelled: return "Cancelled";
    case ErrorKind::BindFailure: return "BindFailure";
    case ErrorKind::IngestFailure: return "IngestFailure";
    }
    return "Unknown";
}

// All library failures are reported through this one exception type; the
// kind is what callers (CLI exit codes, HTTP status mapping) switch on.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace annolab
