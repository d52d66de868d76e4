#pragma once

#include <stdexcept>
#include <string>

namespace scgnet {

/// Failure categories raised across the toolkit. The CLI maps each one onto
/// an exit code via exit_code_for().
enum class Errc {
  // data errors (exit 2)
  FieldCountMismatch,
  NumericParseError,
  UnknownSubclass,
  EmptyTrainingSet,
  TooFewSamples,
  DegenerateClass,
  NegativeFeature,
  LengthMismatch,
  LabelOutOfRange,
  EmptyMatrix,
  BadMagic,
  VersionMismatch,
  ChecksumMismatch,
  TruncatedFile,
  MissingFile,
  IoError,
  // configuration errors (exit 1)
  UnknownKey,
  TypeError,
  // runtime / numeric errors (exit 3)
  ShapeMismatch,
  ShapeUnderflow,
  UnpopulatedRunningStats,
  NonDeterministicLayer,
  NonFiniteLoss,
  ExhaustedRetries,
  AllTrialsFailed,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::FieldCountMismatch: return "FieldCountMismatch";
    case Errc::NumericParseError: return "NumericParseError";
    case Errc::UnknownSubclass: return "UnknownSubclass";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::DegenerateClass: return "DegenerateClass";
    case Errc::NegativeFeature: return "NegativeFeature";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::MissingFile: return "MissingFile";
    case Errc::IoError: return "IoError";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::TypeError: return "TypeError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ShapeUnderflow: return "ShapeUnderflow";
    case Errc::UnpopulatedRunningStats: return "UnpopulatedRunningStats";
    case Errc::NonDeterministicLayer: return "NonDeterministicLayer";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::ExhaustedRetries: return "ExhaustedRetries";
    case Errc::AllTrialsFailed: return "AllTrialsFailed";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// 1 usage/config error, 2 data error, 3 runtime or numeric error.
inline int exit_code_for(Errc c) {
  switch (c) {
    case Errc::UnknownKey:
    case Errc::TypeError:
      return 1;
    case Errc::ShapeMismatch:
    case Errc::ShapeUnderflow:
    case Errc::UnpopulatedRunningStats:
    case Errc::NonDeterministicLayer:
    case Errc::NonFiniteLoss:
    case Errc::ExhaustedRetries:
    case Errc::AllTrialsFailed:
      return 3;
    default:
      return 2;
  }
}

}  // namespace scgnet
