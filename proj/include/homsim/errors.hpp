#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace homsim {

/// Base class of all typed errors. `name()` is the stable identifier the
/// CLI prints on its diagnostic stream; `what()` carries the detail text.
class Error : public std::runtime_error {
public:
  Error(std::string name, const std::string& message)
      : std::runtime_error(message), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

private:
  std::string name_;
};

#define HOMSIM_DEFINE_ERROR(TYPE)                                      \
  class TYPE : public Error {                                          \
  public:                                                              \
    explicit TYPE(const std::string& message) : Error(#TYPE, message) {} \
  }

// Domain-type construction failures.
HOMSIM_DEFINE_ERROR(InvalidSourcePair);
HOMSIM_DEFINE_ERROR(InvalidPhaseSample);
HOMSIM_DEFINE_ERROR(InvalidBeamSplitter);
HOMSIM_DEFINE_ERROR(InvalidDetectorPair);
HOMSIM_DEFINE_ERROR(InvalidPolarizationState);
HOMSIM_DEFINE_ERROR(InvalidAfterpulseParams);
HOMSIM_DEFINE_ERROR(InvalidGatingConfig);
HOMSIM_DEFINE_ERROR(InvalidHistogram);
HOMSIM_DEFINE_ERROR(InvalidSimConfig);

// Operation-level failures.
HOMSIM_DEFINE_ERROR(InvalidArgument);
HOMSIM_DEFINE_ERROR(DegenerateDenominator);
HOMSIM_DEFINE_ERROR(InvalidVpi);
HOMSIM_DEFINE_ERROR(InconsistentProbabilities);
HOMSIM_DEFINE_ERROR(RateTooHigh);
HOMSIM_DEFINE_ERROR(FitDiverged);
HOMSIM_DEFINE_ERROR(InsufficientData);
HOMSIM_DEFINE_ERROR(NoGates);
HOMSIM_DEFINE_ERROR(ConfigError);

#undef HOMSIM_DEFINE_ERROR

/// Malformed time-tag input; keeps the byte offset of the offending line.
class ParseError : public Error {
public:
  ParseError(std::size_t offset, const std::string& reason)
      : Error("ParseError",
              "byte offset " + std::to_string(offset) + ": " + reason),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

} // namespace homsim
