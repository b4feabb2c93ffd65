#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fracsmp {

enum class Errc {
  InvalidArgument,
  NotSymmetric,
  NotPositiveDefinite,
  UnsupportedOrder,
  LatticeTooLarge,
  IndexOutOfRange,
  LevelMismatch,
  DepthMismatch,
  NonFiniteValue,
  OutOfControlSet,
  TerminalConditionViolated,
  DerivativeMismatch,
  DualityMismatch,
  NoDescent,
  NotConverged,
  InvalidSpec,
  WrongHorizon,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::UnsupportedOrder: return "UnsupportedOrder";
    case Errc::LatticeTooLarge: return "LatticeTooLarge";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::LevelMismatch: return "LevelMismatch";
    case Errc::DepthMismatch: return "DepthMismatch";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::OutOfControlSet: return "OutOfControlSet";
    case Errc::TerminalConditionViolated: return "TerminalConditionViolated";
    case Errc::DerivativeMismatch: return "DerivativeMismatch";
    case Errc::DualityMismatch: return "DualityMismatch";
    case Errc::NoDescent: return "NoDescent";
    case Errc::NotConverged: return "NotConverged";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::WrongHorizon: return "WrongHorizon";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fracsmp
