#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fewshot {

enum class Errc {
  UnknownWord,
  MalformedInstruction,
  OutputTooLong,
  PoolTooSmall,
  InvalidLexicon,
  NoTarget,
  EmptyInput,
  Separation,
  DegenerateDesign,
  InvalidConfig,
  UnknownToken,
  Divergence,
  CapacityExceeded,
  UnknownSession,
  OutOfOrder,
  BadRequest,
  Format,
  Io,
};

constexpr std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::UnknownWord: return "UnknownWord";
    case Errc::MalformedInstruction: return "MalformedInstruction";
    case Errc::OutputTooLong: return "OutputTooLong";
    case Errc::PoolTooSmall: return "PoolTooSmall";
    case Errc::InvalidLexicon: return "InvalidLexicon";
    case Errc::NoTarget: return "NoTarget";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::Separation: return "Separation";
    case Errc::DegenerateDesign: return "DegenerateDesign";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::Divergence: return "Divergence";
    case Errc::CapacityExceeded: return "CapacityExceeded";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::OutOfOrder: return "OutOfOrder";
    case Errc::BadRequest: return "BadRequest";
    case Errc::Format: return "Format";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fewshot
