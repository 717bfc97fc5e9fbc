#include "srvfgan/error.hpp"

namespace srvfgan {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DegenerateCurve: return "DegenerateCurve";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::AntipodalPoint: return "AntipodalPoint";
    case Errc::EmptySet: return "EmptySet";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::ParseError: return "ParseError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::TooShort: return "TooShort";
    case Errc::MissingClass: return "MissingClass";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::NotInGraph: return "NotInGraph";
    case Errc::DomainError: return "DomainError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::SingleClass: return "SingleClass";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(Errc code) noexcept {
  return code == Errc::NonFiniteLoss || code == Errc::NoConvergence;
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

}  // namespace srvfgan
