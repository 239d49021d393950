#pragma once

#include <stdexcept>
#include <string>

namespace dkflab {

/// Failure categories surfaced by the library. The CLI maps ConfigError to
/// exit code 2 and everything else to exit code 3.
enum class Errc {
  DuplicateEdge,
  SelfLoop,
  NonPositiveWeight,
  Disconnected,
  InvalidBound,
  TooManyEdges,
  NotSymmetric,
  BadLength,
  NotObservable,
  NoConvergence,
  NotPositiveDefinite,
  SingularH,
  ObservabilityUnreachable,
  GainOutOfRange,
  ConfigError,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::NonPositiveWeight: return "NonPositiveWeight";
    case Errc::Disconnected: return "Disconnected";
    case Errc::InvalidBound: return "InvalidBound";
    case Errc::TooManyEdges: return "TooManyEdges";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::BadLength: return "BadLength";
    case Errc::NotObservable: return "NotObservable";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::SingularH: return "SingularH";
    case Errc::ObservabilityUnreachable: return "ObservabilityUnreachable";
    case Errc::GainOutOfRange: return "GainOutOfRange";
    case Errc::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace dkflab
