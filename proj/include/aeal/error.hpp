#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aeal {

enum class Errc {
  InvalidArgument,
  CsvParse,
  MissingId,
  DuplicateId,
  EmptyIntersection,
  RankDeficientView,
  ColumnConflict,
  UnsupportedResponse,
  NotAGlm,
  SingularHessian,
  SolverFailure,
  DomainError,
  OneClassOnly,
  BadDimensions,
  BadEpsilon,
  BadFlipProb,
  RankDeficientAugmented,
  SingularCovarianceBlock,
  SingularVariance,
  DimensionMismatch,
  TransportFailure,
  ProtocolError,
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::CsvParse: return "CsvParse";
    case Errc::MissingId: return "MissingId";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyIntersection: return "EmptyIntersection";
    case Errc::RankDeficientView: return "RankDeficientView";
    case Errc::ColumnConflict: return "ColumnConflict";
    case Errc::UnsupportedResponse: return "UnsupportedResponse";
    case Errc::NotAGlm: return "NotAGlm";
    case Errc::SingularHessian: return "SingularHessian";
    case Errc::SolverFailure: return "SolverFailure";
    case Errc::DomainError: return "DomainError";
    case Errc::OneClassOnly: return "OneClassOnly";
    case Errc::BadDimensions: return "BadDimensions";
    case Errc::BadEpsilon: return "BadEpsilon";
    case Errc::BadFlipProb: return "BadFlipProb";
    case Errc::RankDeficientAugmented: return "RankDeficientAugmented";
    case Errc::SingularCovarianceBlock: return "SingularCovarianceBlock";
    case Errc::SingularVariance: return "SingularVariance";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TransportFailure: return "TransportFailure";
    case Errc::ProtocolError: return "ProtocolError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace aeal
