#pragma once

#include <stdexcept>
#include <string>

namespace pgn {

enum class ErrorCode {
  ShapeMismatch,
  NotScalar,
  NotDivisible,
  TooManyPrompts,
  NoAttention,
  LayerOutOfRange,
  BadCheckpoint,
  RankDeficient,
  UnknownKind,
  MissingGrad,
  OutOfRange,
  EmptyLoader,
  IndexOutOfRange,
  BadLength,
  BadLabel,
  TooFewPoints,
  LengthMismatch,
  NoPrompts,
  BadToken,
  BindFailure,
  ConnectionError,
  ServerStatus,
  Truncated,
  BadMagic,
  BadVersion,
  BadFrame,
  BadConfig,
  Internal,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::NotDivisible: return "NotDivisible";
    case ErrorCode::TooManyPrompts: return "TooManyPrompts";
    case ErrorCode::NoAttention: return "NoAttention";
    case ErrorCode::LayerOutOfRange: return "LayerOutOfRange";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::MissingGrad: return "MissingGrad";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyLoader: return "EmptyLoader";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::BadLength: return "BadLength";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoPrompts: return "NoPrompts";
    case ErrorCode::BadToken: return "BadToken";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::ConnectionError: return "ConnectionError";
    case ErrorCode::ServerStatus: return "ServerStatus";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::BadFrame: return "BadFrame";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace pgn
