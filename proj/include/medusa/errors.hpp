#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medusa {

enum class ErrorCode {
  None = 0,
  // ledger
  ChainLinkMismatch,
  NonSequentialNumber,
  DataHashMismatch,
  ChainNotVerified,
  NotFound,
  DecodeError,
  // identity
  DuplicateParticipant,
  InvalidPort,
  InvalidAddress,
  UnknownSigner,
  AuthFailed,
  // chaincode
  DuplicateAsset,
  UnregisteredSubmitter,
  InvalidAsset,
  InvalidRange,
  UnknownFunction,
  // txflow
  PolicyUnsatisfied,
  ChaincodeError,
  BadClientSignature,
  NotChannelMember,
  // netsim
  InvalidConfig,
  TamperDetected,
  // ingest / io
  ParseError,
  FileUnreadable,
  SubmissionFailure,
  ChannelExists,
  InvalidPolicy,
  LockBusy,
  IoError,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace medusa
