#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "medusa/bytes.hpp"
#include "medusa/identity.hpp"
#include "medusa/state.hpp"

namespace medusa::tx {

// Chaincode function names are normative wire strings.
inline const char* kFnDataAppend = "DataAppend";
inline const char* kFnSelectWebLogData = "selectWebLogData";
// System (configuration) functions; routed outside the chaincode dispatch
// table so the chaincode surface stays append+query only.
inline const char* kFnRegisterDataSource = "RegisterDataSource";
inline const char* kFnConfigChannel = "ConfigChannel";

struct Proposal {
  std::string channel_id;
  std::string function;
  std::vector<std::string> args;
  std::string submitter;
  std::array<uint8_t, 8> nonce{};

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

// Canonical key order: channel_id, function, args, submitter, nonce.
Bytes encode_proposal(const Proposal& p);

struct SignedProposal {
  Proposal proposal;
  Sig64 client_signature{};

  friend bool operator==(const SignedProposal&, const SignedProposal&) = default;
};

// tx_id = SHA-256 over the canonical proposal bytes.
Digest32 compute_tx_id(const Proposal& p);

SignedProposal make_signed_proposal(const identity::KeyPair& client_key, Proposal p);

struct ReadEntry {
  std::string key;
  std::optional<state::Version> version;  // nullopt = key must be absent

  friend bool operator==(const ReadEntry&, const ReadEntry&) = default;
};

struct WriteEntry {
  std::string key;
  Bytes value;

  friend bool operator==(const WriteEntry&, const WriteEntry&) = default;
};

struct Endorsement {
  std::string endorser;
  Sig64 signature{};

  friend bool operator==(const Endorsement&, const Endorsement&) = default;
};

struct Envelope {
  Digest32 tx_id{};
  SignedProposal signed_proposal;
  std::vector<ReadEntry> read_set;
  std::vector<WriteEntry> write_set;
  std::vector<Endorsement> endorsements;

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

Bytes encode_read_set(const std::vector<ReadEntry>& rs);
Bytes encode_write_set(const std::vector<WriteEntry>& ws);

// All endorsements on an envelope sign exactly this message, binding the
// endorser to one specific read/write set for the transaction.
Bytes endorsement_message(const Digest32& tx_id, const std::vector<ReadEntry>& rs,
                          const std::vector<WriteEntry>& ws);

// Canonical key order: tx_id, proposal{channel_id, function, args, submitter,
// nonce}, client_signature, read_set, write_set, endorsements.
Bytes encode_envelope(const Envelope& e);
Envelope decode_envelope(std::string_view bytes);

}  // namespace medusa::tx
