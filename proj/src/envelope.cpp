#include "medusa/envelope.hpp"

#include <sodium.h>

#include "medusa/canonical.hpp"
#include "medusa/sha256.hpp"

namespace medusa::tx {

static cjson proposal_to_json(const Proposal& p) {
  cjson o = cjson::object();
  o["channel_id"] = p.channel_id;
  o["function"] = p.function;
  cjson args = cjson::array();
  for (const auto& a : p.args) args.push_back(a);
  o["args"] = std::move(args);
  o["submitter"] = p.submitter;
  o["nonce"] = to_hex(p.nonce);
  return o;
}

Bytes encode_proposal(const Proposal& p) { return dump_canonical(proposal_to_json(p)); }

static Proposal proposal_from_json(const cjson& o) {
  check_exact_keys(o, {"channel_id", "function", "args", "submitter", "nonce"});
  Proposal p;
  p.channel_id = need_string(o, "channel_id");
  p.function = need_string(o, "function");
  for (const cjson& a : need_array(o, "args")) {
    if (!a.is_string()) raise(ErrorCode::DecodeError, "proposal args must be strings");
    p.args.push_back(a.get<std::string>());
  }
  p.submitter = need_string(o, "submitter");
  p.nonce = array_from_hex<8>(need_string(o, "nonce"));
  return p;
}

Digest32 compute_tx_id(const Proposal& p) { return sha256(encode_proposal(p)); }

SignedProposal make_signed_proposal(const identity::KeyPair& client_key, Proposal p) {
  SignedProposal sp;
  sp.client_signature = identity::sign_detached(client_key, encode_proposal(p));
  sp.proposal = std::move(p);
  return sp;
}

static cjson read_set_to_json(const std::vector<ReadEntry>& rs) {
  cjson arr = cjson::array();
  for (const auto& r : rs) {
    cjson o = cjson::object();
    o["key"] = r.key;
    if (r.version)
      o["version"] = cjson::array({r.version->block, r.version->tx});
    else
      o["version"] = "absent";
    arr.push_back(std::move(o));
  }
  return arr;
}

static cjson write_set_to_json(const std::vector<WriteEntry>& ws) {
  cjson arr = cjson::array();
  for (const auto& w : ws) {
    cjson o = cjson::object();
    o["key"] = w.key;
    o["value"] = to_hex(w.value);
    arr.push_back(std::move(o));
  }
  return arr;
}

Bytes encode_read_set(const std::vector<ReadEntry>& rs) { return dump_canonical(read_set_to_json(rs)); }
Bytes encode_write_set(const std::vector<WriteEntry>& ws) { return dump_canonical(write_set_to_json(ws)); }

static std::vector<ReadEntry> read_set_from_json(const cjson& arr) {
  std::vector<ReadEntry> out;
  for (const cjson& o : arr) {
    check_exact_keys(o, {"key", "version"});
    ReadEntry r;
    r.key = need_string(o, "key");
    const cjson& v = need(o, "version");
    if (v.is_string()) {
      if (v.get<std::string>() != "absent") raise(ErrorCode::DecodeError, "bad read version");
      r.version = std::nullopt;
    } else if (v.is_array() && v.size() == 2 && v[0].is_number_unsigned() &&
               v[1].is_number_unsigned()) {
      r.version = state::Version{v[0].get<uint64_t>(), v[1].get<uint32_t>()};
    } else {
      raise(ErrorCode::DecodeError, "bad read version");
    }
    out.push_back(std::move(r));
  }
  return out;
}

static std::vector<WriteEntry> write_set_from_json(const cjson& arr) {
  std::vector<WriteEntry> out;
  for (const cjson& o : arr) {
    check_exact_keys(o, {"key", "value"});
    out.push_back(WriteEntry{need_string(o, "key"), from_hex(need_string(o, "value"))});
  }
  return out;
}

Bytes endorsement_message(const Digest32& tx_id, const std::vector<ReadEntry>& rs,
                          const std::vector<WriteEntry>& ws) {
  Bytes msg(reinterpret_cast<const char*>(tx_id.data()), tx_id.size());
  msg += encode_read_set(rs);
  msg += encode_write_set(ws);
  return msg;
}

Bytes encode_envelope(const Envelope& e) {
  cjson o = cjson::object();
  o["tx_id"] = to_hex(e.tx_id);
  o["proposal"] = proposal_to_json(e.signed_proposal.proposal);
  o["client_signature"] = to_hex(e.signed_proposal.client_signature);
  o["read_set"] = read_set_to_json(e.read_set);
  o["write_set"] = write_set_to_json(e.write_set);
  cjson ends = cjson::array();
  for (const auto& en : e.endorsements) {
    cjson eo = cjson::object();
    eo["endorser"] = en.endorser;
    eo["signature"] = to_hex(en.signature);
    ends.push_back(std::move(eo));
  }
  o["endorsements"] = std::move(ends);
  return dump_canonical(o);
}

Envelope decode_envelope(std::string_view bytes) {
  cjson o = parse_canonical(bytes);
  check_exact_keys(o, {"tx_id", "proposal", "client_signature", "read_set", "write_set",
                       "endorsements"});
  Envelope e;
  e.tx_id = array_from_hex<32>(need_string(o, "tx_id"));
  e.signed_proposal.proposal = proposal_from_json(need_object(o, "proposal"));
  e.signed_proposal.client_signature = array_from_hex<64>(need_string(o, "client_signature"));
  e.read_set = read_set_from_json(need_array(o, "read_set"));
  e.write_set = write_set_from_json(need_array(o, "write_set"));
  for (const cjson& eo : need_array(o, "endorsements")) {
    check_exact_keys(eo, {"endorser", "signature"});
    e.endorsements.push_back(
        Endorsement{need_string(eo, "endorser"), array_from_hex<64>(need_string(eo, "signature"))});
  }
  return e;
}

}  // namespace medusa::tx
