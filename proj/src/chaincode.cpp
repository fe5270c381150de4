#include "medusa/chaincode.hpp"

#include <algorithm>

#include "medusa/canonical.hpp"
#include "medusa/channel.hpp"
#include "medusa/identity.hpp"

namespace medusa::chaincode {

bool QuerySpec::matches(const WebLogData& w) const {
  switch (filter) {
    case Filter::ALL: return true;
    case Filter::BY_IP: return w.ip == ip;
    case Filter::BY_USER_AGENT: return w.user_agent == user_agent;
    case Filter::BY_DATETIME_RANGE: return w.datetime_ms >= from_ms && w.datetime_ms < to_ms;
  }
  return false;
}

static std::string_view filter_name(QuerySpec::Filter f) {
  switch (f) {
    case QuerySpec::Filter::ALL: return "ALL";
    case QuerySpec::Filter::BY_IP: return "BY_IP";
    case QuerySpec::Filter::BY_USER_AGENT: return "BY_USER_AGENT";
    case QuerySpec::Filter::BY_DATETIME_RANGE: return "BY_DATETIME_RANGE";
  }
  return "ALL";
}

Bytes encode_query_spec(const QuerySpec& q) {
  cjson o = cjson::object();
  o["filter"] = std::string(filter_name(q.filter));
  switch (q.filter) {
    case QuerySpec::Filter::ALL: break;
    case QuerySpec::Filter::BY_IP: o["ip"] = q.ip; break;
    case QuerySpec::Filter::BY_USER_AGENT: o["user_agent"] = q.user_agent; break;
    case QuerySpec::Filter::BY_DATETIME_RANGE:
      o["from"] = static_cast<uint64_t>(q.from_ms);
      o["to"] = static_cast<uint64_t>(q.to_ms);
      break;
  }
  return dump_canonical(o);
}

QuerySpec decode_query_spec(std::string_view bytes) {
  cjson o = parse_canonical(bytes);
  QuerySpec q;
  std::string f = need_string(o, "filter");
  if (f == "ALL") {
    check_exact_keys(o, {"filter"});
    q.filter = QuerySpec::Filter::ALL;
  } else if (f == "BY_IP") {
    check_exact_keys(o, {"filter", "ip"});
    q.filter = QuerySpec::Filter::BY_IP;
    q.ip = need_string(o, "ip");
    if (!is_ip_literal(q.ip)) raise(ErrorCode::InvalidAddress, "filter ip must be an IP literal");
  } else if (f == "BY_USER_AGENT") {
    check_exact_keys(o, {"filter", "user_agent"});
    q.filter = QuerySpec::Filter::BY_USER_AGENT;
    q.user_agent = need_string(o, "user_agent");
    if (!is_valid_utf8(q.user_agent))
      raise(ErrorCode::DecodeError, "filter user_agent must be UTF-8");
  } else if (f == "BY_DATETIME_RANGE") {
    check_exact_keys(o, {"filter", "from", "to"});
    q.filter = QuerySpec::Filter::BY_DATETIME_RANGE;
    uint64_t from = need_u64(o, "from");
    uint64_t to = need_u64(o, "to");
    if (from > static_cast<uint64_t>(kMaxDatetimeMs) ||
        to > static_cast<uint64_t>(kMaxDatetimeMs) + 1 || from > to)
      raise(ErrorCode::InvalidRange, "datetime range must satisfy 0 <= from <= to");
    q.from_ms = static_cast<int64_t>(from);
    q.to_ms = static_cast<int64_t>(to);
  } else {
    raise(ErrorCode::DecodeError, "unknown query filter: " + f);
  }
  return q;
}

ExecOutcome on_data_append(const state::StateView& view, const ExecContext& ctx,
                           const WebLogData& data) {
  ExecOutcome out;
  try {
    validate_weblog(data);
  } catch (const Error& e) {
    out.error = e.code();
    out.error_detail = e.what();
    return out;
  }
  if (!view.get(identity::participant_key(ctx.submitter))) {
    out.error = ErrorCode::UnregisteredSubmitter;
    out.error_detail = "submitter " + ctx.submitter + " is not a registered datasource";
    return out;
  }
  const std::string key = weblog_key(data.asset_id);
  auto existing = view.get(key);
  if (existing) {
    out.error = ErrorCode::DuplicateAsset;
    out.error_detail = "asset " + data.asset_id + " already exists";
    return out;
  }
  out.read_set.push_back(tx::ReadEntry{key, std::nullopt});
  out.write_set.push_back(tx::WriteEntry{key, encode_weblog(data)});
  return out;
}

std::vector<WebLogData> select_weblog(const state::StateView& view, const QuerySpec& query) {
  std::vector<WebLogData> hits;
  view.for_each_prefix(weblog_key_prefix(), [&](const std::string&, const state::Entry& e) {
    WebLogData w = decode_weblog(e.value);
    if (query.matches(w)) hits.push_back(std::move(w));
  });
  std::sort(hits.begin(), hits.end(), [](const WebLogData& a, const WebLogData& b) {
    if (a.datetime_ms != b.datetime_ms) return a.datetime_ms < b.datetime_ms;
    return a.asset_id < b.asset_id;
  });
  return hits;
}

static ExecOutcome run_select(const state::StateView& view, const ExecContext&,
                              const std::vector<std::string>& args) {
  ExecOutcome out;
  if (args.size() != 1) {
    out.error = ErrorCode::ChaincodeError;
    out.error_detail = "selectWebLogData takes exactly one argument";
    return out;
  }
  QuerySpec q;
  try {
    q = decode_query_spec(args[0]);
  } catch (const Error& e) {
    out.error = e.code();
    out.error_detail = e.what();
    return out;
  }
  std::vector<WebLogData> hits = select_weblog(view, q);
  // matched keys with their committed versions; assets are create-only, so
  // this is as strong as recording the whole scan
  for (const auto& w : hits) {
    auto e = view.get(weblog_key(w.asset_id));
    out.read_set.push_back(tx::ReadEntry{weblog_key(w.asset_id), e->version});
  }
  out.response = encode_weblog_list(hits);
  return out;
}

static ExecOutcome run_data_append(const state::StateView& view, const ExecContext& ctx,
                                   const std::vector<std::string>& args) {
  ExecOutcome out;
  if (args.size() != 1) {
    out.error = ErrorCode::ChaincodeError;
    out.error_detail = "DataAppend takes exactly one argument";
    return out;
  }
  WebLogData data;
  try {
    data = decode_weblog(args[0]);
  } catch (const Error& e) {
    out.error = e.code();
    out.error_detail = e.what();
    return out;
  }
  return on_data_append(view, ctx, data);
}

const std::map<std::string, Handler>& dispatch_table() {
  static const std::map<std::string, Handler> table = {
      {std::string(tx::kFnDataAppend), run_data_append},
      {std::string(tx::kFnSelectWebLogData), run_select},
  };
  return table;
}

ExecOutcome dispatch(const state::StateView& view, const ExecContext& ctx,
                     const std::string& function, const std::vector<std::string>& args) {
  const auto& table = dispatch_table();
  auto it = table.find(function);
  if (it == table.end()) {
    ExecOutcome out;
    out.error = ErrorCode::UnknownFunction;
    out.error_detail = "no chaincode function named \"" + function + "\"";
    return out;
  }
  return it->second(view, ctx, args);
}

bool is_system_function(std::string_view function) {
  return function == tx::kFnRegisterDataSource || function == tx::kFnConfigChannel;
}

ExecOutcome execute_system(const state::StateView& view, const ExecContext& ctx,
                           const std::string& function, const std::vector<std::string>& args) {
  ExecOutcome out;
  if (args.size() != 1) {
    out.error = ErrorCode::ChaincodeError;
    out.error_detail = function + " takes exactly one argument";
    return out;
  }
  if (function == tx::kFnRegisterDataSource) {
    identity::ParticipantRecord rec;
    try {
      rec = identity::decode_participant_record(args[0]);
    } catch (const Error& e) {
      out.error = e.code();
      out.error_detail = e.what();
      return out;
    }
    if (ctx.submitter != rec.ds.datasource_id) {
      out.error = ErrorCode::InvalidConfig;
      out.error_detail = "registration must be submitted as the new datasource";
      return out;
    }
    const std::string key = identity::participant_key(rec.ds.datasource_id);
    if (view.get(key)) {
      out.error = ErrorCode::DuplicateParticipant;
      out.error_detail = "datasource " + rec.ds.datasource_id + " is already registered";
      return out;
    }
    out.read_set.push_back(tx::ReadEntry{key, std::nullopt});
    out.write_set.push_back(tx::WriteEntry{key, args[0]});
    return out;
  }
  if (function == tx::kFnConfigChannel) {
    try {
      channel::decode_channel_config(args[0]);
    } catch (const Error& e) {
      out.error = e.code();
      out.error_detail = e.what();
      return out;
    }
    const std::string key = channel::channel_config_key();
    if (view.get(key)) {
      out.error = ErrorCode::ChannelExists;
      out.error_detail = "channel is already configured";
      return out;
    }
    out.read_set.push_back(tx::ReadEntry{key, std::nullopt});
    out.write_set.push_back(tx::WriteEntry{key, args[0]});
    return out;
  }
  out.error = ErrorCode::UnknownFunction;
  out.error_detail = "no system function named \"" + function + "\"";
  return out;
}

ExecOutcome execute_any(const state::StateView& view, const ExecContext& ctx,
                        const std::string& function, const std::vector<std::string>& args) {
  if (is_system_function(function)) return execute_system(view, ctx, function, args);
  return dispatch(view, ctx, function, args);
}

Bytes encode_weblog_list(const std::vector<WebLogData>& list) {
  std::string out = "[";
  for (size_t i = 0; i < list.size(); ++i) {
    if (i) out.push_back(',');
    out += encode_weblog(list[i]);
  }
  out.push_back(']');
  return out;
}

std::vector<WebLogData> decode_weblog_list(std::string_view bytes) {
  cjson arr = parse_canonical(bytes);
  if (!arr.is_array()) raise(ErrorCode::DecodeError, "weblog list must be an array");
  std::vector<WebLogData> out;
  for (const cjson& e : arr) out.push_back(decode_weblog(dump_canonical(e)));
  return out;
}

}  // namespace medusa::chaincode
