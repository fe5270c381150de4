#include "medusa.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "medusa/canonical.hpp"
#include "medusa/chaincode.hpp"
#include "medusa/client.hpp"
#include "medusa/netsim.hpp"

using namespace medusa;

struct medusa_client {
  client::Client impl;
  std::string last_error;

  explicit medusa_client(std::string dir) : impl(std::move(dir)) {}
};

namespace {

char* dup_cstr(std::string_view s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) std::abort();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void put_out(char** out, std::string_view s) {
  if (out) *out = dup_cstr(s);
}

medusa_rc map_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::None: return MEDUSA_OK;
    case ErrorCode::DuplicateAsset:
    case ErrorCode::DuplicateParticipant:
    case ErrorCode::ChannelExists: return MEDUSA_E_CONFLICT;
    case ErrorCode::InvalidPolicy:
    case ErrorCode::PolicyUnsatisfied: return MEDUSA_E_POLICY;
    case ErrorCode::ChainLinkMismatch:
    case ErrorCode::NonSequentialNumber:
    case ErrorCode::DataHashMismatch:
    case ErrorCode::ChainNotVerified:
    case ErrorCode::TamperDetected:
    case ErrorCode::BadClientSignature: return MEDUSA_E_VERIFY;
    case ErrorCode::AuthFailed:
    case ErrorCode::UnknownSigner:
    case ErrorCode::NotChannelMember: return MEDUSA_E_AUTH;
    case ErrorCode::NotFound: return MEDUSA_E_NOTFOUND;
    case ErrorCode::LockBusy:
    case ErrorCode::IoError:
    case ErrorCode::FileUnreadable: return MEDUSA_E_IO;
    case ErrorCode::DecodeError:
    case ErrorCode::InvalidPort:
    case ErrorCode::InvalidAddress:
    case ErrorCode::UnregisteredSubmitter:
    case ErrorCode::InvalidAsset:
    case ErrorCode::InvalidRange:
    case ErrorCode::UnknownFunction:
    case ErrorCode::ChaincodeError:
    case ErrorCode::InvalidConfig:
    case ErrorCode::ParseError:
    case ErrorCode::SubmissionFailure: return MEDUSA_E_USAGE;
  }
  return MEDUSA_E_INTERNAL;
}

template <typename Fn>
medusa_rc guard(medusa_client* c, Fn&& fn) {
  if (!c) return MEDUSA_E_USAGE;
  c->last_error.clear();
  try {
    return fn();
  } catch (const Error& e) {
    c->last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    c->last_error = e.what();
    return MEDUSA_E_INTERNAL;
  }
}

bool args_ok(medusa_client* c, std::initializer_list<const char*> ptrs) {
  for (const char* p : ptrs) {
    if (!p) {
      if (c) c->last_error = "null argument";
      return false;
    }
  }
  return true;
}

chaincode::WebLogData parse_weblog_json(const char* text) {
  cjson o = parse_canonical(text);
  check_keys(o, {"url", "referer", "returnCode", "userAgent", "datetime", "ip"}, {"asset_id"});
  chaincode::WebLogData w;
  if (o.contains("asset_id")) w.asset_id = need_string(o, "asset_id");
  w.url = need_string(o, "url");
  w.referer = need_string(o, "referer");
  const cjson& rc = need(o, "returnCode");
  if (!rc.is_number_integer()) raise(ErrorCode::DecodeError, "returnCode must be an integer");
  w.return_code = rc.get<int>();
  w.user_agent = need_string(o, "userAgent");
  const cjson& dt = need(o, "datetime");
  if (!dt.is_number_integer()) raise(ErrorCode::DecodeError, "datetime must be an integer");
  w.datetime_ms = dt.get<int64_t>();
  w.ip = need_string(o, "ip");
  return w;
}

identity::DataSource parse_datasource_json(const char* text) {
  cjson o = parse_canonical(text);
  check_exact_keys(o, {"datasource_id", "ip", "port", "username", "url"});
  identity::DataSource ds;
  ds.datasource_id = need_string(o, "datasource_id");
  ds.ip = need_string(o, "ip");
  uint32_t port = need_u32(o, "port");
  if (port > 65535) raise(ErrorCode::InvalidPort, "port out of range");
  ds.port = static_cast<uint16_t>(port);
  ds.username = need_string(o, "username");
  ds.url = need_string(o, "url");
  return ds;
}

cjson append_result_json(const client::AppendResult& r) {
  cjson o = cjson::object();
  o["tx_id"] = r.tx_id;
  o["block_number"] = r.block_number;
  o["flag"] = r.flag;
  o["asset_id"] = r.asset_id;
  return o;
}

}  // namespace

extern "C" {

const char* medusa_rc_name(medusa_rc rc) {
  switch (rc) {
    case MEDUSA_OK: return "ok";
    case MEDUSA_E_USAGE: return "usage";
    case MEDUSA_E_CONFLICT: return "conflict";
    case MEDUSA_E_POLICY: return "policy";
    case MEDUSA_E_VERIFY: return "verify";
    case MEDUSA_E_IO: return "io";
    case MEDUSA_E_AUTH: return "auth";
    case MEDUSA_E_NOTFOUND: return "notfound";
    case MEDUSA_E_INTERNAL: return "internal";
  }
  return "unknown";
}

medusa_rc medusa_open(const char* data_dir, medusa_client** out) {
  if (!out) return MEDUSA_E_USAGE;
  *out = nullptr;
  if (!data_dir) return MEDUSA_E_USAGE;
  try {
    *out = new medusa_client(data_dir);
    return MEDUSA_OK;
  } catch (const Error& e) {
    return map_code(e.code());
  } catch (const std::exception&) {
    return MEDUSA_E_INTERNAL;
  }
}

void medusa_close(medusa_client* client) { delete client; }

const char* medusa_last_error(const medusa_client* client) {
  return client ? client->last_error.c_str() : "";
}

medusa_rc medusa_channel_create(medusa_client* client, const char* channel_id,
                                const char* pipeline, uint32_t policy_k, uint32_t peer_count,
                                uint32_t max_block_txs, uint64_t max_wait_ms) {
  return guard(client, [&]() -> medusa_rc {
    if (!args_ok(client, {channel_id, pipeline})) return MEDUSA_E_USAGE;
    channel::Pipeline p;
    if (std::strcmp(pipeline, "eov") == 0) {
      p = channel::Pipeline::EOV;
    } else if (std::strcmp(pipeline, "order_execute") == 0) {
      p = channel::Pipeline::ORDER_EXECUTE;
    } else {
      client->last_error = "pipeline must be eov or order_execute";
      return MEDUSA_E_USAGE;
    }
    client->impl.channel_create(channel_id, p, policy_k, peer_count, max_block_txs, max_wait_ms);
    return MEDUSA_OK;
  });
}

medusa_rc medusa_datasource_register(medusa_client* client, const char* channel_id,
                                     const char* datasource_json, const char* password) {
  return guard(client, [&]() -> medusa_rc {
    if (!args_ok(client, {channel_id, datasource_json, password})) return MEDUSA_E_USAGE;
    client->impl.datasource_register(channel_id, parse_datasource_json(datasource_json), password);
    return MEDUSA_OK;
  });
}

medusa_rc medusa_append(medusa_client* client, const char* channel_id,
                        const char* datasource_id, const char* password,
                        const char* weblog_json, char** out_json) {
  return guard(client, [&]() -> medusa_rc {
    if (!args_ok(client, {channel_id, datasource_id, password, weblog_json}))
      return MEDUSA_E_USAGE;
    client::AppendResult r =
        client->impl.append(channel_id, datasource_id, password, parse_weblog_json(weblog_json));
    put_out(out_json, dump_canonical(append_result_json(r)));
    return MEDUSA_OK;
  });
}

medusa_rc medusa_ingest(medusa_client* client, const char* channel_id,
                        const char* datasource_id, const char* password, const char* log_path,
                        size_t batch_size, int parse_escapes, char** out_json) {
  return guard(client, [&]() -> medusa_rc {
    if (!args_ok(client, {channel_id, datasource_id, password, log_path})) return MEDUSA_E_USAGE;
    ingest::IngestReport report = client->impl.ingest_log(
        channel_id, datasource_id, password, log_path, batch_size, parse_escapes != 0);
    put_out(out_json, report.encode());
    return MEDUSA_OK;
  });
}

medusa_rc medusa_query(medusa_client* client, const char* channel_id,
                       const char* datasource_id, const char* password, const char* query_json,
                       char** out_json) {
  return guard(client, [&]() -> medusa_rc {
    if (!args_ok(client, {channel_id, datasource_id, password, query_json}))
      return MEDUSA_E_USAGE;
    chaincode::QuerySpec q = chaincode::decode_query_spec(query_json);
    client::QueryResult r = client->impl.query(channel_id, datasource_id, password, q);
    cjson o = cjson::object();
    o["rows"] = parse_canonical(chaincode::encode_weblog_list(r.rows));
    o["evidence"] = append_result_json(r.evidence);
    put_out(out_json, dump_canonical(o));
    return MEDUSA_OK;
  });
}

medusa_rc medusa_verify(medusa_client* client, const char* channel_id, char** out_json) {
  return guard(client, [&]() -> medusa_rc {
    if (!args_ok(client, {channel_id})) return MEDUSA_E_USAGE;
    ledger::VerificationReport report = client->impl.verify(channel_id);
    put_out(out_json, report.encode());
    if (report.ok) return MEDUSA_OK;
    client->last_error = report.detail;
    return MEDUSA_E_VERIFY;
  });
}

medusa_rc medusa_block_show(medusa_client* client, const char* channel_id,
                            uint64_t block_number, char** out_json) {
  return guard(client, [&]() -> medusa_rc {
    if (!args_ok(client, {channel_id})) return MEDUSA_E_USAGE;
    put_out(out_json, client->impl.block_show(channel_id, block_number));
    return MEDUSA_OK;
  });
}

medusa_rc medusa_registry_export(medusa_client* client, const char* channel_id,
                                 char** out_text) {
  return guard(client, [&]() -> medusa_rc {
    if (!args_ok(client, {channel_id})) return MEDUSA_E_USAGE;
    put_out(out_text, client->impl.registry_export(channel_id));
    return MEDUSA_OK;
  });
}

medusa_rc medusa_list_channels(medusa_client* client, char** out_json) {
  return guard(client, [&]() -> medusa_rc {
    cjson arr = cjson::array();
    for (const std::string& id : client->impl.list_channels()) arr.push_back(id);
    put_out(out_json, dump_canonical(arr));
    return MEDUSA_OK;
  });
}

medusa_rc medusa_config_get(medusa_client* client, char** out_json) {
  return guard(client, [&]() -> medusa_rc {
    client::CliConfig cfg = client::CliConfig::load(client->impl.config_path());
    cjson o = cjson::object();
    o["default_channel"] = cfg.default_channel;
    o["output_format"] = cfg.output_format;
    put_out(out_json, dump_canonical(o));
    return MEDUSA_OK;
  });
}

medusa_rc medusa_config_set(medusa_client* client, const char* config_json) {
  return guard(client, [&]() -> medusa_rc {
    if (!args_ok(client, {config_json})) return MEDUSA_E_USAGE;
    cjson o = parse_canonical(config_json);
    check_keys(o, {}, {"default_channel", "output_format"});
    client::CliConfig cfg = client::CliConfig::load(client->impl.config_path());
    if (o.contains("default_channel")) cfg.default_channel = need_string(o, "default_channel");
    if (o.contains("output_format")) {
      cfg.output_format = need_string(o, "output_format");
      if (cfg.output_format != "table" && cfg.output_format != "canonical")
        raise(ErrorCode::InvalidConfig, "output_format must be table or canonical");
    }
    cfg.save(client->impl.config_path());
    return MEDUSA_OK;
  });
}

medusa_rc medusa_simulate(const char* scenario_json, int order_execute, char** out_json,
                          char** out_table, char** out_error) {
  if (out_error) *out_error = nullptr;
  if (!scenario_json) {
    put_out(out_error, "null scenario");
    return MEDUSA_E_USAGE;
  }
  try {
    netsim::ScenarioConfig cfg = netsim::ScenarioConfig::parse(scenario_json);
    netsim::validate_scenario(cfg);
    netsim::ScenarioResult result =
        order_execute ? netsim::run_order_execute_baseline(cfg) : netsim::run_scenario(cfg);
    put_out(out_json, result.metrics.encode());
    put_out(out_table, netsim::render_metrics_table(result.metrics));
    return MEDUSA_OK;
  } catch (const Error& e) {
    put_out(out_error, e.what());
    return map_code(e.code());
  } catch (const std::exception& e) {
    put_out(out_error, e.what());
    return MEDUSA_E_INTERNAL;
  }
}

void medusa_string_free(char* s) { std::free(s); }

}  // extern "C"
