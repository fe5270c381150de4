// Operator command line over the C API. All engine behavior lives behind
// medusa.h; this file only parses flags, resolves defaults and renders.

#include <termios.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "medusa.h"

using json = nlohmann::ordered_json;

namespace {

struct CStr {
  char* s = nullptr;
  ~CStr() { medusa_string_free(s); }
};

int exit_code(medusa_rc rc) {
  switch (rc) {
    case MEDUSA_OK: return 0;
    case MEDUSA_E_USAGE: return 1;
    case MEDUSA_E_CONFLICT: return 2;
    case MEDUSA_E_POLICY: return 3;
    case MEDUSA_E_VERIFY: return 4;
    case MEDUSA_E_AUTH: return 4;  // failed authenticity check
    case MEDUSA_E_IO: return 5;
    case MEDUSA_E_NOTFOUND: return 1;
    case MEDUSA_E_INTERNAL: return 1;
  }
  return 1;
}

struct Session {
  medusa_client* c = nullptr;
  ~Session() {
    if (c) medusa_close(c);
  }
};

[[noreturn]] void die(const Session& s, medusa_rc rc) {
  std::cerr << "medusa: " << medusa_rc_name(rc) << ": " << medusa_last_error(s.c) << "\n";
  std::exit(exit_code(rc));
}

void check(const Session& s, medusa_rc rc) {
  if (rc != MEDUSA_OK) die(s, rc);
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? v : fallback;
}

// env > flag > built-in default
std::string resolve_data_dir(const std::string& flag) {
  return env_or("MEDUSA_DATA_DIR", flag.empty() ? ".medusa" : flag);
}

void open_session(Session& s, const std::string& flag_dir) {
  std::string dir = resolve_data_dir(flag_dir);
  medusa_rc rc = medusa_open(dir.c_str(), &s.c);
  if (rc != MEDUSA_OK) {
    std::cerr << "medusa: cannot open data directory " << dir << "\n";
    std::exit(exit_code(rc));
  }
}

json config_of(const Session& s) {
  CStr cfg;
  if (medusa_config_get(s.c, &cfg.s) != MEDUSA_OK) return json::object();
  return json::parse(cfg.s);
}

// env > flag > config default_channel
std::string resolve_channel(const Session& s, const std::string& flag) {
  std::string ch = env_or("MEDUSA_CHANNEL", flag);
  if (ch.empty()) {
    json cfg = config_of(s);
    if (cfg.contains("default_channel")) ch = cfg["default_channel"].get<std::string>();
  }
  if (ch.empty()) {
    std::cerr << "medusa: usage: no channel (use --channel, MEDUSA_CHANNEL or config)\n";
    std::exit(1);
  }
  return ch;
}

// env > flag > config output_format > table
std::string resolve_format(const Session* s, const std::string& flag) {
  std::string f = env_or("MEDUSA_FORMAT", flag);
  if (f.empty() && s && s->c) {
    json cfg = config_of(*s);
    if (cfg.contains("output_format")) f = cfg["output_format"].get<std::string>();
  }
  if (f.empty()) f = "table";
  if (f != "table" && f != "canonical") {
    std::cerr << "medusa: usage: format must be table or canonical\n";
    std::exit(1);
  }
  return f;
}

// Never from argv: environment first, then a no-echo prompt on a tty, then
// one line from stdin for piped scripts.
std::string read_password() {
  if (const char* p = std::getenv("MEDUSA_PASSWORD")) return p;
  std::string pw;
  if (isatty(STDIN_FILENO)) {
    std::cerr << "password: " << std::flush;
    termios saved{};
    tcgetattr(STDIN_FILENO, &saved);
    termios off = saved;
    off.c_lflag &= ~static_cast<tcflag_t>(ECHO);
    tcsetattr(STDIN_FILENO, TCSANOW, &off);
    std::getline(std::cin, pw);
    tcsetattr(STDIN_FILENO, TCSANOW, &saved);
    std::cerr << "\n";
  } else {
    std::getline(std::cin, pw);
  }
  return pw;
}

std::string read_file_or_die(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "medusa: io: cannot read " << path << "\n";
    std::exit(5);
  }
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void print_append_result(const std::string& fmt, const char* result_json) {
  if (fmt == "canonical") {
    std::cout << result_json << "\n";
    return;
  }
  json r = json::parse(result_json);
  std::cout << "committed " << r["asset_id"].get<std::string>() << " in block "
            << r["block_number"].get<uint64_t>() << " (" << r["flag"].get<std::string>()
            << ", tx " << r["tx_id"].get<std::string>() << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medusa: audit log storage on a tamper-evident replicated ledger"};
  app.require_subcommand(1);

  std::string data_dir_flag, channel_flag, format_flag;
  app.add_option("--data-dir", data_dir_flag, "data directory (MEDUSA_DATA_DIR)");
  app.add_option("--channel", channel_flag, "channel id (MEDUSA_CHANNEL)");
  app.add_option("--format", format_flag, "table or canonical (MEDUSA_FORMAT)");

  // channel create / channel list
  auto* channel = app.add_subcommand("channel", "create and list channels")->fallthrough();
  channel->require_subcommand(1);
  auto* chan_create = channel->add_subcommand("create", "write a genesis block")->fallthrough();
  std::string cc_id, cc_pipeline = "eov";
  uint32_t cc_k = 1, cc_peers = 1, cc_max_txs = 16;
  uint64_t cc_wait = 100;
  chan_create->add_option("id", cc_id, "channel id")->required();
  chan_create->add_option("--pipeline", cc_pipeline, "eov or order_execute");
  chan_create->add_option("--policy-k", cc_k, "endorsements required per transaction");
  chan_create->add_option("--peers", cc_peers, "embedded endorsing peers");
  chan_create->add_option("--max-block-txs", cc_max_txs, "block cut size");
  chan_create->add_option("--max-wait-ms", cc_wait, "block cut timer");
  chan_create->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    check(s, medusa_channel_create(s.c, cc_id.c_str(), cc_pipeline.c_str(), cc_k, cc_peers,
                                   cc_max_txs, cc_wait));
    std::cout << "created channel " << cc_id << "\n";
  });

  auto* chan_list = channel->add_subcommand("list", "list channel ids")->fallthrough();
  chan_list->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    CStr out;
    check(s, medusa_list_channels(s.c, &out.s));
    if (resolve_format(&s, format_flag) == "canonical") {
      std::cout << out.s << "\n";
    } else {
      for (const auto& id : json::parse(out.s)) std::cout << id.get<std::string>() << "\n";
    }
  });

  // datasource register / datasource export
  auto* datasource = app.add_subcommand("datasource", "manage registered datasources")->fallthrough();
  datasource->require_subcommand(1);
  auto* ds_register = datasource->add_subcommand("register", "register a datasource identity")->fallthrough();
  std::string dr_id, dr_ip, dr_user, dr_url;
  uint32_t dr_port = 0;
  ds_register->add_option("id", dr_id, "datasource id")->required();
  ds_register->add_option("--ip", dr_ip, "source address")->required();
  ds_register->add_option("--port", dr_port, "source port")->required();
  ds_register->add_option("--username", dr_user, "owner account name")->required();
  ds_register->add_option("--url", dr_url, "service url")->required();
  ds_register->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    std::string ch = resolve_channel(s, channel_flag);
    json ds = json::object();
    ds["datasource_id"] = dr_id;
    ds["ip"] = dr_ip;
    ds["port"] = dr_port;
    ds["username"] = dr_user;
    ds["url"] = dr_url;
    std::string password = read_password();
    check(s, medusa_datasource_register(s.c, ch.c_str(), ds.dump().c_str(), password.c_str()));
    std::cout << "registered " << dr_id << " on " << ch << "\n";
  });

  auto* ds_export = datasource->add_subcommand("export", "print participant records")->fallthrough();
  ds_export->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    std::string ch = resolve_channel(s, channel_flag);
    CStr out;
    check(s, medusa_registry_export(s.c, ch.c_str(), &out.s));
    std::cout << out.s;
  });

  // append
  auto* append = app.add_subcommand("append", "append one audit log record")->fallthrough();
  std::string ap_ds, ap_url, ap_ip, ap_referer, ap_ua, ap_asset;
  int64_t ap_datetime = 0;
  int ap_status = 0;
  append->add_option("--datasource", ap_ds, "submitting datasource id")->required();
  append->add_option("--url", ap_url, "requested url")->required();
  append->add_option("--ip", ap_ip, "client address")->required();
  append->add_option("--datetime", ap_datetime, "UTC milliseconds since epoch")->required();
  append->add_option("--status", ap_status, "HTTP status code")->required();
  append->add_option("--user-agent", ap_ua, "user agent string")->required();
  append->add_option("--referer", ap_referer, "referer (empty for none)");
  append->add_option("--asset-id", ap_asset, "explicit asset id (derived when omitted)");
  append->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    std::string ch = resolve_channel(s, channel_flag);
    std::string fmt = resolve_format(&s, format_flag);
    json w = json::object();
    if (!ap_asset.empty()) w["asset_id"] = ap_asset;
    w["url"] = ap_url;
    w["referer"] = ap_referer;
    w["returnCode"] = ap_status;
    w["userAgent"] = ap_ua;
    w["datetime"] = ap_datetime;
    w["ip"] = ap_ip;
    std::string password = read_password();
    CStr out;
    check(s, medusa_append(s.c, ch.c_str(), ap_ds.c_str(), password.c_str(), w.dump().c_str(),
                           &out.s));
    print_append_result(fmt, out.s);
  });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "append every record of a combined-format log")->fallthrough();
  std::string in_path, in_ds;
  size_t in_batch = 64;
  bool in_no_escapes = false;
  ingest->add_option("file", in_path, "log file path")->required();
  ingest->add_option("--datasource", in_ds, "submitting datasource id")->required();
  ingest->add_option("--batch-size", in_batch, "records per block cut");
  ingest->add_flag("--no-escapes", in_no_escapes, "disable backslash escapes in quoted fields");
  ingest->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    std::string ch = resolve_channel(s, channel_flag);
    std::string fmt = resolve_format(&s, format_flag);
    std::string password = read_password();
    CStr out;
    check(s, medusa_ingest(s.c, ch.c_str(), in_ds.c_str(), password.c_str(), in_path.c_str(),
                           in_batch, in_no_escapes ? 0 : 1, &out.s));
    if (fmt == "canonical") {
      std::cout << out.s << "\n";
      return;
    }
    json r = json::parse(out.s);
    for (auto& [key, value] : r.items()) {
      if (key == "failures") continue;
      std::cout << key << " " << value.dump() << "\n";
    }
    for (const auto& f : r["failures"])
      std::cerr << "line " << f["line"].get<uint64_t>() << ": "
                << f["reason"].get<std::string>() << "\n";
  });

  // query
  auto* query = app.add_subcommand("query", "select committed records")->fallthrough();
  std::string q_ds, q_ip, q_ua;
  int64_t q_from = -1, q_to = -1;
  query->add_option("--datasource", q_ds, "querying datasource id")->required();
  auto* q_ip_opt = query->add_option("--ip", q_ip, "records from this client address");
  auto* q_ua_opt = query->add_option("--user-agent", q_ua, "records with this user agent");
  auto* q_from_opt = query->add_option("--from", q_from, "range start, inclusive, UTC ms");
  auto* q_to_opt = query->add_option("--to", q_to, "range end, exclusive, UTC ms");
  q_ip_opt->excludes(q_ua_opt)->excludes(q_from_opt)->excludes(q_to_opt);
  q_ua_opt->excludes(q_from_opt)->excludes(q_to_opt);
  q_from_opt->needs(q_to_opt);
  q_to_opt->needs(q_from_opt);
  query->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    std::string ch = resolve_channel(s, channel_flag);
    std::string fmt = resolve_format(&s, format_flag);
    json q = json::object();
    if (!q_ip.empty()) {
      q["filter"] = "BY_IP";
      q["ip"] = q_ip;
    } else if (!q_ua.empty()) {
      q["filter"] = "BY_USER_AGENT";
      q["user_agent"] = q_ua;
    } else if (q_from >= 0 || q_to >= 0) {
      q["filter"] = "BY_DATETIME_RANGE";
      q["from"] = q_from;
      q["to"] = q_to;
    } else {
      q["filter"] = "ALL";
    }
    std::string password = read_password();
    CStr out;
    check(s, medusa_query(s.c, ch.c_str(), q_ds.c_str(), password.c_str(), q.dump().c_str(),
                          &out.s));
    json r = json::parse(out.s);
    if (fmt == "canonical") {
      std::cout << out.s << "\n";
    } else {
      for (const auto& row : r["rows"]) std::cout << row.dump() << "\n";
      std::cerr << r["rows"].size() << " records, evidence in block "
                << r["evidence"]["block_number"].get<uint64_t>() << "\n";
    }
  });

  // verify
  auto* verify = app.add_subcommand("verify", "re-verify the stored chain")->fallthrough();
  verify->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    std::string ch = resolve_channel(s, channel_flag);
    std::string fmt = resolve_format(&s, format_flag);
    CStr out;
    medusa_rc rc = medusa_verify(s.c, ch.c_str(), &out.s);
    if (rc != MEDUSA_OK && rc != MEDUSA_E_VERIFY) die(s, rc);
    if (fmt == "canonical") {
      std::cout << out.s << "\n";
    } else if (rc == MEDUSA_OK) {
      std::cout << "ok\n";
    } else {
      json r = json::parse(out.s);
      std::cout << "TAMPERED first_bad_block=" << r["first_bad_block"].get<uint64_t>() << " "
                << r["failure_kind"].get<std::string>() << ": " << r["detail"].get<std::string>()
                << "\n";
    }
    std::exit(exit_code(rc));
  });

  // block show
  auto* block = app.add_subcommand("block", "inspect stored blocks")->fallthrough();
  block->require_subcommand(1);
  auto* block_show = block->add_subcommand("show", "print one block's canonical bytes")->fallthrough();
  uint64_t bs_number = 0;
  block_show->add_option("number", bs_number, "block number")->required();
  block_show->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    std::string ch = resolve_channel(s, channel_flag);
    CStr out;
    check(s, medusa_block_show(s.c, ch.c_str(), bs_number, &out.s));
    std::cout << out.s << "\n";
  });

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a deterministic multi-peer scenario")->fallthrough();
  std::string sim_path, sim_metrics_out;
  bool sim_oe = false;
  simulate->add_option("scenario", sim_path, "scenario description file")->required();
  simulate->add_flag("--order-execute", sim_oe, "run the order-execute baseline");
  simulate->add_option("--metrics-out", sim_metrics_out, "also write the metrics document here");
  simulate->callback([&] {
    std::string fmt = resolve_format(nullptr, format_flag);
    std::string scenario = read_file_or_die(sim_path);
    CStr out_json, out_table, out_error;
    medusa_rc rc = medusa_simulate(scenario.c_str(), sim_oe ? 1 : 0, &out_json.s, &out_table.s,
                                   &out_error.s);
    if (rc != MEDUSA_OK) {
      std::cerr << "medusa: " << medusa_rc_name(rc) << ": "
                << (out_error.s ? out_error.s : "") << "\n";
      std::exit(exit_code(rc));
    }
    std::cout << (fmt == "canonical" ? out_json.s : out_table.s);
    if (fmt == "canonical") std::cout << "\n";
    if (!sim_metrics_out.empty()) {
      std::ofstream f(sim_metrics_out, std::ios::binary | std::ios::trunc);
      if (!f) {
        std::cerr << "medusa: io: cannot write " << sim_metrics_out << "\n";
        std::exit(5);
      }
      f << out_json.s << "\n";
    }
  });

  // config get / config set
  auto* config = app.add_subcommand("config", "operator defaults in the data directory")->fallthrough();
  config->require_subcommand(1);
  auto* config_get = config->add_subcommand("get", "print the stored defaults")->fallthrough();
  config_get->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    CStr out;
    check(s, medusa_config_get(s.c, &out.s));
    std::cout << out.s << "\n";
  });
  auto* config_set = config->add_subcommand("set", "store defaults")->fallthrough();
  std::string cs_channel, cs_format;
  auto* cs_channel_opt = config_set->add_option("--default-channel", cs_channel, "channel used when none is given");
  auto* cs_format_opt = config_set->add_option("--output-format", cs_format, "table or canonical");
  config_set->callback([&] {
    Session s;
    open_session(s, data_dir_flag);
    json o = json::object();
    if (cs_channel_opt->count()) o["default_channel"] = cs_channel;
    if (cs_format_opt->count()) o["output_format"] = cs_format;
    check(s, medusa_config_set(s.c, o.dump().c_str()));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return 0;
}
