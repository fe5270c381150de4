#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>

#include "medusa.h"
#include "medusa/canonical.hpp"
#include "medusa/client.hpp"
#include "testenv.hpp"

using namespace medusa;
using testenv::TempDir;

static chaincode::WebLogData weblog(int n) {
  chaincode::WebLogData w;
  w.url = "https://site.example/page-" + std::to_string(n);
  w.referer = n % 2 ? "" : "https://ref.example/";
  w.return_code = 200;
  w.user_agent = "agent/" + std::to_string(n);
  w.datetime_ms = 1700000000000 + n * 1000;
  w.ip = "10.1.2." + std::to_string(n % 200 + 1);
  return w;
}

static ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::None;
}

static std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

static void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out);
  out << bytes;
}

// a channel with one registered datasource, ready for appends
struct ClientRig {
  TempDir dir;
  std::string data = dir.file("data");
  client::Client c{data};

  explicit ClientRig(channel::Pipeline p = channel::Pipeline::EOV) {
    uint32_t k = p == channel::Pipeline::EOV ? 2 : 1;
    c.channel_create("main", p, k, 3, 8, 100);
    identity::DataSource ds{"web01", "10.0.0.1", 8080, "op", "https://web01.example/logs"};
    c.datasource_register("main", ds, "hunter2");
  }
};

TEST_CASE("client: channel lifecycle and identifier hygiene") {
  TempDir dir;
  client::Client c(dir.file("data"));
  CHECK(c.list_channels().empty());

  c.channel_create("zeta", channel::Pipeline::EOV, 1, 2, 8, 100);
  c.channel_create("alpha", channel::Pipeline::ORDER_EXECUTE, 1, 1, 4, 50);
  CHECK(c.list_channels() == std::vector<std::string>{"alpha", "zeta"});

  CHECK(code_of([&] { c.channel_create("zeta", channel::Pipeline::EOV, 1, 2, 8, 100); }) ==
        ErrorCode::ChannelExists);
  // policy is validated before anything touches the disk
  CHECK(code_of([&] { c.channel_create("late", channel::Pipeline::EOV, 5, 3, 8, 100); }) ==
        ErrorCode::InvalidPolicy);
  CHECK(c.list_channels() == std::vector<std::string>{"alpha", "zeta"});

  for (const char* bad : {"", "a/b", "a\\b", "..", ".", "has space"})
    CHECK(code_of([&] { c.channel_create(bad, channel::Pipeline::EOV, 1, 1, 8, 100); }) ==
          ErrorCode::InvalidConfig);

  ledger::VerificationReport rep = c.verify("zeta");
  CHECK(rep.ok);
  ledger::Block genesis = ledger::decode_block(c.block_show("zeta", 0));
  CHECK(genesis.header.block_number == 0);
  CHECK(code_of([&] { c.block_show("zeta", 1); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { c.verify("ghost"); }) == ErrorCode::NotFound);
}

TEST_CASE("client: append, duplicate handling and committed queries") {
  ClientRig rig;

  chaincode::WebLogData w = weblog(1);
  client::AppendResult r = rig.c.append("main", "web01", "hunter2", w);
  CHECK(r.flag == "VALID");
  CHECK(r.block_number == 2);  // genesis 0, registration 1
  CHECK(r.asset_id == chaincode::derive_asset_id(w));
  CHECK(r.tx_id.size() == 64);

  // same content, same asset: endorsement refuses it before ordering
  uint64_t height_before = ledger::decode_block(rig.c.block_show("main", 2)).header.block_number;
  CHECK(code_of([&] { rig.c.append("main", "web01", "hunter2", weblog(1)); }) ==
        ErrorCode::DuplicateAsset);
  CHECK(code_of([&] { rig.c.block_show("main", height_before + 1); }) == ErrorCode::NotFound);

  rig.c.append("main", "web01", "hunter2", weblog(2));

  chaincode::QuerySpec q;
  q.filter = chaincode::QuerySpec::Filter::BY_IP;
  q.ip = weblog(1).ip;
  client::QueryResult qr = rig.c.query("main", "web01", "hunter2", q);
  REQUIRE(qr.rows.size() == 1);
  chaincode::WebLogData expect = weblog(1);
  expect.asset_id = chaincode::derive_asset_id(weblog(1));
  CHECK(qr.rows[0] == expect);
  // the query itself commits as evidence
  CHECK(qr.evidence.flag == "VALID");
  CHECK(qr.evidence.block_number == 4);
  CHECK(rig.c.verify("main").ok);
}

TEST_CASE("client: authentication and input validation") {
  ClientRig rig;

  CHECK(code_of([&] { rig.c.append("main", "web01", "wrong", weblog(1)); }) ==
        ErrorCode::AuthFailed);
  CHECK(code_of([&] { rig.c.append("main", "nobody", "hunter2", weblog(1)); }) ==
        ErrorCode::AuthFailed);
  CHECK(code_of([&] { rig.c.append("ghost", "web01", "hunter2", weblog(1)); }) ==
        ErrorCode::NotFound);
  CHECK(code_of([&] { rig.c.append("main", "../web01", "hunter2", weblog(1)); }) ==
        ErrorCode::InvalidConfig);

  chaincode::WebLogData bad_rc = weblog(1);
  bad_rc.return_code = 99;
  CHECK(code_of([&] { rig.c.append("main", "web01", "hunter2", bad_rc); }) ==
        ErrorCode::InvalidAsset);
  chaincode::WebLogData bad_ip = weblog(1);
  bad_ip.ip = "not-an-ip";
  CHECK(code_of([&] { rig.c.append("main", "web01", "hunter2", bad_ip); }) ==
        ErrorCode::InvalidAsset);

  identity::DataSource dup{"web01", "10.0.0.2", 9090, "op2", "https://dup.example/"};
  CHECK(code_of([&] { rig.c.datasource_register("main", dup, "pw"); }) ==
        ErrorCode::DuplicateParticipant);
}

TEST_CASE("client: exported registry and block files never leak secrets") {
  ClientRig rig;
  rig.c.append("main", "web01", "hunter2", weblog(1));

  std::string seed_hex = slurp(rig.data + "/keys/main/web01.key");
  while (!seed_hex.empty() && seed_hex.back() == '\n') seed_hex.pop_back();
  REQUIRE(seed_hex.size() == 64);

  std::string exported = rig.c.registry_export("main");
  CHECK(exported.find("web01") != std::string::npos);
  CHECK(exported.find("public_key") != std::string::npos);
  CHECK(exported.find("hunter2") == std::string::npos);
  CHECK(exported.find(seed_hex) == std::string::npos);

  std::string blocks = slurp(rig.data + "/channels/main/blocks.dat");
  CHECK(blocks.find("hunter2") == std::string::npos);
  CHECK(blocks.find(seed_hex) == std::string::npos);

  // every export line is one canonical participant record
  std::istringstream lines(exported);
  std::string line;
  size_t n = 0;
  while (std::getline(lines, line)) {
    cjson o = parse_canonical(line);
    CHECK(o.contains("password_digest"));
    CHECK(!o.contains("password"));
    ++n;
  }
  CHECK(n == 1);
}

TEST_CASE("client: state survives reopening the data directory") {
  ClientRig rig;
  rig.c.append("main", "web01", "hunter2", weblog(7));

  client::Client again(rig.data);
  CHECK(again.list_channels() == std::vector<std::string>{"main"});
  CHECK(again.verify("main").ok);
  chaincode::QuerySpec q;  // ALL
  client::QueryResult qr = again.query("main", "web01", "hunter2", q);
  REQUIRE(qr.rows.size() == 1);
  CHECK(qr.rows[0].url == weblog(7).url);
}

TEST_CASE("client: log ingestion reports per-line outcomes") {
  ClientRig rig;
  const std::string good1 =
      R"(10.0.0.1 - - [10/Oct/2000:13:55:36 -0700] "GET /a HTTP/1.0" 200 23 "-" "UA")";
  const std::string good2 =
      R"(10.0.0.2 - - [10/Oct/2000:13:55:37 -0700] "GET /b HTTP/1.0" 200 23 "-" "UA")";
  std::string path = rig.dir.file("access.log");
  spit(path, good1 + "\n" + good2 + "\n" + good1 + "\nnot a log line\n");

  ingest::IngestReport rep = rig.c.ingest_log("main", "web01", "hunter2", path, 2, true);
  CHECK(rep.lines_read == 4);
  CHECK(rep.parsed_ok == 3);
  CHECK(rep.parse_failed == 1);
  CHECK(rep.submitted == 3);
  CHECK(rep.committed_valid == 2);
  CHECK(rep.rejected_duplicates == 1);
  REQUIRE(rep.failures.size() == 1);
  CHECK(rep.failures[0].line_number == 4);

  CHECK(code_of([&] { rig.c.ingest_log("main", "web01", "hunter2", rig.dir.file("nope.log"), 2, true); }) ==
        ErrorCode::FileUnreadable);
  CHECK(rig.c.verify("main").ok);
}

TEST_CASE("client: on-disk tampering is detected and blocks further writes") {
  ClientRig rig;
  rig.c.append("main", "web01", "hunter2", weblog(1));

  std::string blocks_path = rig.data + "/channels/main/blocks.dat";
  std::string bytes = slurp(blocks_path);
  size_t at = bytes.find("page-1");
  REQUIRE(at != std::string::npos);
  bytes[at] = 'q';
  spit(blocks_path, bytes);

  ledger::VerificationReport rep = rig.c.verify("main");
  CHECK(!rep.ok);
  REQUIRE(rep.first_bad_block.has_value());
  CHECK(*rep.first_bad_block == 2);

  CHECK(code_of([&] { rig.c.append("main", "web01", "hunter2", weblog(2)); }) ==
        ErrorCode::ChainNotVerified);
}

TEST_CASE("client: a held data directory fails fast instead of waiting") {
  ClientRig rig;
  int fd = ::open((rig.data + "/.lock").c_str(), O_CREAT | O_RDWR, 0644);
  REQUIRE(fd >= 0);
  REQUIRE(::flock(fd, LOCK_EX | LOCK_NB) == 0);

  CHECK(code_of([&] { rig.c.verify("main"); }) == ErrorCode::LockBusy);
  CHECK(code_of([&] { rig.c.append("main", "web01", "hunter2", weblog(1)); }) ==
        ErrorCode::LockBusy);

  ::flock(fd, LOCK_UN);
  ::close(fd);
  CHECK(rig.c.verify("main").ok);
}

TEST_CASE("client: order-execute channel keeps duplicate evidence on-chain") {
  ClientRig rig(channel::Pipeline::ORDER_EXECUTE);

  client::AppendResult r = rig.c.append("main", "web01", "hunter2", weblog(1));
  CHECK(r.flag == "VALID");
  CHECK(r.block_number == 2);

  // no endorsement step: the duplicate is discovered at commit and the
  // flagged transaction stays on the chain as evidence
  ErrorCode code = ErrorCode::None;
  std::string msg;
  try {
    rig.c.append("main", "web01", "hunter2", weblog(1));
  } catch (const Error& e) {
    code = e.code();
    msg = e.what();
  }
  CHECK(code == ErrorCode::DuplicateAsset);
  CHECK(msg.find("recorded invalid at block 3") != std::string::npos);
  ledger::Block evidence = ledger::decode_block(rig.c.block_show("main", 3));
  REQUIRE(evidence.validity_flags.size() == 1);
  CHECK(evidence.validity_flags[0] == ledger::TxValidity::MVCC_CONFLICT);
  CHECK(rig.c.verify("main").ok);

  chaincode::QuerySpec q;
  client::QueryResult qr = rig.c.query("main", "web01", "hunter2", q);
  REQUIRE(qr.rows.size() == 1);
  CHECK(qr.evidence.flag == "VALID");
}

TEST_CASE("client: operator config file round-trips and validates") {
  TempDir dir;
  client::Client c(dir.file("data"));

  client::CliConfig cfg = client::CliConfig::load(c.config_path());
  CHECK(cfg.default_channel.empty());
  CHECK(cfg.output_format == "table");

  cfg.default_channel = "main";
  cfg.output_format = "canonical";
  cfg.save(c.config_path());
  client::CliConfig back = client::CliConfig::load(c.config_path());
  CHECK(back.default_channel == "main");
  CHECK(back.output_format == "canonical");

  spit(c.config_path(), R"({"output_format":"yaml"})");
  CHECK(code_of([&] { client::CliConfig::load(c.config_path()); }) == ErrorCode::InvalidConfig);
  spit(c.config_path(), R"({"colour":"on"})");
  CHECK_THROWS_AS(client::CliConfig::load(c.config_path()), Error);
}

// ---------------------------------------------------------------------------
// the same operations through the C boundary
// ---------------------------------------------------------------------------

namespace {

struct CStr {
  char* p = nullptr;
  ~CStr() { medusa_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct CApi {
  TempDir dir;
  medusa_client* c = nullptr;

  CApi() { REQUIRE(medusa_open(dir.file("data").c_str(), &c) == MEDUSA_OK); }
  ~CApi() { medusa_close(c); }
};

constexpr const char* kDsJson =
    R"({"datasource_id":"web01","ip":"10.0.0.1","port":8080,"username":"op","url":"https://web01.example/logs"})";

std::string weblog_json(int n) {
  cjson o = cjson::object();
  o["url"] = "https://site.example/page-" + std::to_string(n);
  o["referer"] = "";
  o["returnCode"] = 200;
  o["userAgent"] = "agent/" + std::to_string(n);
  o["datetime"] = 1700000000000 + n * 1000;
  o["ip"] = "10.1.2.3";
  return dump_canonical(o);
}

}  // namespace

TEST_CASE("capi: lifecycle, argument checks and error codes") {
  CHECK(medusa_open("/tmp/x", nullptr) == MEDUSA_E_USAGE);
  medusa_client* null_out = reinterpret_cast<medusa_client*>(1);
  CHECK(medusa_open(nullptr, &null_out) == MEDUSA_E_USAGE);
  CHECK(null_out == nullptr);
  CHECK(std::string(medusa_last_error(nullptr)) == "");

  CApi api;
  CHECK(std::string(medusa_last_error(api.c)) == "");
  CHECK(medusa_channel_create(api.c, "main", "eov", 1, 2, 8, 100) == MEDUSA_OK);
  CHECK(std::string(medusa_last_error(api.c)) == "");

  CHECK(medusa_channel_create(api.c, "main", "eov", 1, 2, 8, 100) == MEDUSA_E_CONFLICT);
  CHECK(std::string(medusa_last_error(api.c)).find("already exists") != std::string::npos);
  CHECK(medusa_channel_create(api.c, "x", "evo", 1, 2, 8, 100) == MEDUSA_E_USAGE);
  CHECK(medusa_channel_create(api.c, nullptr, "eov", 1, 2, 8, 100) == MEDUSA_E_USAGE);
  CHECK(std::string(medusa_last_error(api.c)) == "null argument");
  CHECK(medusa_channel_create(api.c, "x", "eov", 9, 2, 8, 100) == MEDUSA_E_POLICY);

  CHECK(std::string(medusa_rc_name(MEDUSA_OK)) == "ok");
  CHECK(std::string(medusa_rc_name(MEDUSA_E_CONFLICT)) == "conflict");
  CHECK(std::string(medusa_rc_name(MEDUSA_E_VERIFY)) == "verify");
}

TEST_CASE("capi: full append/query/verify round trip over one handle") {
  CApi api;
  REQUIRE(medusa_channel_create(api.c, "main", "eov", 2, 3, 8, 100) == MEDUSA_OK);
  REQUIRE(medusa_datasource_register(api.c, "main", kDsJson, "hunter2") == MEDUSA_OK);
  CHECK(medusa_datasource_register(api.c, "main", kDsJson, "other") == MEDUSA_E_CONFLICT);
  CHECK(medusa_datasource_register(api.c, "main", "{bad json", "pw") == MEDUSA_E_USAGE);

  CStr out;
  REQUIRE(medusa_append(api.c, "main", "web01", "hunter2", weblog_json(1).c_str(), &out.p) ==
          MEDUSA_OK);
  cjson ar = parse_canonical(out.str());
  CHECK(ar["flag"] == "VALID");
  CHECK(ar["block_number"] == 2);
  CHECK(ar["asset_id"].get<std::string>().size() == 32);
  CHECK(ar["tx_id"].get<std::string>().size() == 64);

  CHECK(medusa_append(api.c, "main", "web01", "hunter2", weblog_json(1).c_str(), nullptr) ==
        MEDUSA_E_CONFLICT);
  CHECK(medusa_append(api.c, "main", "web01", "wrong", weblog_json(2).c_str(), nullptr) ==
        MEDUSA_E_AUTH);
  CHECK(medusa_append(api.c, "main", "web01", "hunter2", R"({"url":"/x"})", nullptr) ==
        MEDUSA_E_USAGE);

  CStr q;
  REQUIRE(medusa_query(api.c, "main", "web01", "hunter2",
                       R"({"filter":"BY_IP","ip":"10.1.2.3"})", &q.p) == MEDUSA_OK);
  cjson qr = parse_canonical(q.str());
  REQUIRE(qr["rows"].size() == 1);
  CHECK(qr["rows"][0]["url"] == "https://site.example/page-1");
  CHECK(qr["evidence"]["flag"] == "VALID");
  CHECK(medusa_query(api.c, "main", "web01", "hunter2", R"({"filter":"NOPE"})", nullptr) ==
        MEDUSA_E_USAGE);

  CStr rep;
  CHECK(medusa_verify(api.c, "main", &rep.p) == MEDUSA_OK);
  CHECK(parse_canonical(rep.str())["ok"] == true);

  CStr block;
  CHECK(medusa_block_show(api.c, "main", 0, &block.p) == MEDUSA_OK);
  CHECK(parse_canonical(block.str()).contains("header"));
  CHECK(medusa_block_show(api.c, "main", 99, nullptr) == MEDUSA_E_NOTFOUND);
  CHECK(medusa_block_show(api.c, "ghost", 0, nullptr) == MEDUSA_E_NOTFOUND);

  CStr exported;
  CHECK(medusa_registry_export(api.c, "main", &exported.p) == MEDUSA_OK);
  CHECK(exported.str().find("web01") != std::string::npos);
  CHECK(exported.str().find("hunter2") == std::string::npos);

  CStr chans;
  CHECK(medusa_list_channels(api.c, &chans.p) == MEDUSA_OK);
  CHECK(chans.str() == R"(["main"])");
}

TEST_CASE("capi: operator config endpoint") {
  CApi api;
  CStr got;
  REQUIRE(medusa_config_get(api.c, &got.p) == MEDUSA_OK);
  CHECK(got.str() == R"({"default_channel":"","output_format":"table"})");

  REQUIRE(medusa_config_set(api.c, R"({"default_channel":"main"})") == MEDUSA_OK);
  REQUIRE(medusa_config_set(api.c, R"({"output_format":"canonical"})") == MEDUSA_OK);
  CStr after;
  REQUIRE(medusa_config_get(api.c, &after.p) == MEDUSA_OK);
  CHECK(after.str() == R"({"default_channel":"main","output_format":"canonical"})");

  CHECK(medusa_config_set(api.c, R"({"output_format":"yaml"})") == MEDUSA_E_USAGE);
  CHECK(medusa_config_set(api.c, R"({"colour":"on"})") == MEDUSA_E_USAGE);
  CHECK(medusa_config_set(api.c, nullptr) == MEDUSA_E_USAGE);
}

TEST_CASE("capi: tampering surfaces as E_VERIFY with the report attached") {
  CApi api;
  REQUIRE(medusa_channel_create(api.c, "main", "eov", 1, 1, 8, 100) == MEDUSA_OK);
  REQUIRE(medusa_datasource_register(api.c, "main", kDsJson, "pw") == MEDUSA_OK);
  REQUIRE(medusa_append(api.c, "main", "web01", "pw", weblog_json(1).c_str(), nullptr) ==
          MEDUSA_OK);

  std::string path = api.dir.file("data") + "/channels/main/blocks.dat";
  std::string bytes = slurp(path);
  size_t at = bytes.find("page-1");
  REQUIRE(at != std::string::npos);
  bytes[at] = 'q';
  spit(path, bytes);

  CStr rep;
  CHECK(medusa_verify(api.c, "main", &rep.p) == MEDUSA_E_VERIFY);
  cjson o = parse_canonical(rep.str());
  CHECK(o["ok"] == false);
  CHECK(o["first_bad_block"] == 2);
  CHECK(std::string(medusa_last_error(api.c)) != "");

  CHECK(medusa_append(api.c, "main", "web01", "pw", weblog_json(2).c_str(), nullptr) ==
        MEDUSA_E_VERIFY);
}

TEST_CASE("capi: simulation entry point") {
  const std::string scenario =
      R"({"seed":7,"peers":[{"peer_id":"p1","fault":"HONEST"},{"peer_id":"p2","fault":"HONEST"}],)"
      R"("channels":[{"channel_id":"c","pipeline":"eov","policy_k":1,"max_block_txs":4,)"
      R"("max_wait_ms":20,"members":["p1","p2"],"endorsers":["p1"],)"
      R"("workload":{"appends":3,"queries":1}}]})";

  CStr metrics, table, err;
  REQUIRE(medusa_simulate(scenario.c_str(), 0, &metrics.p, &table.p, &err.p) == MEDUSA_OK);
  CHECK(err.p == nullptr);
  cjson m = parse_canonical(metrics.str());
  CHECK(m["channels"]["c"]["committed_valid"] == 4);
  CHECK(table.str().find("channel c") != std::string::npos);

  CStr oe;
  REQUIRE(medusa_simulate(scenario.c_str(), 1, &oe.p, nullptr, nullptr) == MEDUSA_OK);
  cjson om = parse_canonical(oe.str());
  CHECK(om["channels"]["c"]["peer_exec_counts"]["p2"].get<uint64_t>() > 0);

  CStr bad_err;
  CHECK(medusa_simulate(R"({"seed":1})", 0, nullptr, nullptr, &bad_err.p) != MEDUSA_OK);
  CHECK(bad_err.str() != "");
  CStr null_err;
  CHECK(medusa_simulate(nullptr, 0, nullptr, nullptr, &null_err.p) == MEDUSA_E_USAGE);
  CHECK(null_err.str() == "null scenario");
}
