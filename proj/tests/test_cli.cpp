#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/file.h>
#include <sys/wait.h>
#include <fcntl.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <optional>

#include "medusa/canonical.hpp"
#include "testenv.hpp"

using namespace medusa;
using testenv::TempDir;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out);
  out << bytes;
}

std::string shq(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

using Env = std::vector<std::pair<std::string, std::string>>;

// driver: scrub every MEDUSA_* variable, apply the overrides, capture both
// streams and the exit code
struct CliRig {
  TempDir dir;
  std::string data = dir.file("data");
  int seq = 0;

  RunResult run(const std::vector<std::string>& args, const Env& env = {},
                const std::optional<std::string>& input = std::nullopt) {
    std::string out_path = dir.file("out" + std::to_string(seq));
    std::string err_path = dir.file("err" + std::to_string(seq));
    std::string in_path = dir.file("in" + std::to_string(seq));
    ++seq;

    std::string cmd =
        "env -u MEDUSA_PASSWORD -u MEDUSA_DATA_DIR -u MEDUSA_CHANNEL -u MEDUSA_FORMAT";
    for (const auto& [k, v] : env) cmd += " " + k + "=" + shq(v);
    cmd += " " + shq(MEDUSA_CLI_PATH);
    for (const auto& a : args) cmd += " " + shq(a);
    if (input) {
      spit(in_path, *input);
      cmd += " < " + shq(in_path);
    } else {
      cmd += " < /dev/null";
    }
    cmd += " > " + shq(out_path) + " 2> " + shq(err_path);

    int rc = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
  }

  Env base() { return {{"MEDUSA_DATA_DIR", data}}; }
  Env with_pw(const std::string& pw = "hunter2secret") {
    Env e = base();
    e.emplace_back("MEDUSA_PASSWORD", pw);
    return e;
  }

  // channel "main" (eov, 2-of-3) with datasource web01 registered
  void setup() {
    RunResult c = run({"channel", "create", "main", "--policy-k", "2", "--peers", "3"}, base());
    REQUIRE(c.code == 0);
    RunResult d = run({"--channel", "main", "datasource", "register", "web01", "--ip",
                       "10.0.0.1", "--port", "8080", "--username", "op", "--url",
                       "https://web01.example/logs"},
                      with_pw());
    REQUIRE(d.code == 0);
  }

  std::vector<std::string> append_args(int n) {
    return {"append",          "--channel",    "main",
            "--datasource",    "web01",        "--url",
            "/page-" + std::to_string(n),      "--ip",
            "10.1.2.3",        "--datetime",   std::to_string(1700000000000 + n),
            "--status",        "200",          "--user-agent",
            "agent/" + std::to_string(n)};
  }
};

}  // namespace

TEST_CASE("cli: channel create and list with distinct exit codes") {
  CliRig rig;
  RunResult r = rig.run({"channel", "create", "main", "--policy-k", "2", "--peers", "3"},
                        rig.base());
  CHECK(r.code == 0);
  CHECK(r.out == "created channel main\n");

  RunResult dup = rig.run({"channel", "create", "main"}, rig.base());
  CHECK(dup.code == 2);
  CHECK(dup.err.find("conflict") != std::string::npos);
  CHECK(dup.err.find("already exists") != std::string::npos);

  RunResult pol = rig.run({"channel", "create", "weak", "--policy-k", "5", "--peers", "3"},
                          rig.base());
  CHECK(pol.code == 3);
  CHECK(pol.err.find("policy") != std::string::npos);

  RunResult list = rig.run({"channel", "list"}, rig.base());
  CHECK(list.code == 0);
  CHECK(list.out == "main\n");
  RunResult canon = rig.run({"channel", "list", "--format", "canonical"}, rig.base());
  CHECK(canon.out == "[\"main\"]\n");

  CHECK(rig.run({}, rig.base()).code == 1);
  CHECK(rig.run({"frobnicate"}, rig.base()).code == 1);
}

TEST_CASE("cli: append and query with the password from the environment") {
  CliRig rig;
  rig.setup();

  RunResult a = rig.run(rig.append_args(1), rig.with_pw());
  CHECK(a.code == 0);
  CHECK(a.out.find("committed ") == 0);
  CHECK(a.out.find("in block 2 (VALID, tx ") != std::string::npos);

  RunResult dup = rig.run(rig.append_args(1), rig.with_pw());
  CHECK(dup.code == 2);
  CHECK(dup.err.find("conflict") != std::string::npos);

  RunResult bad_pw = rig.run(rig.append_args(2), rig.with_pw("wrong"));
  CHECK(bad_pw.code == 4);
  CHECK(bad_pw.err.find("auth") != std::string::npos);

  RunResult bad_status = rig.run({"append", "--channel", "main", "--datasource", "web01",
                                  "--url", "/x", "--ip", "10.1.2.3", "--datetime", "5",
                                  "--status", "99", "--user-agent", "UA"},
                                 rig.with_pw());
  CHECK(bad_status.code == 1);

  RunResult q = rig.run({"query", "--channel", "main", "--datasource", "web01", "--ip",
                         "10.1.2.3"},
                        rig.with_pw());
  CHECK(q.code == 0);
  cjson row = parse_canonical(q.out.substr(0, q.out.find('\n')));
  CHECK(row["url"] == "/page-1");
  CHECK(q.err.find("1 records, evidence in block 3") != std::string::npos);

  RunResult qc = rig.run({"query", "--channel", "main", "--datasource", "web01", "--format",
                          "canonical"},
                         rig.with_pw());
  cjson doc = parse_canonical(qc.out);
  CHECK(doc["rows"].size() == 1);
  CHECK(doc["evidence"]["flag"] == "VALID");

  // --from without --to is a parse error, not a query
  CHECK(rig.run({"query", "--channel", "main", "--datasource", "web01", "--from", "0"},
                rig.with_pw())
            .code == 1);
}

TEST_CASE("cli: password arrives over stdin when the environment has none") {
  CliRig rig;
  rig.setup();

  RunResult ok = rig.run(rig.append_args(1), rig.base(), "hunter2secret\n");
  CHECK(ok.code == 0);
  RunResult wrong = rig.run(rig.append_args(2), rig.base(), "nope\n");
  CHECK(wrong.code == 4);
  // no password anywhere: authenticates with empty string and fails
  RunResult none = rig.run(rig.append_args(3), rig.base());
  CHECK(none.code == 4);
}

TEST_CASE("cli: environment beats flags, flags beat stored config") {
  CliRig rig;
  rig.setup();

  // MEDUSA_CHANNEL wins over a bogus --channel flag
  Env env = rig.base();
  env.emplace_back("MEDUSA_CHANNEL", "main");
  CHECK(rig.run({"verify", "--channel", "ghost"}, env).code == 0);
  // flag alone resolves the missing channel and fails
  RunResult ghost = rig.run({"verify", "--channel", "ghost"}, rig.base());
  CHECK(ghost.code == 1);
  CHECK(ghost.err.find("notfound") != std::string::npos);

  // MEDUSA_FORMAT wins over --format
  Env fmt = rig.base();
  fmt.emplace_back("MEDUSA_FORMAT", "canonical");
  RunResult v = rig.run({"verify", "--channel", "main", "--format", "table"}, fmt);
  CHECK(v.code == 0);
  CHECK(parse_canonical(v.out)["ok"] == true);

  // MEDUSA_DATA_DIR wins over --data-dir: the flag directory is never created
  Env dd = rig.base();
  RunResult via_env = rig.run({"verify", "--channel", "main", "--data-dir",
                               rig.dir.file("never")},
                              dd);
  CHECK(via_env.code == 0);
  CHECK(!std::filesystem::exists(rig.dir.file("never")));

  // with no flag and no env the stored default_channel applies
  CHECK(rig.run({"config", "set", "--default-channel", "main"}, rig.base()).code == 0);
  CHECK(rig.run({"verify"}, rig.base()).code == 0);

  RunResult none = rig.run({"verify"}, {{"MEDUSA_DATA_DIR", rig.dir.file("empty")}});
  CHECK(none.code == 1);
  CHECK(none.err.find("no channel") != std::string::npos);
}

TEST_CASE("cli: stored config round-trips and rejects junk") {
  CliRig rig;
  RunResult before = rig.run({"config", "get"}, rig.base());
  CHECK(before.code == 0);
  CHECK(before.out == "{\"default_channel\":\"\",\"output_format\":\"table\"}\n");

  CHECK(rig.run({"config", "set", "--output-format", "canonical"}, rig.base()).code == 0);
  RunResult after = rig.run({"config", "get"}, rig.base());
  CHECK(after.out.find("\"output_format\":\"canonical\"") != std::string::npos);

  CHECK(rig.run({"config", "set", "--output-format", "yaml"}, rig.base()).code == 1);
  // config now defaults the output format: channel list prints canonical
  rig.run({"channel", "create", "main"}, rig.base());
  CHECK(rig.run({"channel", "list"}, rig.base()).out == "[\"main\"]\n");
}

TEST_CASE("cli: verify prints the earliest tampered block and exits 4") {
  CliRig rig;
  rig.setup();
  REQUIRE(rig.run(rig.append_args(1), rig.with_pw()).code == 0);

  RunResult ok = rig.run({"verify", "--channel", "main"}, rig.base());
  CHECK(ok.code == 0);
  CHECK(ok.out == "ok\n");

  std::string blocks = rig.data + "/channels/main/blocks.dat";
  std::string bytes = slurp(blocks);
  size_t at = bytes.find("page-1");
  REQUIRE(at != std::string::npos);
  bytes[at] = 'q';
  spit(blocks, bytes);

  RunResult bad = rig.run({"verify", "--channel", "main"}, rig.base());
  CHECK(bad.code == 4);
  CHECK(bad.out.find("TAMPERED first_bad_block=2") == 0);

  RunResult canon = rig.run({"verify", "--channel", "main", "--format", "canonical"},
                            rig.base());
  CHECK(canon.code == 4);
  cjson rep = parse_canonical(canon.out);
  CHECK(rep["ok"] == false);
  CHECK(rep["first_bad_block"] == 2);
}

TEST_CASE("cli: block show prints canonical bytes by number") {
  CliRig rig;
  rig.setup();
  RunResult b0 = rig.run({"block", "show", "0", "--channel", "main"}, rig.base());
  CHECK(b0.code == 0);
  cjson block = parse_canonical(b0.out);
  CHECK(block["header"]["block_number"] == 0);

  RunResult missing = rig.run({"block", "show", "99", "--channel", "main"}, rig.base());
  CHECK(missing.code == 1);
  CHECK(missing.err.find("notfound") != std::string::npos);
}

TEST_CASE("cli: ingest reports counts on stdout and failures on stderr") {
  CliRig rig;
  rig.setup();
  const std::string good1 =
      R"(10.0.0.1 - - [10/Oct/2000:13:55:36 -0700] "GET /a HTTP/1.0" 200 23 "-" "UA")";
  const std::string good2 =
      R"(10.0.0.2 - - [10/Oct/2000:13:55:37 -0700] "GET /b HTTP/1.0" 200 23 "-" "UA")";
  std::string log = rig.dir.file("access.log");
  spit(log, good1 + "\n" + good2 + "\n" + good1 + "\nnot a log line\n");

  RunResult r = rig.run({"ingest", log, "--channel", "main", "--datasource", "web01",
                         "--batch-size", "2"},
                        rig.with_pw());
  CHECK(r.code == 0);
  CHECK(r.out.find("lines_read 4") != std::string::npos);
  CHECK(r.out.find("committed_valid 2") != std::string::npos);
  CHECK(r.out.find("rejected_duplicates 1") != std::string::npos);
  CHECK(r.err.find("line 4: ") != std::string::npos);

  RunResult canon = rig.run({"ingest", log, "--channel", "main", "--datasource", "web01",
                             "--format", "canonical"},
                            rig.with_pw());
  CHECK(canon.code == 0);
  cjson rep = parse_canonical(canon.out);
  CHECK(rep["lines_read"] == 4);

  RunResult gone = rig.run({"ingest", rig.dir.file("nope.log"), "--channel", "main",
                            "--datasource", "web01"},
                           rig.with_pw());
  CHECK(gone.code == 5);
  CHECK(gone.err.find("io") != std::string::npos);
}

TEST_CASE("cli: datasource export keeps secrets out") {
  CliRig rig;
  rig.setup();
  RunResult r = rig.run({"datasource", "export", "--channel", "main"}, rig.base());
  CHECK(r.code == 0);
  CHECK(r.out.find("web01") != std::string::npos);
  CHECK(r.out.find("password_digest") != std::string::npos);
  CHECK(r.out.find("hunter2secret") == std::string::npos);
  std::string seed_hex = slurp(rig.data + "/keys/main/web01.key");
  while (!seed_hex.empty() && seed_hex.back() == '\n') seed_hex.pop_back();
  CHECK(r.out.find(seed_hex) == std::string::npos);
}

TEST_CASE("cli: a busy data directory exits 5 without waiting") {
  CliRig rig;
  rig.setup();
  int fd = ::open((rig.data + "/.lock").c_str(), O_CREAT | O_RDWR, 0644);
  REQUIRE(fd >= 0);
  REQUIRE(::flock(fd, LOCK_EX | LOCK_NB) == 0);

  RunResult r = rig.run({"verify", "--channel", "main"}, rig.base());
  CHECK(r.code == 5);
  CHECK(r.err.find("io") != std::string::npos);

  ::flock(fd, LOCK_UN);
  ::close(fd);
  CHECK(rig.run({"verify", "--channel", "main"}, rig.base()).code == 0);
}

TEST_CASE("cli: simulate renders a table or the metrics document") {
  CliRig rig;
  const std::string scenario =
      R"({"seed":7,"peers":[{"peer_id":"p1","fault":"HONEST"},{"peer_id":"p2","fault":"HONEST"}],)"
      R"("channels":[{"channel_id":"c","pipeline":"eov","policy_k":1,"max_block_txs":4,)"
      R"("max_wait_ms":20,"members":["p1","p2"],"endorsers":["p1"],)"
      R"("workload":{"appends":3,"queries":1}}]})";
  std::string path = rig.dir.file("scenario.json");
  spit(path, scenario);

  RunResult table = rig.run({"simulate", path}, rig.base());
  CHECK(table.code == 0);
  CHECK(table.out.find("channel c") != std::string::npos);
  CHECK(table.out.find("(match)") != std::string::npos);

  std::string metrics_path = rig.dir.file("metrics.json");
  RunResult canon = rig.run({"simulate", path, "--format", "canonical", "--metrics-out",
                             metrics_path},
                            rig.base());
  CHECK(canon.code == 0);
  cjson m = parse_canonical(canon.out);
  CHECK(m["channels"]["c"]["committed_valid"] == 4);
  CHECK(parse_canonical(slurp(metrics_path)) == m);

  CHECK(rig.run({"simulate", path, "--order-execute"}, rig.base()).code == 0);

  std::string bad = rig.dir.file("bad.json");
  spit(bad, R"({"seed":1})");
  RunResult broken = rig.run({"simulate", bad}, rig.base());
  CHECK(broken.code == 1);
  CHECK(broken.err.find("medusa:") == 0);
  CHECK(rig.run({"simulate", rig.dir.file("missing.json")}, rig.base()).code == 5);
}
