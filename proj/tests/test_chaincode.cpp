#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "medusa/chaincode.hpp"
#include "medusa/identity.hpp"
#include "medusa/sha256.hpp"
#include "testenv.hpp"

using namespace medusa;
using namespace medusa::chaincode;

static WebLogData sample(uint64_t n) { return testenv::sample_weblog(n); }

static void seed_participant(state::WorldState& w, const std::string& id) {
  Rng rng(1234);
  identity::Registry reg;
  identity::DataSource ds{id, "10.9.9.9", 1111, "u", "https://" + id + ".example/"};
  reg.register_datasource(ds, "pw", rng);
  w[identity::participant_key(id)] = {identity::encode_participant_record(*reg.find(id)), {0, 0}};
}

static state::WorldState committed_corpus(size_t n, uint64_t seed = 1) {
  state::WorldState w;
  Rng rng(seed);
  for (size_t i = 0; i < n; ++i) {
    WebLogData rec = sample(seed * 1000 + i);
    rec.datetime_ms = 1700000000000 + rng.below(1000) * 1000;  // force datetime ties
    rec.asset_id = derive_asset_id(rec);
    w[weblog_key(rec.asset_id)] = {encode_weblog(rec), {1, static_cast<uint32_t>(i)}};
  }
  return w;
}

TEST_CASE("weblog codec round-trips and is canonical") {
  WebLogData w = sample(42);
  Bytes enc = encode_weblog(w);
  CHECK(decode_weblog(enc) == w);
  CHECK(encode_weblog(decode_weblog(enc)) == enc);
  // documented field order
  CHECK(enc.find("\"asset_id\"") < enc.find("\"url\""));
  CHECK(enc.find("\"url\"") < enc.find("\"referer\""));
  CHECK(enc.find("\"referer\"") < enc.find("\"returnCode\""));
  CHECK(enc.find("\"returnCode\"") < enc.find("\"userAgent\""));
  CHECK(enc.find("\"userAgent\"") < enc.find("\"datetime\""));
  CHECK(enc.find("\"datetime\"") < enc.find("\"ip\""));

  CHECK_THROWS_AS(decode_weblog("{}"), Error);
  CHECK_THROWS_AS(decode_weblog(enc + "x"), Error);
}

TEST_CASE("weblog validation enforces the field invariants") {
  CHECK_NOTHROW(validate_weblog(sample(1)));

  WebLogData w = sample(1);
  w.return_code = 99;
  CHECK_THROWS_AS(validate_weblog(w), Error);
  w.return_code = 600;
  CHECK_THROWS_AS(validate_weblog(w), Error);

  w = sample(1);
  w.ip = "333.1.1.1";
  CHECK_THROWS_AS(validate_weblog(w), Error);

  w = sample(1);
  w.datetime_ms = -5;
  CHECK_THROWS_AS(validate_weblog(w), Error);
  w.datetime_ms = kMaxDatetimeMs + 1;
  CHECK_THROWS_AS(validate_weblog(w), Error);
  w.datetime_ms = kMaxDatetimeMs;
  CHECK_NOTHROW(validate_weblog(w));

  w = sample(1);
  w.asset_id = "";
  CHECK_THROWS_AS(validate_weblog(w), Error);
  w.asset_id = "tab\tid";
  CHECK_THROWS_AS(validate_weblog(w), Error);

  w = sample(1);
  w.url = std::string("\xff\x01");
  CHECK_THROWS_AS(validate_weblog(w), Error);

  w = sample(1);
  w.referer = "";  // sentinel "-" maps to empty, which is legal
  CHECK_NOTHROW(validate_weblog(w));
}

TEST_CASE("derive_asset_id is content-addressed and ignores any preset id") {
  WebLogData a = sample(7);
  WebLogData b = a;
  b.asset_id = "something-else";
  CHECK(derive_asset_id(a) == derive_asset_id(b));
  CHECK(derive_asset_id(a).size() == 32);
  for (char c : derive_asset_id(a)) CHECK(std::string("0123456789abcdef").find(c) != std::string::npos);

  b = a;
  b.url += "x";
  CHECK(derive_asset_id(a) != derive_asset_id(b));

  WebLogData blank = a;
  blank.asset_id.clear();
  Bytes canon = encode_weblog(blank);
  CHECK(derive_asset_id(a) == to_hex(sha256(canon)).substr(0, 32));
}

TEST_CASE("query spec codec round-trips every filter") {
  QuerySpec all;
  CHECK(decode_query_spec(encode_query_spec(all)).filter == QuerySpec::Filter::ALL);

  QuerySpec ip;
  ip.filter = QuerySpec::Filter::BY_IP;
  ip.ip = "10.0.0.9";
  QuerySpec back = decode_query_spec(encode_query_spec(ip));
  CHECK(back.filter == QuerySpec::Filter::BY_IP);
  CHECK(back.ip == "10.0.0.9");

  QuerySpec ua;
  ua.filter = QuerySpec::Filter::BY_USER_AGENT;
  ua.user_agent = "curl/8";
  back = decode_query_spec(encode_query_spec(ua));
  CHECK(back.user_agent == "curl/8");

  QuerySpec range;
  range.filter = QuerySpec::Filter::BY_DATETIME_RANGE;
  range.from_ms = 100;
  range.to_ms = 200;
  back = decode_query_spec(encode_query_spec(range));
  CHECK(back.from_ms == 100);
  CHECK(back.to_ms == 200);

  CHECK_THROWS_AS(decode_query_spec("{\"filter\":\"BY_COLOR\"}"), Error);
  CHECK_THROWS_AS(decode_query_spec("{}"), Error);
  QuerySpec badrange = range;
  badrange.to_ms = 99;  // to < from
  CHECK_THROWS_AS(decode_query_spec(encode_query_spec(badrange)), Error);
}

TEST_CASE("query matching honors filters; range is [from, to)") {
  WebLogData w = sample(3);
  w.datetime_ms = 150;

  QuerySpec all;
  CHECK(all.matches(w));

  QuerySpec ip;
  ip.filter = QuerySpec::Filter::BY_IP;
  ip.ip = w.ip;
  CHECK(ip.matches(w));
  ip.ip = "9.9.9.9";
  CHECK(!ip.matches(w));

  QuerySpec range;
  range.filter = QuerySpec::Filter::BY_DATETIME_RANGE;
  range.from_ms = 150;
  range.to_ms = 151;
  CHECK(range.matches(w));
  range.from_ms = 151;
  range.to_ms = 300;
  CHECK(!range.matches(w));  // from is inclusive, 150 < 151
  range.from_ms = 100;
  range.to_ms = 150;
  CHECK(!range.matches(w));  // to is exclusive
}

TEST_CASE("dispatch table exposes exactly the append and query families") {
  const auto& table = dispatch_table();
  REQUIRE(table.size() == 2);
  CHECK(table.count(tx::kFnDataAppend) == 1);
  CHECK(table.count(tx::kFnSelectWebLogData) == 1);
  CHECK(!is_system_function(tx::kFnDataAppend));
  CHECK(is_system_function(tx::kFnRegisterDataSource));
  CHECK(is_system_function(tx::kFnConfigChannel));
  CHECK(table.count(tx::kFnRegisterDataSource) == 0);
  CHECK(table.count(tx::kFnConfigChannel) == 0);
}

TEST_CASE("unknown or mutating function names never touch state") {
  state::WorldState w = committed_corpus(5);
  Digest32 before = state::state_digest(w);
  state::MapStateView view(w);
  ExecContext ctx{"ds1"};

  for (const char* fn : {"UpdateWebLogData", "DeleteWebLogData", "Put", "delete", "",
                         "dataappend", "DataAppend ", "selectweblogdata", "drop table"}) {
    ExecOutcome out = dispatch(view, ctx, fn, {"{}"});
    CHECK(out.error == ErrorCode::UnknownFunction);
    CHECK(out.write_set.empty());
  }
  CHECK(state::state_digest(w) == before);
}

TEST_CASE("DataAppend writes the asset and proves prior absence") {
  state::WorldState w;
  seed_participant(w, "ds1");
  state::MapStateView view(w);
  WebLogData rec = sample(10);
  ExecOutcome out = on_data_append(view, ExecContext{"ds1"}, rec);
  REQUIRE(out.ok());
  REQUIRE(out.write_set.size() == 1);
  CHECK(out.write_set[0].key == weblog_key(rec.asset_id));
  CHECK(decode_weblog(out.write_set[0].value) == rec);
  REQUIRE(out.read_set.size() == 1);
  CHECK(out.read_set[0].key == weblog_key(rec.asset_id));
  CHECK(!out.read_set[0].version.has_value());  // absence proof

  // same append against a state that already has it -> DuplicateAsset
  w[weblog_key(rec.asset_id)] = {encode_weblog(rec), {2, 0}};
  ExecOutcome dup = on_data_append(view, ExecContext{"ds1"}, rec);
  CHECK(dup.error == ErrorCode::DuplicateAsset);
  CHECK(dup.write_set.empty());

  WebLogData bad = sample(11);
  bad.return_code = 42;
  ExecOutcome invalid = on_data_append(view, ExecContext{"ds1"}, bad);
  CHECK(invalid.error == ErrorCode::InvalidAsset);

  ExecOutcome unreg = on_data_append(view, ExecContext{"ghost"}, sample(13));
  CHECK(unreg.error == ErrorCode::UnregisteredSubmitter);
}

TEST_CASE("DataAppend through dispatch parses args and rejects blank ids") {
  state::WorldState w;
  seed_participant(w, "ds1");
  state::MapStateView view(w);
  WebLogData rec = sample(12);

  ExecOutcome out = dispatch(view, ExecContext{"ds1"}, tx::kFnDataAppend, {encode_weblog(rec)});
  REQUIRE(out.ok());
  CHECK(out.write_set[0].key == weblog_key(rec.asset_id));

  // id derivation is the submitting side's job; the chaincode wants it set
  WebLogData blank = rec;
  blank.asset_id.clear();
  CHECK(dispatch(view, ExecContext{"ds1"}, tx::kFnDataAppend, {encode_weblog(blank)}).error ==
        ErrorCode::InvalidAsset);

  CHECK(dispatch(view, ExecContext{"ds1"}, tx::kFnDataAppend, {}).error != ErrorCode::None);
  CHECK(dispatch(view, ExecContext{"ds1"}, tx::kFnDataAppend, {"not json"}).error ==
        ErrorCode::DecodeError);
  CHECK(dispatch(view, ExecContext{"ds1"}, tx::kFnDataAppend, {"{}", "extra"}).error !=
        ErrorCode::None);
}

TEST_CASE("select_weblog equals a brute-force scan, ordered by (datetime, asset_id)") {
  state::WorldState w = committed_corpus(300, 5);
  state::MapStateView view(w);
  Rng rng(99);

  std::vector<WebLogData> corpus;
  for (const auto& [k, e] : w) corpus.push_back(decode_weblog(e.value));

  auto brute = [&](const QuerySpec& q) {
    std::vector<WebLogData> out;
    for (const auto& rec : corpus)
      if (q.matches(rec)) out.push_back(rec);
    std::stable_sort(out.begin(), out.end(), [](const WebLogData& a, const WebLogData& b) {
      if (a.datetime_ms != b.datetime_ms) return a.datetime_ms < b.datetime_ms;
      return a.asset_id < b.asset_id;
    });
    return out;
  };

  std::vector<QuerySpec> specs;
  specs.emplace_back();
  for (int i = 0; i < 20; ++i) {
    QuerySpec q;
    switch (rng.below(3)) {
      case 0:
        q.filter = QuerySpec::Filter::BY_IP;
        q.ip = corpus[rng.below(corpus.size())].ip;
        break;
      case 1:
        q.filter = QuerySpec::Filter::BY_USER_AGENT;
        q.user_agent = "agent/" + std::to_string(rng.below(6));  // sometimes matches nothing
        break;
      default:
        q.filter = QuerySpec::Filter::BY_DATETIME_RANGE;
        q.from_ms = 1700000000000 + static_cast<int64_t>(rng.below(1000)) * 1000;
        q.to_ms = q.from_ms + static_cast<int64_t>(rng.below(500)) * 1000 + 1;
        break;
    }
    specs.push_back(q);
  }

  for (const QuerySpec& q : specs) {
    std::vector<WebLogData> got = select_weblog(view, q);
    CHECK(got == brute(q));
  }
}

TEST_CASE("select_weblog sees overlay writes and ignores foreign keys") {
  state::WorldState w = committed_corpus(3, 6);
  w["participant:ds1"] = {"not a weblog", {0, 1}};
  state::MapStateView base(w);
  state::OverlayStateView ov(base);
  WebLogData fresh = sample(777);
  ov.put(weblog_key(fresh.asset_id), {encode_weblog(fresh), {9, 0}});

  std::vector<WebLogData> rows = select_weblog(ov, QuerySpec{});
  CHECK(rows.size() == 4);
  CHECK(std::count_if(rows.begin(), rows.end(),
                      [&](const WebLogData& r) { return r.asset_id == fresh.asset_id; }) == 1);
}

TEST_CASE("selectWebLogData through dispatch returns canonical rows and no writes") {
  state::WorldState w = committed_corpus(10, 7);
  state::MapStateView view(w);
  QuerySpec all;
  ExecOutcome out =
      dispatch(view, ExecContext{"ds1"}, tx::kFnSelectWebLogData, {encode_query_spec(all)});
  REQUIRE(out.ok());
  CHECK(out.write_set.empty());
  CHECK(!out.read_set.empty());  // matched rows are the read evidence
  std::vector<WebLogData> rows = decode_weblog_list(out.response);
  CHECK(rows == select_weblog(view, all));
  CHECK(encode_weblog_list(rows) == out.response);
}

TEST_CASE("system functions run only through execute_any, not dispatch") {
  state::WorldState w;
  state::MapStateView view(w);
  Rng rng(8);
  identity::Registry reg;
  identity::DataSource ds{"ds9", "10.0.0.9", 9999, "u", "https://ds9.example/"};
  reg.register_datasource(ds, "pw", rng);
  Bytes record = identity::encode_participant_record(*reg.find("ds9"));

  CHECK(dispatch(view, ExecContext{"ds9"}, tx::kFnRegisterDataSource, {record}).error ==
        ErrorCode::UnknownFunction);

  ExecOutcome out = execute_any(view, ExecContext{"ds9"}, tx::kFnRegisterDataSource, {record});
  REQUIRE(out.ok());
  REQUIRE(out.write_set.size() == 1);
  CHECK(out.write_set[0].key == identity::participant_key("ds9"));

  // registering on top of an existing record fails
  w[identity::participant_key("ds9")] = {record, {1, 0}};
  CHECK(execute_any(view, ExecContext{"ds9"}, tx::kFnRegisterDataSource, {record}).error ==
        ErrorCode::DuplicateParticipant);

  // submitter must be the registered id
  CHECK(execute_any(view, ExecContext{"impostor"}, tx::kFnRegisterDataSource, {record}).error !=
        ErrorCode::None);
}

TEST_CASE("weblog list codec round-trips empty and many") {
  CHECK(decode_weblog_list(encode_weblog_list({})).empty());
  std::vector<WebLogData> rows{sample(1), sample(2), sample(3)};
  CHECK(decode_weblog_list(encode_weblog_list(rows)) == rows);
  CHECK_THROWS_AS(decode_weblog_list("{\"rows\":1}"), Error);
}
