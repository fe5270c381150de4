#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <openssl/evp.h>

#include "medusa/bytes.hpp"
#include "medusa/canonical.hpp"
#include "medusa/errors.hpp"
#include "medusa/rng.hpp"
#include "medusa/sha256.hpp"
#include "medusa/state.hpp"

using namespace medusa;

// Independent digest oracle: OpenSSL, against the libsodium-backed sha256().
static Digest32 openssl_sha256(std::string_view bytes) {
  Digest32 out{};
  unsigned int n = 0;
  EVP_Digest(bytes.data(), bytes.size(), out.data(), &n, EVP_sha256(), nullptr);
  REQUIRE(n == 32);
  return out;
}

TEST_CASE("sha256 matches the OpenSSL oracle on fixed and random inputs") {
  CHECK(to_hex(sha256("")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(to_hex(sha256("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    std::string s = rng.bytes(rng.below(4096));
    CHECK(sha256(s) == openssl_sha256(s));
  }
}

TEST_CASE("streaming sha256 equals one-shot over arbitrary splits") {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    std::string s = rng.bytes(1 + rng.below(2048));
    Sha256 h;
    size_t pos = 0;
    while (pos < s.size()) {
      size_t take = 1 + rng.below(s.size() - pos);
      h.update(std::string_view(s).substr(pos, take));
      pos += take;
    }
    CHECK(h.finish() == sha256(s));
  }
}

TEST_CASE("hex round-trips and rejects malformed input") {
  CHECK(to_hex(std::string_view("\x00\xff\x10", 3)) == "00ff10");
  CHECK(from_hex("00ff10") == std::string("\x00\xff\x10", 3));
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    std::string s = rng.bytes(rng.below(64));
    CHECK(from_hex(to_hex(s)) == s);
  }
  CHECK_THROWS_AS(from_hex("abc"), Error);    // odd length
  CHECK_THROWS_AS(from_hex("AB"), Error);     // uppercase
  CHECK_THROWS_AS(from_hex("0g"), Error);     // non-hex
  CHECK_THROWS_AS((array_from_hex<32>("00")), Error);
  auto d = array_from_hex<4>("00ff10aa");
  CHECK(to_hex(d) == "00ff10aa");
}

TEST_CASE("utf-8 and ip-literal checks") {
  CHECK(is_valid_utf8("plain ascii"));
  CHECK(is_valid_utf8("\xc3\xa9\xe2\x82\xac\xf0\x9f\x8d\x80"));
  CHECK(!is_valid_utf8("\xff"));
  CHECK(!is_valid_utf8("\xc3"));            // truncated sequence
  CHECK(!is_valid_utf8("\xe2\x82"));        // truncated sequence
  CHECK(!is_valid_utf8("\xc0\xaf"));        // overlong
  CHECK(is_ip_literal("10.0.0.1"));
  CHECK(is_ip_literal("::1"));
  CHECK(is_ip_literal("2001:db8::5"));
  CHECK(!is_ip_literal("10.0.0.256"));
  CHECK(!is_ip_literal("example.com"));
  CHECK(!is_ip_literal(""));
}

TEST_CASE("canonical json: no whitespace, insertion order preserved, strict parse") {
  cjson o;
  o["b"] = 1;
  o["a"] = "x";
  o["nested"] = cjson::object();
  o["nested"]["k"] = cjson::array({1, 2});
  CHECK(dump_canonical(o) == R"({"b":1,"a":"x","nested":{"k":[1,2]}})");

  cjson back = parse_canonical(R"({"b":1,"a":"x"})");
  CHECK(need_u64(back, "b") == 1);
  CHECK(need_string(back, "a") == "x");
  CHECK_THROWS_AS(parse_canonical("{"), Error);
  CHECK_THROWS_AS(parse_canonical(""), Error);
  CHECK_THROWS_AS(parse_canonical("{}  trailing"), Error);
}

TEST_CASE("canonical json: key-set checks fail loudly") {
  cjson o = parse_canonical(R"({"a":1,"b":"s"})");
  CHECK_NOTHROW(check_exact_keys(o, {"a", "b"}));
  CHECK_THROWS_AS(check_exact_keys(o, {"a"}), Error);             // extra key
  CHECK_THROWS_AS(check_exact_keys(o, {"a", "b", "c"}), Error);   // missing key
  CHECK_NOTHROW(check_keys(o, {"a"}, {"b", "c"}));
  CHECK_THROWS_AS(check_keys(o, {"c"}, {"a", "b"}), Error);       // required absent
  CHECK_THROWS_AS(check_keys(o, {"a"}, {}), Error);               // b not allowed

  CHECK_THROWS_AS(need(o, "zz"), Error);
  CHECK_THROWS_AS(need_string(o, "a"), Error);   // wrong type
  CHECK_THROWS_AS(need_u64(o, "b"), Error);
  CHECK_THROWS_AS(need_array(o, "a"), Error);
  CHECK_THROWS_AS(need_object(o, "a"), Error);
}

TEST_CASE("need_u64/u32 reject negatives, floats and overflow") {
  cjson o = parse_canonical(R"({"neg":-1,"f":1.5,"big":4294967296,"ok":7})");
  CHECK(need_u64(o, "ok") == 7);
  CHECK(need_u32(o, "ok") == 7);
  CHECK_THROWS_AS(need_u64(o, "neg"), Error);
  CHECK_THROWS_AS(need_u64(o, "f"), Error);
  CHECK_THROWS_AS(need_u32(o, "big"), Error);
  CHECK(need_u64(o, "big") == 4294967296ull);
}

TEST_CASE("map view reads committed entries and iterates prefixes in key order") {
  state::WorldState w;
  w["weblog:b"] = {"2", {1, 0}};
  w["weblog:a"] = {"1", {1, 1}};
  w["participant:x"] = {"p", {0, 0}};
  state::MapStateView v(w);

  REQUIRE(v.get("weblog:a").has_value());
  CHECK(v.get("weblog:a")->value == "1");
  CHECK(v.get("weblog:a")->version == state::Version{1, 1});
  CHECK(!v.get("weblog:zz").has_value());

  std::vector<std::string> keys;
  v.for_each_prefix("weblog:", [&](const std::string& k, const state::Entry&) { keys.push_back(k); });
  CHECK(keys == std::vector<std::string>{"weblog:a", "weblog:b"});

  keys.clear();
  v.for_each_prefix("", [&](const std::string& k, const state::Entry&) { keys.push_back(k); });
  CHECK(keys.size() == 3);
}

TEST_CASE("overlay view shadows its base and keeps the delta separate") {
  state::WorldState w;
  w["k1"] = {"base", {1, 0}};
  w["k2"] = {"other", {1, 1}};
  state::MapStateView base(w);
  state::OverlayStateView ov(base);

  ov.put("k1", {"shadow", {2, 0}});
  ov.put("k3", {"fresh", {2, 1}});

  CHECK(ov.get("k1")->value == "shadow");
  CHECK(ov.get("k2")->value == "other");
  CHECK(ov.get("k3")->value == "fresh");
  CHECK(base.get("k1")->value == "base");   // base untouched
  CHECK(ov.delta().size() == 2);

  std::vector<std::string> keys;
  ov.for_each_prefix("k", [&](const std::string& k, const state::Entry&) { keys.push_back(k); });
  CHECK(keys == std::vector<std::string>{"k1", "k2", "k3"});   // merged, sorted, deduped
}

TEST_CASE("state digest is order-insensitive on input but version-sensitive") {
  state::WorldState a, b;
  a["x"] = {"1", {1, 0}};
  a["y"] = {"2", {1, 1}};
  b["y"] = {"2", {1, 1}};
  b["x"] = {"1", {1, 0}};
  CHECK(state::state_digest(a) == state::state_digest(b));

  b["x"].version = {1, 2};
  CHECK(state::state_digest(a) != state::state_digest(b));
  b["x"].version = {1, 0};
  b["x"].value = "9";
  CHECK(state::state_digest(a) != state::state_digest(b));
  CHECK(state::state_digest({}) != state::state_digest(a));
}

TEST_CASE("version ordering is lexicographic on (block, tx)") {
  CHECK(state::Version{1, 5} < state::Version{2, 0});
  CHECK(state::Version{2, 0} < state::Version{2, 1});
  CHECK(state::Version{2, 1} == state::Version{2, 1});
}

TEST_CASE("rng: below stays in range and is deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool diverged = false;
  for (int i = 0; i < 1000; ++i) {
    uint64_t x = a.next_u64();
    CHECK(x == b.next_u64());
    if (x != c.next_u64()) diverged = true;
  }
  CHECK(diverged);
  Rng r(1);
  for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
  for (int i = 0; i < 100; ++i) {
    int64_t v = r.range(-3, 3);
    CHECK(v >= -3);
    CHECK(v <= 3);
  }
  CHECK(!r.chance(0.0));
  CHECK(r.chance(1.0));
}
