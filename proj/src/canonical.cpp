#include "medusa/canonical.hpp"

namespace medusa {

cjson parse_canonical(std::string_view bytes) {
  // allow_exceptions=false, then convert: callers deal in medusa errors.
  cjson v = cjson::parse(bytes, nullptr, false);
  if (v.is_discarded()) raise(ErrorCode::DecodeError, "malformed canonical text");
  return v;
}

void check_exact_keys(const cjson& obj, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) raise(ErrorCode::DecodeError, "expected object");
  if (obj.size() != keys.size()) raise(ErrorCode::DecodeError, "unexpected key count");
  for (const char* k : keys) {
    if (!obj.contains(k)) raise(ErrorCode::DecodeError, std::string("missing key ") + k);
  }
}

void check_keys(const cjson& obj, std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional) {
  if (!obj.is_object()) raise(ErrorCode::DecodeError, "expected object");
  for (const char* k : required) {
    if (!obj.contains(k)) raise(ErrorCode::DecodeError, std::string("missing key ") + k);
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string& k = it.key();
    auto known = [&](std::initializer_list<const char*> set) {
      for (const char* s : set)
        if (k == s) return true;
      return false;
    };
    if (!known(required) && !known(optional))
      raise(ErrorCode::DecodeError, "unexpected key " + k);
  }
}

const cjson& need(const cjson& obj, const char* key) {
  if (!obj.is_object()) raise(ErrorCode::DecodeError, "expected object");
  auto it = obj.find(key);
  if (it == obj.end()) raise(ErrorCode::DecodeError, std::string("missing key ") + key);
  return *it;
}

std::string need_string(const cjson& obj, const char* key) {
  const cjson& v = need(obj, key);
  if (!v.is_string()) raise(ErrorCode::DecodeError, std::string(key) + " must be a string");
  return v.get<std::string>();
}

uint64_t need_u64(const cjson& obj, const char* key) {
  const cjson& v = need(obj, key);
  if (!v.is_number_unsigned())
    raise(ErrorCode::DecodeError, std::string(key) + " must be a non-negative integer");
  return v.get<uint64_t>();
}

uint32_t need_u32(const cjson& obj, const char* key) {
  uint64_t v = need_u64(obj, key);
  if (v > UINT32_MAX) raise(ErrorCode::DecodeError, std::string(key) + " out of range");
  return static_cast<uint32_t>(v);
}

bool need_bool(const cjson& obj, const char* key) {
  const cjson& v = need(obj, key);
  if (!v.is_boolean()) raise(ErrorCode::DecodeError, std::string(key) + " must be a boolean");
  return v.get<bool>();
}

const cjson& need_array(const cjson& obj, const char* key) {
  const cjson& v = need(obj, key);
  if (!v.is_array()) raise(ErrorCode::DecodeError, std::string(key) + " must be an array");
  return v;
}

const cjson& need_object(const cjson& obj, const char* key) {
  const cjson& v = need(obj, key);
  if (!v.is_object()) raise(ErrorCode::DecodeError, std::string(key) + " must be an object");
  return v;
}

std::string dump_canonical(const cjson& value) { return value.dump(); }

}  // namespace medusa
