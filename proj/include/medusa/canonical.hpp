#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "medusa/errors.hpp"

namespace medusa {

// Canonical encoding = UTF-8 JSON with object keys emitted in a fixed
// documented order, no insignificant whitespace, integers base-10, byte
// fields lowercase hex. Encoders insert keys in the documented order and
// dump() without indentation; those bytes are what gets hashed and signed.
using cjson = nlohmann::ordered_json;

// Strict decode helpers. Every decoder checks the exact key set so a stored
// record with a mutated or missing key fails loudly.

cjson parse_canonical(std::string_view bytes);

void check_exact_keys(const cjson& obj, std::initializer_list<const char*> keys);

// Key set must contain all of `required` and nothing outside required+optional.
void check_keys(const cjson& obj, std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional);

const cjson& need(const cjson& obj, const char* key);

std::string need_string(const cjson& obj, const char* key);
uint64_t need_u64(const cjson& obj, const char* key);
uint32_t need_u32(const cjson& obj, const char* key);
bool need_bool(const cjson& obj, const char* key);
const cjson& need_array(const cjson& obj, const char* key);
const cjson& need_object(const cjson& obj, const char* key);

std::string dump_canonical(const cjson& value);

}  // namespace medusa
