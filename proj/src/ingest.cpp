#include "medusa/ingest.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "medusa/canonical.hpp"

namespace medusa::ingest {

namespace {

[[noreturn]] void parse_fail(size_t column, const std::string& reason) {
  raise(ErrorCode::ParseError, "column " + std::to_string(column + 1) + ": " + reason);
}

struct Cursor {
  std::string_view line;
  size_t pos = 0;

  bool done() const { return pos >= line.size(); }
  char peek() const { return line[pos]; }

  void expect_space() {
    if (done() || line[pos] != ' ') parse_fail(pos, "expected a space");
    ++pos;
  }

  std::string_view token() {
    size_t start = pos;
    while (!done() && line[pos] != ' ') ++pos;
    if (pos == start) parse_fail(start, "empty field");
    return line.substr(start, pos - start);
  }

  std::string bracketed() {
    if (done() || line[pos] != '[') parse_fail(pos, "expected '['");
    size_t start = ++pos;
    while (!done() && line[pos] != ']') ++pos;
    if (done()) parse_fail(start, "unclosed '['");
    std::string out(line.substr(start, pos - start));
    ++pos;
    return out;
  }

  std::string quoted(bool escapes) {
    if (done() || line[pos] != '"') parse_fail(pos, "expected '\"'");
    ++pos;
    std::string out;
    while (!done()) {
      char c = line[pos];
      if (escapes && c == '\\' && pos + 1 < line.size() &&
          (line[pos + 1] == '"' || line[pos + 1] == '\\')) {
        out.push_back(line[pos + 1]);
        pos += 2;
        continue;
      }
      if (c == '"') {
        ++pos;
        return out;
      }
      out.push_back(c);
      ++pos;
    }
    parse_fail(line.size(), "unbalanced quotes");
  }
};

int month_number(std::string_view name) {
  static const char* names[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  for (int i = 0; i < 12; ++i) {
    if (name == names[i]) return i + 1;
  }
  return 0;
}

uint64_t digits(std::string_view s, size_t& i, size_t count, const char* what) {
  if (i + count > s.size()) parse_fail(i, std::string("truncated ") + what);
  uint64_t v = 0;
  for (size_t k = 0; k < count; ++k) {
    char c = s[i + k];
    if (c < '0' || c > '9') parse_fail(i + k, std::string("non-numeric ") + what);
    v = v * 10 + static_cast<uint64_t>(c - '0');
  }
  i += count;
  return v;
}

void expect_char(std::string_view s, size_t& i, char c, const char* what) {
  if (i >= s.size() || s[i] != c) parse_fail(i, std::string("expected '") + c + "' in " + what);
  ++i;
}

}  // namespace

int64_t combined_datetime_ms(std::string_view text) {
  // dd/Mon/yyyy:HH:MM:SS +ZZZZ
  size_t i = 0;
  uint64_t day = digits(text, i, 2, "day");
  expect_char(text, i, '/', "date");
  if (i + 3 > text.size()) parse_fail(i, "truncated month");
  int month = month_number(text.substr(i, 3));
  if (month == 0) parse_fail(i, "invalid month name");
  i += 3;
  expect_char(text, i, '/', "date");
  uint64_t year = digits(text, i, 4, "year");
  expect_char(text, i, ':', "time");
  uint64_t hh = digits(text, i, 2, "hours");
  expect_char(text, i, ':', "time");
  uint64_t mm = digits(text, i, 2, "minutes");
  expect_char(text, i, ':', "time");
  uint64_t ss = digits(text, i, 2, "seconds");
  expect_char(text, i, ' ', "timezone");
  if (i >= text.size() || (text[i] != '+' && text[i] != '-'))
    parse_fail(i, "expected timezone sign");
  int sign = text[i] == '-' ? -1 : 1;
  ++i;
  uint64_t tz_h = digits(text, i, 2, "timezone hours");
  uint64_t tz_m = digits(text, i, 2, "timezone minutes");
  if (i != text.size()) parse_fail(i, "trailing characters in datetime");

  if (year < 1970 || year > 9999) parse_fail(0, "year out of range 1970..9999");
  if (hh > 23 || mm > 59 || ss > 59) parse_fail(0, "invalid time of day");
  if (tz_h > 23 || tz_m > 59) parse_fail(0, "invalid timezone offset");

  std::chrono::year_month_day ymd{std::chrono::year(static_cast<int>(year)),
                                  std::chrono::month(static_cast<unsigned>(month)),
                                  std::chrono::day(static_cast<unsigned>(day))};
  if (!ymd.ok()) parse_fail(0, "invalid calendar date");
  int64_t days = std::chrono::sys_days(ymd).time_since_epoch().count();
  int64_t civil_sec = days * 86400 + static_cast<int64_t>(hh) * 3600 +
                      static_cast<int64_t>(mm) * 60 + static_cast<int64_t>(ss);
  int64_t offset_sec = sign * (static_cast<int64_t>(tz_h) * 3600 + static_cast<int64_t>(tz_m) * 60);
  int64_t utc_ms = (civil_sec - offset_sec) * 1000;
  if (utc_ms < 0 || utc_ms > chaincode::kMaxDatetimeMs)
    parse_fail(0, "datetime outside the representable range");
  return utc_ms;
}

chaincode::WebLogData parse_combined_log_line(std::string_view line, bool escapes) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.empty()) parse_fail(0, "empty line");
  if (!is_valid_utf8(line)) parse_fail(0, "invalid UTF-8");

  Cursor cur{line};
  chaincode::WebLogData w;

  std::string_view host = cur.token();
  w.ip = std::string(host);
  if (!is_ip_literal(w.ip)) parse_fail(cur.pos - host.size(), "host is not an IP literal");
  cur.expect_space();
  cur.token();  // ident, discarded
  cur.expect_space();
  cur.token();  // authuser, discarded
  cur.expect_space();
  w.datetime_ms = combined_datetime_ms(cur.bracketed());
  cur.expect_space();

  size_t request_col = cur.pos;
  std::string request = cur.quoted(escapes);
  // method SP uri SP protocol, exactly
  size_t sp1 = request.find(' ');
  size_t sp2 = request.rfind(' ');
  if (sp1 == std::string::npos || sp2 == sp1 || request.find(' ', sp1 + 1) != sp2 ||
      sp1 == 0 || sp2 + 1 == request.size())
    parse_fail(request_col, "bad request line");
  w.url = request.substr(sp1 + 1, sp2 - sp1 - 1);
  cur.expect_space();

  std::string_view status = cur.token();
  if (status.size() != 3) parse_fail(cur.pos - status.size(), "status must be three digits");
  int code = 0;
  for (char c : status) {
    if (c < '0' || c > '9') parse_fail(cur.pos - status.size(), "non-numeric status");
    code = code * 10 + (c - '0');
  }
  if (code < 100 || code > 599) parse_fail(cur.pos - status.size(), "status out of range");
  w.return_code = code;
  cur.expect_space();

  std::string_view bytes_field = cur.token();  // byte count or "-", discarded
  if (bytes_field != "-") {
    for (size_t k = 0; k < bytes_field.size(); ++k) {
      if (bytes_field[k] < '0' || bytes_field[k] > '9')
        parse_fail(cur.pos - bytes_field.size() + k, "non-numeric byte count");
    }
  }
  cur.expect_space();

  std::string referer = cur.quoted(escapes);
  w.referer = referer == "-" ? "" : referer;
  cur.expect_space();
  w.user_agent = cur.quoted(escapes);
  if (!cur.done()) parse_fail(cur.pos, "trailing characters after user agent");
  return w;
}

std::string render_combined_log_line(const chaincode::WebLogData& w, bool escapes) {
  auto quote = [&](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (escapes && (c == '"' || c == '\\')) out.push_back('\\');
      out.push_back(c);
    }
    out.push_back('"');
    return out;
  };
  int64_t total_sec = w.datetime_ms / 1000;
  int64_t days = total_sec / 86400;
  int64_t rem = total_sec % 86400;
  std::chrono::year_month_day ymd{std::chrono::sys_days(std::chrono::days(days))};
  static const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                 "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  char datetime[64];
  std::snprintf(datetime, sizeof datetime, "%02u/%s/%04d:%02lld:%02lld:%02lld +0000",
                static_cast<unsigned>(ymd.day()),
                months[static_cast<unsigned>(ymd.month()) - 1], static_cast<int>(ymd.year()),
                static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                static_cast<long long>(rem % 60));
  std::string referer = w.referer.empty() ? "-" : w.referer;
  return w.ip + " - - [" + datetime + "] " + quote("GET " + w.url + " HTTP/1.1") + " " +
         std::to_string(w.return_code) + " 0 " + quote(referer) + " " + quote(w.user_agent);
}

IngestReport ingest_stream(std::istream& in, size_t batch_size, const SubmitBatchFn& submit,
                           bool escapes) {
  if (batch_size == 0) batch_size = 1;
  IngestReport report;
  std::vector<chaincode::WebLogData> batch;

  auto flush = [&]() {
    if (batch.empty()) return;
    std::vector<ErrorCode> outcomes = submit(batch);
    report.submitted += batch.size();
    for (ErrorCode e : outcomes) {
      if (e == ErrorCode::None) ++report.committed_valid;
      else if (e == ErrorCode::DuplicateAsset) ++report.rejected_duplicates;
    }
    batch.clear();
  };

  std::string line;
  uint64_t line_number = 0;
  try {
    while (std::getline(in, line)) {
      ++line_number;
      ++report.lines_read;
      try {
        chaincode::WebLogData w = parse_combined_log_line(line, escapes);
        w.asset_id = chaincode::derive_asset_id(w);
        ++report.parsed_ok;
        batch.push_back(std::move(w));
        if (batch.size() >= batch_size) flush();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ParseError) throw;
        ++report.parse_failed;
        report.failures.push_back(ParseFailure{line_number, e.what()});
      }
    }
    flush();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SubmissionFailure) throw;
    // pipeline unreachable mid-run: the partial report stands
  }
  return report;
}

IngestReport ingest_file(const std::string& path, size_t batch_size, const SubmitBatchFn& submit,
                         bool escapes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::FileUnreadable, "cannot open " + path);
  return ingest_stream(in, batch_size, submit, escapes);
}

Bytes IngestReport::encode() const {
  cjson o = cjson::object();
  o["lines_read"] = lines_read;
  o["parsed_ok"] = parsed_ok;
  o["parse_failed"] = parse_failed;
  o["submitted"] = submitted;
  o["committed_valid"] = committed_valid;
  o["rejected_duplicates"] = rejected_duplicates;
  o["failures"] = cjson::array();
  for (const auto& f : failures) {
    cjson fj = cjson::object();
    fj["line"] = f.line_number;
    fj["reason"] = f.reason;
    o["failures"].push_back(std::move(fj));
  }
  return dump_canonical(o);
}

std::string IngestReport::render_table() const {
  std::ostringstream out;
  out << "lines read           " << lines_read << "\n";
  out << "parsed ok            " << parsed_ok << "\n";
  out << "parse failed         " << parse_failed << "\n";
  out << "submitted            " << submitted << "\n";
  out << "committed valid      " << committed_valid << "\n";
  out << "rejected duplicates  " << rejected_duplicates << "\n";
  for (const auto& f : failures)
    out << "  line " << f.line_number << ": " << f.reason << "\n";
  return out.str();
}

}  // namespace medusa::ingest
