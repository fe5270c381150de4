#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <string>
#include <vector>

#include "medusa/bytes.hpp"
#include "medusa/errors.hpp"
#include "medusa/weblog.hpp"

namespace medusa::ingest {

struct RawLogLine {
  std::string line;
  std::string source;  // datasource id
  uint64_t line_number = 1;
};

struct ParseFailure {
  uint64_t line_number = 0;
  std::string reason;
};

struct IngestReport {
  uint64_t lines_read = 0;
  uint64_t parsed_ok = 0;
  uint64_t parse_failed = 0;
  uint64_t submitted = 0;
  uint64_t committed_valid = 0;
  uint64_t rejected_duplicates = 0;
  std::vector<ParseFailure> failures;

  Bytes encode() const;
  std::string render_table() const;
};

// NCSA Combined Log Format:
//   host ident authuser [datetime] "request" status bytes "referer" "user-agent"
// host becomes ip, the request's URI becomes url, status becomes returnCode,
// "-" referer becomes empty; ident, authuser and bytes are parsed and
// discarded. asset_id is left empty (derive_asset_id fills it).
// `escapes` honors \" and \\ inside quoted fields; off = strict literal mode
// for ancient logs. Throws ParseError with column position and reason.
chaincode::WebLogData parse_combined_log_line(std::string_view line, bool escapes = true);

// "10/Oct/2000:13:55:36 -0700" -> UTC epoch ms, honoring the offset.
// Bounds: civil year 1970..9999 and the result must land in
// [0, kMaxDatetimeMs]. Throws ParseError.
int64_t combined_datetime_ms(std::string_view text);

// Renders a WebLogData back into a combined-log line (ident/authuser "-",
// bytes fixed to 0); parse_combined_log_line inverts it for fields that
// survive the format.
std::string render_combined_log_line(const chaincode::WebLogData& w, bool escapes = true);

// One batch of parsed assets in file order -> one outcome per asset.
// None = committed valid; DuplicateAsset = rejected duplicate; anything else
// counts as neither. Throwing SubmissionFailure aborts the run (the partial
// report is still returned).
using SubmitBatchFn =
    std::function<std::vector<ErrorCode>(const std::vector<chaincode::WebLogData>&)>;

IngestReport ingest_stream(std::istream& in, size_t batch_size, const SubmitBatchFn& submit,
                           bool escapes = true);

// Throws FileUnreadable when the file cannot be opened.
IngestReport ingest_file(const std::string& path, size_t batch_size, const SubmitBatchFn& submit,
                         bool escapes = true);

}  // namespace medusa::ingest
