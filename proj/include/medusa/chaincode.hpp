#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "medusa/envelope.hpp"
#include "medusa/errors.hpp"
#include "medusa/state.hpp"
#include "medusa/weblog.hpp"

namespace medusa::chaincode {

struct QuerySpec {
  enum class Filter { ALL, BY_IP, BY_USER_AGENT, BY_DATETIME_RANGE };
  Filter filter = Filter::ALL;
  std::string ip;
  std::string user_agent;
  int64_t from_ms = 0;  // inclusive
  int64_t to_ms = 0;    // exclusive

  bool matches(const WebLogData& w) const;
};

Bytes encode_query_spec(const QuerySpec& q);
QuerySpec decode_query_spec(std::string_view bytes);

struct ExecContext {
  std::string submitter;
};

// Execution outcome as a value: endorsers must compare and propagate failures
// rather than unwind, so chaincode errors are data here.
struct ExecOutcome {
  ErrorCode error = ErrorCode::None;
  std::string error_detail;
  std::vector<tx::ReadEntry> read_set;
  std::vector<tx::WriteEntry> write_set;
  Bytes response;  // canonical bytes (query results)

  bool ok() const { return error == ErrorCode::None; }
};

using Handler = std::function<ExecOutcome(const state::StateView&, const ExecContext&,
                                          const std::vector<std::string>& args)>;

// The complete chaincode surface: exactly the append and query families.
const std::map<std::string, Handler>& dispatch_table();

// Routes through dispatch_table(); anything else (update/delete/unknown)
// yields UnknownFunction without touching state.
ExecOutcome dispatch(const state::StateView& view, const ExecContext& ctx,
                     const std::string& function, const std::vector<std::string>& args);

// Trigger for the DataAppend transaction: validates the asset, proves
// non-existence in the read set, writes weblog:<asset_id>.
ExecOutcome on_data_append(const state::StateView& view, const ExecContext& ctx,
                           const WebLogData& data);

// Query family: every committed asset matching the filter, ordered by
// (datetime, asset_id) ascending.
std::vector<WebLogData> select_weblog(const state::StateView& view, const QuerySpec& query);

// Configuration/system functions, deliberately outside the dispatch table:
// RegisterDataSource (participant record in args[0]) and ConfigChannel
// (genesis only). Used by the transaction flow, not reachable via dispatch().
ExecOutcome execute_system(const state::StateView& view, const ExecContext& ctx,
                           const std::string& function, const std::vector<std::string>& args);
bool is_system_function(std::string_view function);

// Entry point for endorsers: system functions first, then the chaincode
// dispatch table.
ExecOutcome execute_any(const state::StateView& view, const ExecContext& ctx,
                        const std::string& function, const std::vector<std::string>& args);

Bytes encode_weblog_list(const std::vector<WebLogData>& list);
std::vector<WebLogData> decode_weblog_list(std::string_view bytes);

}  // namespace medusa::chaincode
