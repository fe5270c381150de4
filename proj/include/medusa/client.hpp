#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "medusa/chaincode.hpp"
#include "medusa/channel.hpp"
#include "medusa/identity.hpp"
#include "medusa/ingest.hpp"
#include "medusa/ledger.hpp"

namespace medusa::client {

// data_dir/config: operator defaults, canonical text.
struct CliConfig {
  std::string default_channel;
  std::string output_format = "table";  // "table" or "canonical"

  static CliConfig load(const std::string& path);  // missing file -> defaults
  void save(const std::string& path) const;
};

struct AppendResult {
  std::string tx_id;  // hex
  uint64_t block_number = 0;
  std::string flag;  // validity flag name
  std::string asset_id;
};

struct QueryResult {
  std::vector<chaincode::WebLogData> rows;
  AppendResult evidence;  // the committed read-only query transaction
};

// Single-process deployment over a data directory: the orderer, the embedded
// peers and the block files all live under data_dir. One writer at a time
// (flock on data_dir/.lock); read-only commands share the lock.
class Client {
 public:
  explicit Client(std::string data_dir);

  const std::string& data_dir() const { return data_dir_; }
  std::string config_path() const;

  // Writes the genesis block. peer_count embedded endorsing peers are
  // generated and their keys stored under the channel directory.
  void channel_create(const std::string& channel_id, channel::Pipeline pipeline,
                      uint32_t policy_k, uint32_t peer_count, uint32_t max_block_txs,
                      uint64_t max_wait_ms);

  // Registers a datasource: commits the registration transaction and stores
  // the generated private key under data_dir/keys/<channel>/<id>.key.
  // The password is stored only as a salted digest inside the record.
  void datasource_register(const std::string& channel_id, const identity::DataSource& ds,
                           std::string_view password);

  // Appends one asset. Empty asset_id is derived from content. Duplicate
  // content raises DuplicateAsset.
  AppendResult append(const std::string& channel_id, const std::string& datasource_id,
                      std::string_view password, chaincode::WebLogData w);

  // Batch-ingests a combined-format log file through the same pipeline.
  ingest::IngestReport ingest_log(const std::string& channel_id,
                                  const std::string& datasource_id, std::string_view password,
                                  const std::string& path, size_t batch_size, bool escapes);

  // Runs the query as a committed read-only transaction and returns the
  // endorsed response rows (ordered by datetime, then asset_id).
  QueryResult query(const std::string& channel_id, const std::string& datasource_id,
                    std::string_view password, const chaincode::QuerySpec& q);

  ledger::VerificationReport verify(const std::string& channel_id) const;

  Bytes block_show(const std::string& channel_id, uint64_t block_number) const;

  // One canonical participant record per line; never keys, never passwords.
  std::string registry_export(const std::string& channel_id) const;

  std::vector<std::string> list_channels() const;

 private:
  struct Runtime;
  Runtime load_runtime(const std::string& channel_id) const;
  AppendResult run_envelope(Runtime& rt, const std::string& channel_id, tx::Envelope env,
                            Bytes* response);

  std::string channel_dir(const std::string& channel_id) const;
  std::string blocks_path(const std::string& channel_id) const;
  std::string key_path(const std::string& channel_id, const std::string& ds_id) const;

  std::string data_dir_;
};

}  // namespace medusa::client
