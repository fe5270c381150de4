/* Medusa C API: audit-log storage on a tamper-evident replicated ledger.
 *
 * All structured input and output crosses this boundary as canonical JSON
 * text. Strings returned through char** out parameters are heap-allocated
 * and must be released with medusa_string_free(). Out parameters may be
 * passed as NULL when the caller does not want that output.
 *
 * A medusa_client is not thread-safe; open one per thread or serialize
 * calls. Concurrent processes are serialized through a lock file inside the
 * data directory; a busy lock fails fast with MEDUSA_E_IO.
 */

#ifndef MEDUSA_H
#define MEDUSA_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct medusa_client medusa_client;

typedef enum medusa_rc {
  MEDUSA_OK = 0,
  MEDUSA_E_USAGE = 1,    /* invalid arguments, config or input data */
  MEDUSA_E_CONFLICT = 2, /* duplicate asset, participant or channel */
  MEDUSA_E_POLICY = 3,   /* endorsement policy invalid or unsatisfied */
  MEDUSA_E_VERIFY = 4,   /* chain verification or authenticity failure */
  MEDUSA_E_IO = 5,       /* filesystem error or busy lock */
  MEDUSA_E_AUTH = 6,     /* unknown datasource or wrong password */
  MEDUSA_E_NOTFOUND = 7, /* no such channel, block or participant */
  MEDUSA_E_INTERNAL = 8
} medusa_rc;

const char* medusa_rc_name(medusa_rc rc);

/* Opens (creating if needed) a data directory. *out is NULL on failure. */
medusa_rc medusa_open(const char* data_dir, medusa_client** out);
void medusa_close(medusa_client* client);

/* Message for the most recent failing call on this client. Owned by the
 * client; valid until the next call. Empty string when no error. */
const char* medusa_last_error(const medusa_client* client);

/* pipeline: "eov" or "order_execute". policy_k endorsements out of
 * peer_count embedded peers are required for a transaction to be valid. */
medusa_rc medusa_channel_create(medusa_client* client, const char* channel_id,
                                const char* pipeline, uint32_t policy_k, uint32_t peer_count,
                                uint32_t max_block_txs, uint64_t max_wait_ms);

/* datasource_json: {"datasource_id":"...","ip":"...","port":N,
 * "username":"...","url":"..."}. Commits the registration and stores the
 * generated signing key under the data directory. The password is persisted
 * only as a salted digest inside the participant record. */
medusa_rc medusa_datasource_register(medusa_client* client, const char* channel_id,
                                     const char* datasource_json, const char* password);

/* weblog_json: {"asset_id":"...","url":"...","referer":"...",
 * "returnCode":N,"userAgent":"...","datetime":MS,"ip":"..."}; asset_id may
 * be absent or empty to derive it from content. out_json describes where
 * the transaction committed: {"tx_id","block_number","flag","asset_id"}. */
medusa_rc medusa_append(medusa_client* client, const char* channel_id,
                        const char* datasource_id, const char* password,
                        const char* weblog_json, char** out_json);

/* Parses an NCSA combined-format log file and appends every record.
 * parse_escapes 0 disables backslash escapes inside quoted fields.
 * out_json is the ingestion report (counts plus per-line failures). */
medusa_rc medusa_ingest(medusa_client* client, const char* channel_id,
                        const char* datasource_id, const char* password, const char* log_path,
                        size_t batch_size, int parse_escapes, char** out_json);

/* query_json: {"filter":"ALL"} | {"filter":"BY_IP","ip":"..."} |
 * {"filter":"BY_USER_AGENT","user_agent":"..."} |
 * {"filter":"BY_DATETIME_RANGE","from":MS,"to":MS}  (from inclusive,
 * to exclusive). out_json: {"rows":[weblog...],"evidence":{...}} where
 * evidence locates the committed read-only query transaction. */
medusa_rc medusa_query(medusa_client* client, const char* channel_id,
                       const char* datasource_id, const char* password, const char* query_json,
                       char** out_json);

/* Re-verifies the stored chain: structure, hashes, links, signatures and
 * validity flags. Returns MEDUSA_OK with a report when the chain is intact,
 * MEDUSA_E_VERIFY with the same report shape when it is not. */
medusa_rc medusa_verify(medusa_client* client, const char* channel_id, char** out_json);

/* Canonical bytes of one block, by number. */
medusa_rc medusa_block_show(medusa_client* client, const char* channel_id,
                            uint64_t block_number, char** out_json);

/* One canonical participant record per line. Never includes private keys
 * or plaintext passwords. */
medusa_rc medusa_registry_export(medusa_client* client, const char* channel_id,
                                 char** out_text);

/* JSON array of channel ids, sorted. */
medusa_rc medusa_list_channels(medusa_client* client, char** out_json);

/* Operator defaults stored in the data directory:
 * {"default_channel":"...","output_format":"table"|"canonical"}. */
medusa_rc medusa_config_get(medusa_client* client, char** out_json);
medusa_rc medusa_config_set(medusa_client* client, const char* config_json);

/* Runs a deterministic multi-peer simulation from a scenario description
 * (see the simulation scenario format in the README). order_execute 1 runs
 * the order-execute baseline over the same scenario instead of the
 * endorse-order-validate pipeline. out_json receives the metrics document,
 * out_table a human-readable rendering; either may be NULL. No client is
 * involved; errors are reported through out_error. */
medusa_rc medusa_simulate(const char* scenario_json, int order_execute, char** out_json,
                          char** out_table, char** out_error);

void medusa_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* MEDUSA_H */
