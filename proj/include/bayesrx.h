/* C interface to the link-level simulation core. All functions return a
 * brx_status; on failure brx_last_error() holds a message for the calling
 * thread. Configs are opaque handles created by load/parse and released
 * with brx_config_free. */
#ifndef BAYESRX_H
#define BAYESRX_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum brx_status {
  BRX_OK = 0,
  BRX_ERR_INVALID = 1,
  BRX_ERR_CONFIG = 2,
  BRX_ERR_TRAINING = 3,
  BRX_ERR_IO = 4
} brx_status;

typedef struct brx_config brx_config;

/* Reads a key=value experiment config from disk. */
brx_status brx_config_load(const char* path, brx_config** out);

/* Parses experiment config text held in memory. */
brx_status brx_config_parse(const char* text, brx_config** out);

/* Overrides one key on an existing config. Unknown keys or malformed
 * values fail with BRX_ERR_CONFIG. */
brx_status brx_config_set(brx_config* cfg, const char* key, const char* value);

void brx_config_free(brx_config* cfg);

/* Copies the 16-hex-digit fingerprint of the physics-relevant settings
 * (NUL terminated, so bufsize must be at least 17). */
brx_status brx_config_fingerprint(const brx_config* cfg, char* buf, size_t bufsize);

/* Runs the full pipeline (per-block detector training, detection, optional
 * decoding) and writes the metrics CSV. The CSV path is copied into
 * csv_path when it is non-NULL. */
brx_status brx_run(const brx_config* cfg, size_t threads, char* csv_path, size_t bufsize);

/* Reference run using exact symbol posteriors instead of a trained
 * detector (plus exact bitwise decoding for short codes). The CSV lands
 * next to the regular one with an "oracle_" name prefix. */
brx_status brx_run_oracle(const brx_config* cfg, size_t threads, char* csv_path, size_t bufsize);

/* Trains the configured decoder offline and saves it to the configured
 * decoder path, which is copied into decoder_path when non-NULL. */
brx_status brx_train_decoder(const brx_config* cfg, char* decoder_path, size_t bufsize);

/* Runs every config file and aggregates all records into one CSV. */
brx_status brx_sweep(const char* const* config_paths, size_t count, size_t threads,
                     const char* out_csv);

/* Renders one SVG per selected metric from a metrics CSV. spec_path may be
 * NULL to plot symbol error rate against SNR. */
brx_status brx_plot(const char* csv_path, const char* spec_path, const char* out_dir);

/* Message for the most recent failure on the calling thread ("" if none). */
const char* brx_last_error(void);

const char* brx_version(void);

#ifdef __cplusplus
}
#endif

#endif /* BAYESRX_H */
