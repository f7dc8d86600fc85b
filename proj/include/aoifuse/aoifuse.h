/* Copyright 2026 The AoIFuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/* C interface to the AoIFuse workbench. Every function returns an
 * aoif_status; on failure aoif_last_error() holds a message for the calling
 * thread. Strings returned through char** are owned by the caller and freed
 * with aoif_string_free. JSON summaries are UTF-8 objects. */

#ifndef AOIFUSE_AOIFUSE_H_
#define AOIFUSE_AOIFUSE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(AOIFUSE_BUILDING_LIBRARY)
#define AOIF_API __attribute__((visibility("default")))
#else
#define AOIF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aoif_status {
  AOIF_OK = 0,
  AOIF_INVALID_ARGUMENT = 1,
  AOIF_DEGENERATE_EXCHANGE = 2,
  AOIF_SINGULAR_GEOMETRY = 3,
  AOIF_ILL_CONDITIONED = 4,
  AOIF_SINGULAR_INNOVATION = 5,
  AOIF_INSUFFICIENT_WINDOW = 6,
  AOIF_NON_FINITE = 7,
  AOIF_DIMENSION_MISMATCH = 8,
  AOIF_EMPTY_SPLIT = 9,
  AOIF_MISSING_TRUTH = 10,
  AOIF_EMPTY_OVERLAP = 11,
  AOIF_RATE_MISMATCH = 12,
  AOIF_MISSING_CHECKPOINT = 13,
  AOIF_IO = 14,
  AOIF_PARSE = 15,
  AOIF_OUT_OF_BOUNDS = 16,
  AOIF_INTERNAL = 99
} aoif_status;

typedef struct aoif_log aoif_log;       /* measurement log */
typedef struct aoif_config aoif_config; /* run configuration */

AOIF_API const char* aoif_version(void);
AOIF_API const char* aoif_last_error(void);
AOIF_API const char* aoif_status_name(aoif_status status);
AOIF_API void aoif_string_free(char* s);

/* Measurement logs. `scenario` is "reference" or a scenario JSON path. */
AOIF_API aoif_status aoif_simulate(const char* scenario, uint64_t seed, aoif_log** out);
AOIF_API aoif_status aoif_log_read(const char* path, aoif_log** out);
AOIF_API aoif_status aoif_log_write(const aoif_log* log, const char* path);
AOIF_API aoif_status aoif_log_summary(const aoif_log* log, char** json_out);
AOIF_API void aoif_log_free(aoif_log* log);

/* Classical processing of a log. Outputs are JSON-Lines files. */
AOIF_API aoif_status aoif_trilaterate(const aoif_log* log, double window, const char* out_path, char** json_out);
/* Dead reckoning from the known start; bias_correct fits the first-order
 * accelerometer bias against the truth end points. */
AOIF_API aoif_status aoif_imu_integrate(const aoif_log* log, int bias_correct, const char* out_path,
                                        char** json_out);
AOIF_API aoif_status aoif_fuse_akf(const aoif_log* log, double window, const char* out_path, char** json_out);

/* Run configuration. */
AOIF_API aoif_status aoif_config_default(aoif_config** out);
AOIF_API aoif_status aoif_config_load(const char* path, aoif_config** out);
AOIF_API aoif_status aoif_config_set_output_dir(aoif_config* cfg, const char* dir);
AOIF_API aoif_status aoif_config_set_threads(aoif_config* cfg, int threads);
AOIF_API aoif_status aoif_config_set_seeds(aoif_config* cfg, const uint64_t* seeds, size_t n);
/* Comma-separated method names. */
AOIF_API aoif_status aoif_config_set_methods(aoif_config* cfg, const char* methods);
/* AOIFUSE_OUTPUT_DIR and AOIFUSE_THREADS. */
AOIF_API aoif_status aoif_config_apply_env(aoif_config* cfg);
AOIF_API aoif_status aoif_config_validate(const aoif_config* cfg);
/* Borrowed; valid until the next change to cfg. */
AOIF_API const char* aoif_config_output_dir(const aoif_config* cfg);
AOIF_API aoif_status aoif_config_to_json(const aoif_config* cfg, char** json_out);
AOIF_API void aoif_config_free(aoif_config* cfg);

/* Staged pipeline. `force` reruns stages whose artifacts are current. */
AOIF_API aoif_status aoif_train(const aoif_config* cfg, const char* method, uint64_t seed, int force,
                                char** json_out);
AOIF_API aoif_status aoif_augment_train_generator(const aoif_config* cfg, uint64_t seed, int force, char** json_out);
AOIF_API aoif_status aoif_augment_compare(const aoif_config* cfg, int force, char** json_out);
AOIF_API aoif_status aoif_evaluate(const aoif_config* cfg, int force, char** json_out);
AOIF_API aoif_status aoif_ablate(const aoif_config* cfg, int force, char** json_out);
AOIF_API aoif_status aoif_report(const aoif_config* cfg, char** json_out);

/* Chained inference of a FusionNet or Bi-LSTM checkpoint over a whole log.
 * p_start (3 doubles) may be NULL to use the first truth position. */
AOIF_API aoif_status aoif_infer(const char* checkpoint_path, const aoif_log* log, const double* p_start,
                                const char* out_path, char** json_out);
/* Error statistics of an estimate file against the log's truth. */
AOIF_API aoif_status aoif_evaluate_estimates(const char* estimates_path, const aoif_log* log, const char* method,
                                             char** json_out);
AOIF_API aoif_status aoif_checkpoint_inspect(const char* path, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* AOIFUSE_AOIFUSE_H_ */
