#ifndef HEBBCNN_H
#define HEBBCNN_H

/* C interface to the Hebbian CNN library. Every function returns a status
 * code; on failure hebb_last_error() describes the most recent error on the
 * calling thread. Handles are opaque and released with their _free call. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HEBB_API __declspec(dllexport)
#else
#define HEBB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hebb_status {
  HEBB_OK = 0,
  HEBB_ERR_DIMENSION = 1,
  HEBB_ERR_NUMERIC = 2,
  HEBB_ERR_PARAMETER = 3,
  HEBB_ERR_FORMAT = 4,
  HEBB_ERR_CAPABILITY = 5,
  HEBB_ERR_IO = 6,
  HEBB_ERR_CONFIG = 7,
  HEBB_ERR_INTERNAL = 8,
  HEBB_ERR_NULL_ARGUMENT = 9
} hebb_status;

typedef struct hebb_config hebb_config;
typedef struct hebb_artifacts hebb_artifacts;
typedef struct hebb_network hebb_network;

typedef void (*hebb_log_fn)(const char* message, void* user);

HEBB_API const char* hebb_version(void);
HEBB_API const char* hebb_status_name(int status);
HEBB_API const char* hebb_last_error(void);
HEBB_API int hebb_set_threads(size_t threads);

/* ---- configurations ---- */
HEBB_API size_t hebb_preset_count(void);
HEBB_API const char* hebb_preset_name(size_t index);
HEBB_API int hebb_config_load(const char* path, hebb_config** out);
/* dataset: "mnist", "cifar10" or "stl10" */
HEBB_API int hebb_config_from_preset(const char* name, const char* dataset, hebb_config** out);
HEBB_API void hebb_config_free(hebb_config* config);
HEBB_API int hebb_config_set_seeds(hebb_config* config, const uint64_t* seeds, size_t count);
HEBB_API int hebb_config_set_data_dir(hebb_config* config, const char* dir);
HEBB_API int hebb_config_set_out_dir(hebb_config* config, const char* dir);
HEBB_API int hebb_config_set_threads(hebb_config* config, size_t threads);
HEBB_API int hebb_config_set_limits(hebb_config* config, size_t train_limit, size_t test_limit);
HEBB_API int hebb_config_set_width_divisor(hebb_config* config, size_t divisor);
HEBB_API int hebb_config_set_classifier_epochs(hebb_config* config, size_t epochs);
HEBB_API int hebb_config_name(const hebb_config* config, const char** out);
HEBB_API int hebb_config_dry_run(const hebb_config* config, size_t* parameters, size_t* feature_dim);

/* ---- runs ---- */
HEBB_API int hebb_run(const hebb_config* config, hebb_log_fn log, void* user, hebb_artifacts** out);
HEBB_API void hebb_artifacts_free(hebb_artifacts* artifacts);
HEBB_API size_t hebb_artifacts_count(const hebb_artifacts* artifacts);
HEBB_API const char* hebb_artifacts_path(const hebb_artifacts* artifacts, size_t index);
HEBB_API const char* hebb_artifacts_metrics_csv(const hebb_artifacts* artifacts);
/* Mean test accuracy of seed `seed_index` over the last `window` epochs. */
HEBB_API int hebb_artifacts_test_accuracy(const hebb_artifacts* artifacts, size_t seed_index, size_t window,
                                          double* out);

/* ---- trained networks ---- */
/* network_doc may be NULL: network.txt next to the checkpoint is used. */
HEBB_API int hebb_network_load(const char* checkpoint, const char* network_doc, hebb_network** out);
HEBB_API void hebb_network_free(hebb_network* net);
HEBB_API int hebb_network_feature_dim(const hebb_network* net, size_t* out);
HEBB_API int hebb_network_conv_count(const hebb_network* net, size_t* out);

typedef struct hebb_visualize_options {
  const char* out_dir;  /* NULL: current directory */
  const char* data_dir; /* embed mode only */
  size_t bins;          /* 0: 64 */
  size_t samples;       /* 0: 256 */
  uint64_t seed;
  size_t pga_steps;     /* 0: 200 */
} hebb_visualize_options;

/* mode: "pga", "hist", "direct" or "embed"; fills `out` with the written files. */
HEBB_API int hebb_visualize(const hebb_network* net, const char* mode, const hebb_visualize_options* options,
                            hebb_artifacts** out);

#ifdef __cplusplus
}
#endif

#endif
