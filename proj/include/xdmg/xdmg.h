/* Copyright 2026 The xdmg Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the xdmg building-damage pipeline. All functions return an
 * xdmg_status; on failure the message is available from xdmg_last_error()
 * (thread-local, valid until the next call on the same thread). Strings
 * returned through `char**` out-parameters are owned by the caller and must
 * be released with xdmg_free_string().
 */
#ifndef XDMG_XDMG_H
#define XDMG_XDMG_H

#include <stddef.h>
#include <stdint.h>

#if defined(XDMG_BUILDING_LIBRARY)
#define XDMG_API __attribute__((visibility("default")))
#else
#define XDMG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes of the command-line tool. */
typedef enum xdmg_status {
  XDMG_OK = 0,
  XDMG_ERR_USAGE = 1,   /* invalid argument or configuration */
  XDMG_ERR_DATA = 2,    /* missing, unreadable or inconsistent input data */
  XDMG_ERR_RUNTIME = 3  /* divergence or other failure during execution */
} xdmg_status;

typedef struct xdmg_model xdmg_model; /* opaque trained model */

XDMG_API const char* xdmg_version(void);
XDMG_API const char* xdmg_last_error(void);
XDMG_API void xdmg_free_string(char* s);

/* ---- pipeline commands; `summary` may be NULL ---- */

XDMG_API xdmg_status xdmg_synth(const char* spec_json_path, const char* out_dir, char** summary);
/* truth_out_dir may be NULL; otherwise rasterized masks are written there. */
XDMG_API xdmg_status xdmg_ingest(const char* data_root, const char* split, const char* truth_out_dir,
                                 char** summary);
XDMG_API xdmg_status xdmg_train(const char* data_root, const char* config_json_path, const char* run_dir,
                                int single_thread, char** summary);
/* pre_png may be NULL for post-only checkpoints. */
XDMG_API xdmg_status xdmg_predict(const char* checkpoint_path, const char* pre_png, const char* post_png,
                                  const char* out_png, char** summary);
XDMG_API xdmg_status xdmg_predict_split(const char* checkpoint_path, const char* data_root, const char* split,
                                        const char* out_dir, char** summary);
XDMG_API xdmg_status xdmg_score(const char* pred_dir, const char* truth_dir, const char* out_json,
                                char** summary);
XDMG_API xdmg_status xdmg_ablate(const char* data_root, const char* config_json_path, const char* out_csv,
                                 int single_thread, char** summary);

/* ---- model handle ---- */

XDMG_API xdmg_status xdmg_model_load(const char* checkpoint_path, xdmg_model** out);
XDMG_API void xdmg_model_free(xdmg_model* model);
/* "feature-concat", "input-concat", "input-diff" or "mono-post"; static storage. */
XDMG_API const char* xdmg_model_fusion(const xdmg_model* model);
XDMG_API int xdmg_model_needs_pre(const xdmg_model* model);
XDMG_API size_t xdmg_model_parameter_count(const xdmg_model* model);

/* Predicts a height x width label mask (values 0..4) from interleaved RGB
 * float images in [0,1]. `pre` may be NULL when the model does not need it.
 * `labels_out` must hold height*width bytes. */
XDMG_API xdmg_status xdmg_model_predict(const xdmg_model* model, const float* pre, const float* post, int height,
                                        int width, uint8_t* labels_out);

/* ---- metrics ---- */

/* 5x5 row-major confusion counts (truth row, predicted column) to F1 scores.
 * per_class_f1 may be NULL; otherwise it receives 5 values. */
XDMG_API xdmg_status xdmg_metrics_from_confusion(const uint64_t counts[25], double* localization_f1,
                                                 double* damage_f1, double* overall_f1, double* per_class_f1);

#ifdef __cplusplus
}
#endif

#endif /* XDMG_XDMG_H */
