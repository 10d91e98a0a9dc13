/*
 * typojack C API.
 *
 * All functionality is reached through opaque handles and status codes. Every
 * function returns tj_status; on failure, tj_session_last_error() (or
 * tj_global_last_error() for handle-free calls) describes the problem.
 * Strings returned by the API stay owned by the library and remain valid
 * until the next call on the same handle.
 */

#ifndef TYPOJACK_H
#define TYPOJACK_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tj_status {
  TJ_OK = 0,
  TJ_ERROR_CONFIG = 1,
  TJ_ERROR_IO = 2,
  TJ_ERROR_DECODE = 3,
  TJ_ERROR_PROVIDER = 4,
  TJ_ERROR_INVALID_ARGUMENT = 5,
  TJ_ERROR_UNRENDERABLE = 6,
  TJ_ERROR_PARTIAL = 7, /* run finished but some providers failed */
  TJ_ERROR_INTERNAL = 8
} tj_status;

typedef struct tj_session tj_session;
typedef struct tj_image tj_image;

const char* tj_version(void);

/* Error text for the most recent failing handle-free call on this thread. */
const char* tj_global_last_error(void);

/* ------------------------------------------------------------------------ */
/* Sessions: a loaded, validated configuration plus its provider bindings.  */

tj_status tj_session_open(const char* config_path, tj_session** out_session);
void tj_session_close(tj_session* session);

const char* tj_session_last_error(const tj_session* session);

/* Command-line style overrides, applied before any run_* call. */
tj_status tj_session_override_seed(tj_session* session, uint64_t seed);
tj_status tj_session_override_mode(tj_session* session, const char* mode);
tj_status tj_session_override_defense(tj_session* session, int enabled);
tj_status tj_session_override_output_dir(tj_session* session, const char* dir);

/* ------------------------------------------------------------------------ */
/* Whole-run entry points. Artifacts land under the configured output dir.  */

/* Single-image typographic optimization of `prompt_text` onto `image_path`. */
tj_status tj_run_optimize(tj_session* session, const char* image_path,
                          const char* prompt_text);

/* Refinement loop for one goal from the task suite. */
tj_status tj_run_attack(tj_session* session, const char* goal_id);

/* Full suite. TJ_OK on completion, TJ_ERROR_PARTIAL when provider failures
 * invalidated some tasks (artifacts are still written). */
tj_status tj_run_campaign(tj_session* session);

/* Injection detection over every .png in a directory. */
tj_status tj_run_defend(tj_session* session, const char* image_dir);

/* Re-render report.csv and summary.txt from a campaign directory. */
tj_status tj_run_report(tj_session* session, const char* campaign_dir);

/* ------------------------------------------------------------------------ */
/* Images and fine-grained operations.                                      */

tj_status tj_image_load(const char* path, tj_image** out_image);
tj_status tj_image_create(uint32_t width, uint32_t height,
                          const uint8_t* rgba_or_null, tj_image** out_image);
tj_status tj_image_save(const tj_image* image, const char* path);
tj_status tj_image_size(const tj_image* image, uint32_t* out_width,
                        uint32_t* out_height);
/* Borrowed pointer to width*height*4 RGBA bytes; valid while the image lives. */
tj_status tj_image_pixels(const tj_image* image, const uint8_t** out_pixels,
                          size_t* out_size);
void tj_image_destroy(tj_image* image);

typedef struct tj_typo_params {
  int32_t x;
  int32_t y;
  int32_t font_size;    /* [10, 150] */
  int32_t color_r;      /* [0, 255] */
  int32_t color_g;
  int32_t color_b;
  int32_t line_count;   /* [1, 10] */
  int32_t contrast;     /* [0, 10], neutral at 5 */
  int32_t transparency; /* [0, 255], 0 = invisible */
} tj_typo_params;

/* Renders prompt_text onto a copy of `base` using the session's font. */
tj_status tj_session_insert_prompt(tj_session* session, const tj_image* base,
                                   const char* prompt_text,
                                   const tj_typo_params* params,
                                   tj_image** out_altered);

/* Perceptual distance under the session's configured provider. */
tj_status tj_session_perceptual_distance(tj_session* session,
                                         const tj_image* a, const tj_image* b,
                                         double* out_distance);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TYPOJACK_H */
