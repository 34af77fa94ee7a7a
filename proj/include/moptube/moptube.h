/* Copyright 2026 The moptube Authors. All Rights Reserved.

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

/* Stable C interface of libmoptube. Every function returns an mt_status;
 * on failure mt_last_error() describes the problem (per thread, valid until
 * the next call on that thread). Objects are opaque and must be released
 * with their matching *_destroy function. */

#ifndef MOPTUBE_MOPTUBE_H_
#define MOPTUBE_MOPTUBE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MT_API __declspec(dllexport)
#else
#define MT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mt_status {
  MT_OK = 0,
  MT_ERR_ARGUMENT = 1, /* invalid argument or configuration */
  MT_ERR_FORMAT = 2,   /* malformed input file */
  MT_ERR_IO = 3,       /* file could not be read or written */
  MT_ERR_DATA = 4,     /* well-formed but unusable data */
  MT_ERR_STAGE = 5,    /* a pipeline stage failed */
  MT_ERR_INTERNAL = 6  /* unexpected failure */
} mt_status;

MT_API const char* mt_version(void);
MT_API const char* mt_last_error(void);

/* Warnings collected by the most recent stage or run call on this thread. */
MT_API size_t mt_warning_count(void);
MT_API const char* mt_warning(size_t index);

/* Copies a string result into buf (NUL terminated, truncated to cap). The
 * full length without terminator is stored in *len when len is non-null. */

/* ---- configuration ---- */
typedef struct mt_config mt_config;

MT_API mt_status mt_config_create(mt_config** out);
MT_API void mt_config_destroy(mt_config* cfg);
MT_API mt_status mt_config_set(mt_config* cfg, const char* key, const char* value);
MT_API mt_status mt_config_get(const mt_config* cfg, const char* key, char* buf, size_t cap, size_t* len);
/* key = value text, or a run manifest (.json) whose config is reused. */
MT_API mt_status mt_config_load(mt_config* cfg, const char* path);
MT_API mt_status mt_config_parse(mt_config* cfg, const char* text);
MT_API mt_status mt_config_validate(const mt_config* cfg);
MT_API mt_status mt_config_text(const mt_config* cfg, char* buf, size_t cap, size_t* len);
MT_API size_t mt_config_key_count(void);
MT_API const char* mt_config_key(size_t index);

/* Scene path recorded in a run manifest. */
MT_API mt_status mt_manifest_scene(const char* manifest, char* buf, size_t cap, size_t* len);

/* ---- stages (file in, file out) ---- */
/* spec is a preset name (single, two, static) or a synthetic config .json. */
MT_API mt_status mt_synth(const char* spec, uint64_t seed, const char* out_dir);
MT_API mt_status mt_stage_boundaries(const mt_config* cfg, const char* scene, const char* out_dir);
MT_API mt_status mt_stage_mops(const mt_config* cfg, const char* scene, const char* boundaries_dir,
                               const char* out_dir);
MT_API mt_status mt_stage_track(const mt_config* cfg, const char* scene, const char* out_dir);
MT_API mt_status mt_stage_cluster(const mt_config* cfg, const char* trajectories, const char* proposals,
                                  const char* out_dir);
MT_API mt_status mt_stage_tubes(const mt_config* cfg, const char* scene, const char* boundaries_dir,
                                const char* trajectories, const char* clusters, const char* out_dir);
MT_API mt_status mt_stage_rank(const mt_config* cfg, const char* scene, const char* tubes, const char* out_dir);
/* proposals may be NULL. */
MT_API mt_status mt_stage_eval(const mt_config* cfg, const char* scene, const char* ranked,
                               const char* proposals, const char* out_dir);
MT_API mt_status mt_overlay(const char* scene, const char* tube_dir, const char* out_dir);

typedef struct mt_run_summary {
  int motion_proposals;
  int static_proposals;
  int kept_proposals;
  int trajectories;
  int affinity_entries;
  int clusters;
  int tubes;
  int evaluated;
  double average_best_overlap;
  double coverage;
  double det50;
  double det70;
  double top_tube_iou;
} mt_run_summary;

/* summary may be NULL. */
MT_API mt_status mt_run(const mt_config* cfg, const char* scene, const char* out_dir, mt_run_summary* summary);

/* ---- flow fields ---- */
typedef struct mt_flow mt_flow;

/* uv holds width*height interleaved (u,v) pairs, row-major. */
MT_API mt_status mt_flow_create(int width, int height, const float* uv, mt_flow** out);
MT_API mt_status mt_flow_load(const char* path, mt_flow** out);
MT_API mt_status mt_flow_save(const mt_flow* flow, const char* path);
MT_API mt_status mt_flow_size(const mt_flow* flow, int* width, int* height);
MT_API mt_status mt_flow_copy_uv(const mt_flow* flow, float* uv, size_t cap_floats);
MT_API void mt_flow_destroy(mt_flow* flow);

/* ---- trajectory affinities and label propagation ---- */
typedef struct mt_affinity mt_affinity;

MT_API mt_status mt_affinity_create(int n, const int* i, const int* j, const double* w, size_t m,
                                    mt_affinity** out);
MT_API mt_status mt_affinity_load(const char* path, mt_affinity** out);
MT_API mt_status mt_affinity_size(const mt_affinity* a, int* n, size_t* entries);
MT_API void mt_affinity_destroy(mt_affinity* a);

enum { MT_UNLABELED = 0, MT_FOREGROUND = 1, MT_BACKGROUND = 2 };

/* marks[n] in {MT_UNLABELED, MT_FOREGROUND, MT_BACKGROUND}. iters < 0 solves
 * exactly; otherwise runs that many diffusion steps from x = 0.5. x[n]
 * receives the labels; *unreachable (optional) is set when a component had
 * no marked node. */
MT_API mt_status mt_random_walk(const mt_affinity* a, const uint8_t* marks, int iters, double* x,
                                int* unreachable);

/* x^T L x. */
MT_API mt_status mt_quadratic_form(const mt_affinity* a, const double* x, double* out);

/* ---- metrics ---- */
MT_API mt_status mt_tube_iou(const char* tube_dir_a, const char* tube_dir_b, double* out);

#ifdef __cplusplus
}
#endif

#endif /* MOPTUBE_MOPTUBE_H_ */
