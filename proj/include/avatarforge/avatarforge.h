#ifndef AVATARFORGE_H
#define AVATARFORGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32) && defined(AVF_BUILDING_LIBRARY)
#define AVF_API __declspec(dllexport)
#elif defined(_WIN32)
#define AVF_API __declspec(dllimport)
#else
#define AVF_API __attribute__((visibility("default")))
#endif

/* Every fallible call returns a status. On failure the message is available
   from avf_last_error() on the same thread until the next failing call. */
typedef enum avf_status {
  AVF_OK = 0,
  AVF_ERR_INVALID_ARGUMENT = 1,
  AVF_ERR_PARSE = 2,
  AVF_ERR_IO = 3,
  AVF_ERR_DIMENSION = 4,
  AVF_ERR_DEGENERATE = 5,
  AVF_ERR_UNMAPPED_BONE = 6,
  AVF_ERR_CONFLICT = 7,
  AVF_ERR_GEOMETRY = 8,
  AVF_ERR_INDEX = 9,
  AVF_ERR_CORPUS = 10,
  AVF_ERR_NOT_FOUND = 11,
  AVF_ERR_CATALOG = 12,
  AVF_ERR_INTERNAL = 100
} avf_status;

typedef struct avf_basis avf_basis;
typedef struct avf_motion avf_motion;
typedef struct avf_skeleton avf_skeleton;
typedef struct avf_retarget_map avf_retarget_map;
typedef struct avf_retargeted avf_retargeted;
typedef struct avf_library avf_library;
typedef struct avf_service avf_service;
typedef struct avf_server avf_server;

AVF_API const char* avf_version(void);
AVF_API const char* avf_last_error(void);
AVF_API const char* avf_status_name(avf_status status);
/* Frees strings returned through char** out-parameters. */
AVF_API void avf_string_free(char* s);

/* Blendshape basis */
AVF_API avf_status avf_basis_build(const char* corpus_dir, const char* rest_obj, avf_basis** out);
AVF_API avf_status avf_basis_load(const char* path, avf_basis** out);
/* ".json" writes the JSON debug form, anything else the binary container. */
AVF_API avf_status avf_basis_save(const avf_basis* basis, const char* path);
AVF_API void avf_basis_free(avf_basis* basis);
AVF_API size_t avf_basis_vertex_count(const avf_basis* basis);
AVF_API size_t avf_basis_face_count(const avf_basis* basis);
AVF_API size_t avf_basis_attribute_count(const avf_basis* basis);
/* Valid while the basis lives; NULL when out of range. */
AVF_API const char* avf_basis_attribute_name(const avf_basis* basis, size_t index);
AVF_API avf_status avf_basis_attribute_bounds(const avf_basis* basis, size_t index, double* min,
                                              double* max);
/* Human readable summary. */
AVF_API avf_status avf_basis_describe(const avf_basis* basis, char** out);
/* Writes vertex_count * 3 doubles. `weights` holds attribute_count values,
   clamped to the bounds. */
AVF_API avf_status avf_basis_apply(const avf_basis* basis, const double* weights,
                                   double* positions_out);

/* BVH motion */
AVF_API avf_status avf_motion_load(const char* path, avf_motion** out);
AVF_API avf_status avf_motion_save(const avf_motion* motion, const char* path);
AVF_API void avf_motion_free(avf_motion* motion);
AVF_API size_t avf_motion_joint_count(const avf_motion* motion);
AVF_API size_t avf_motion_frame_count(const avf_motion* motion);
AVF_API size_t avf_motion_channel_count(const avf_motion* motion);
AVF_API double avf_motion_frame_time(const avf_motion* motion);
AVF_API const char* avf_motion_joint_name(const avf_motion* motion, size_t joint);
AVF_API int avf_motion_joint_parent(const avf_motion* motion, size_t joint);
AVF_API avf_status avf_motion_describe(const avf_motion* motion, char** out);

/* Skeleton from JSON, or the hierarchy of a .bvh file. */
AVF_API avf_status avf_skeleton_load(const char* path, avf_skeleton** out);
AVF_API void avf_skeleton_free(avf_skeleton* skeleton);
AVF_API size_t avf_skeleton_joint_count(const avf_skeleton* skeleton);
AVF_API const char* avf_skeleton_joint_name(const avf_skeleton* skeleton, size_t joint);

/* Retargeting. `map_json_path` may be NULL. */
AVF_API avf_status avf_retarget_map_build(const avf_motion* source, const avf_skeleton* target,
                                          const char* map_json_path, avf_retarget_map** out);
AVF_API void avf_retarget_map_free(avf_retarget_map* map);
AVF_API double avf_retarget_map_scale(const avf_retarget_map* map);
AVF_API size_t avf_retarget_map_pair_count(const avf_retarget_map* map);
AVF_API size_t avf_retarget_map_warning_count(const avf_retarget_map* map);
AVF_API const char* avf_retarget_map_warning(const avf_retarget_map* map, size_t index);
AVF_API avf_status avf_retarget_apply(const avf_motion* source, const avf_skeleton* target,
                                      const avf_retarget_map* map, avf_retargeted** out);
AVF_API void avf_retargeted_free(avf_retargeted* clip);
AVF_API size_t avf_retargeted_frame_count(const avf_retargeted* clip);
/* Writes joint_count * 3 doubles of world joint positions at `frame`. */
AVF_API avf_status avf_retargeted_joint_positions(const avf_retargeted* clip, size_t frame,
                                                  double* positions_out);
AVF_API avf_status avf_retargeted_save_bvh(const avf_retargeted* clip, const char* path);
AVF_API avf_status avf_retargeted_save_pose_binary(const avf_retargeted* clip, const char* path);

/* Garment preparation against a body-basis asset (asset.json or its
   directory) at rest shape. Writes a garment asset directory. */
typedef struct avf_garment_report {
  size_t vertices;
  size_t moved;
  size_t unresolved;
  double max_displacement;
} avf_garment_report;

AVF_API avf_status avf_garment_prepare(const char* body_asset, const char* cloth_obj,
                                       double epsilon, const char* id, const char* name,
                                       const char* out_dir, avf_garment_report* report);

/* Asset library */
AVF_API avf_status avf_library_scan(const char* dir, avf_library** out);
AVF_API void avf_library_free(avf_library* library);
AVF_API size_t avf_library_count(const avf_library* library);
AVF_API const char* avf_library_asset_id(const avf_library* library, size_t index);
/* "body-basis", "garment" or "motion". */
AVF_API const char* avf_library_asset_kind(const avf_library* library, size_t index);
AVF_API avf_status avf_library_json(const avf_library* library, char** out);
/* Synthetic demo library; `corpus_dir` (may be NULL) also receives an OBJ
   attribute corpus and rest mesh. */
AVF_API avf_status avf_demo_write(const char* dir, const char* corpus_dir);

/* Batch dataset generation */
typedef struct avf_generate_summary {
  size_t combinations;
  size_t failed;
  size_t frames;
  size_t files;
} avf_generate_summary;

AVF_API avf_status avf_generate(const char* config_path, avf_generate_summary* summary);

/* Session service. `body_id` may be NULL (first body asset). */
AVF_API avf_status avf_service_create(const char* library_dir, const char* body_id,
                                      unsigned idle_timeout_seconds, avf_service** out);
AVF_API void avf_service_free(avf_service* service);
/* `static_dir` may be NULL. The service must outlive the server. */
AVF_API avf_status avf_server_create(avf_service* service, const char* static_dir,
                                     avf_server** out);
/* Port 0 picks a free port; the bound port is written to `bound_port`. */
AVF_API avf_status avf_server_bind(avf_server* server, const char* host, int port,
                                   int* bound_port);
/* Blocks until avf_server_stop is called from another thread. */
AVF_API avf_status avf_server_run(avf_server* server);
AVF_API void avf_server_stop(avf_server* server);
AVF_API void avf_server_free(avf_server* server);

#ifdef __cplusplus
}
#endif

#endif
