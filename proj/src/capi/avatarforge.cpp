#include "avatarforge/avatarforge.h"

#include "binary_io.hpp"
#include "bvh.hpp"
#include "dataset.hpp"
#include "demo.hpp"
#include "error.hpp"
#include "http_server.hpp"
#include "library.hpp"
#include "obj.hpp"
#include "retarget.hpp"
#include "session.hpp"
#include "shape_model.hpp"
#include "skin.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

struct avf_basis {
  avf::shape::BlendShapeBasis basis;
};
struct avf_motion {
  avf::bvh::MotionClip clip;
};
struct avf_skeleton {
  avf::Skeleton skeleton;
};
struct avf_retarget_map {
  avf::retarget::RetargetMap map;
};
struct avf_retargeted {
  avf::retarget::RetargetedClip clip;
};
struct avf_library {
  avf::assets::AssetLibrary library;
};
struct avf_service {
  std::unique_ptr<avf::service::AvatarService> service;
};
struct avf_server {
  std::unique_ptr<avf::service::HttpServer> server;
};

namespace {

namespace fs = std::filesystem;

thread_local std::string lastError;

avf_status fail(avf_status status, const std::string& message) {
  lastError = message;
  return status;
}

// Runs `f`, mapping exceptions onto status codes.
template <typename F>
avf_status guarded(F&& f) {
  try {
    f();
    return AVF_OK;
  } catch (const avf::Error& e) {
    return fail(static_cast<avf_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(AVF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(AVF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AVF_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) {
    throw avf::Error(avf::ErrorCode::InvalidArgument, std::string(what) + " is null");
  }
}

char* copyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) {
    throw std::bad_alloc();
  }
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename T, typename F>
avf_status create(T** out, F&& make) {
  return guarded([&] {
    require(out, "output handle");
    *out = nullptr;
    *out = make();
  });
}

avf::assets::BodyAsset loadBodyAsset(const fs::path& path) {
  const fs::path manifest = fs::is_directory(path) ? path / "asset.json" : path;
  const auto entry = avf::assets::readManifest(manifest);
  if (entry.kind != avf::assets::AssetKind::BodyBasis) {
    throw avf::Error(avf::ErrorCode::InvalidArgument,
                     manifest.generic_string() + " is not a body-basis asset");
  }
  return avf::assets::loadBody(entry);
}

} // namespace

extern "C" {

const char* avf_version(void) {
  return "0.1.0";
}

const char* avf_last_error(void) {
  return lastError.c_str();
}

const char* avf_status_name(avf_status status) {
  if (status == AVF_OK) {
    return "ok";
  }
  if (status >= AVF_ERR_INVALID_ARGUMENT && status <= AVF_ERR_CATALOG) {
    return avf::errorCodeName(static_cast<avf::ErrorCode>(status));
  }
  return "internal";
}

void avf_string_free(char* s) {
  std::free(s);
}

avf_status avf_basis_build(const char* corpus_dir, const char* rest_obj, avf_basis** out) {
  return create(out, [&] {
    require(corpus_dir, "corpus_dir");
    require(rest_obj, "rest_obj");
    const auto corpus = avf::shape::loadCorpusDirectory(corpus_dir);
    const auto rest = avf::assets::loadObj(rest_obj);
    return new avf_basis{avf::shape::buildAttributeBasis(corpus, rest)};
  });
}

avf_status avf_basis_load(const char* path, avf_basis** out) {
  return create(out, [&] {
    require(path, "path");
    const fs::path p(path);
    if (p.extension() == ".json") {
      return new avf_basis{avf::shape::basisFromJson(avf::readFileText(p))};
    }
    return new avf_basis{avf::shape::loadBasis(p)};
  });
}

avf_status avf_basis_save(const avf_basis* basis, const char* path) {
  return guarded([&] {
    require(basis, "basis");
    require(path, "path");
    const fs::path p(path);
    if (p.extension() == ".json") {
      avf::writeFileText(p, avf::shape::basisToJson(basis->basis));
    } else {
      avf::shape::saveBasis(basis->basis, p);
    }
  });
}

void avf_basis_free(avf_basis* basis) {
  delete basis;
}

size_t avf_basis_vertex_count(const avf_basis* basis) {
  return basis ? basis->basis.vertexCount() : 0;
}

size_t avf_basis_face_count(const avf_basis* basis) {
  return basis ? basis->basis.restMesh.faces.size() : 0;
}

size_t avf_basis_attribute_count(const avf_basis* basis) {
  return basis ? basis->basis.attributeCount() : 0;
}

const char* avf_basis_attribute_name(const avf_basis* basis, size_t index) {
  if (basis == nullptr || index >= basis->basis.attributeCount()) {
    return nullptr;
  }
  return basis->basis.attributeNames[index].c_str();
}

avf_status avf_basis_attribute_bounds(const avf_basis* basis, size_t index, double* min,
                                      double* max) {
  return guarded([&] {
    require(basis, "basis");
    if (index >= basis->basis.attributeCount()) {
      throw avf::Error(avf::ErrorCode::Index, "attribute index out of range");
    }
    if (min) {
      *min = basis->basis.weightBounds[index].min;
    }
    if (max) {
      *max = basis->basis.weightBounds[index].max;
    }
  });
}

avf_status avf_basis_describe(const avf_basis* basis, char** out) {
  return guarded([&] {
    require(basis, "basis");
    require(out, "out");
    *out = copyString(avf::shape::describeBasis(basis->basis));
  });
}

avf_status avf_basis_apply(const avf_basis* basis, const double* weights, double* positions_out) {
  return guarded([&] {
    require(basis, "basis");
    require(positions_out, "positions_out");
    const std::size_t m = basis->basis.attributeCount();
    if (m > 0) {
      require(weights, "weights");
    }
    const auto w = avf::shape::ShapeWeights::clamped(basis->basis,
                                                     std::vector<double>(weights, weights + m));
    const avf::Mesh mesh = avf::shape::applyShape(basis->basis, w);
    for (std::size_t v = 0; v < mesh.vertexCount(); ++v) {
      for (int c = 0; c < 3; ++c) {
        positions_out[3 * v + c] = mesh.vertices[v][c];
      }
    }
  });
}

avf_status avf_motion_load(const char* path, avf_motion** out) {
  return create(out, [&] {
    require(path, "path");
    return new avf_motion{avf::bvh::loadBvh(path)};
  });
}

avf_status avf_motion_save(const avf_motion* motion, const char* path) {
  return guarded([&] {
    require(motion, "motion");
    require(path, "path");
    avf::bvh::saveBvh(motion->clip, path);
  });
}

void avf_motion_free(avf_motion* motion) {
  delete motion;
}

size_t avf_motion_joint_count(const avf_motion* motion) {
  return motion ? motion->clip.skeleton.size() : 0;
}

size_t avf_motion_frame_count(const avf_motion* motion) {
  return motion ? motion->clip.frameCount() : 0;
}

size_t avf_motion_channel_count(const avf_motion* motion) {
  return motion ? motion->clip.channelCount() : 0;
}

double avf_motion_frame_time(const avf_motion* motion) {
  return motion ? motion->clip.frameTime : 0.0;
}

const char* avf_motion_joint_name(const avf_motion* motion, size_t joint) {
  if (motion == nullptr || joint >= motion->clip.skeleton.size()) {
    return nullptr;
  }
  return motion->clip.skeleton.joint(joint).name.c_str();
}

int avf_motion_joint_parent(const avf_motion* motion, size_t joint) {
  if (motion == nullptr || joint >= motion->clip.skeleton.size()) {
    return -1;
  }
  return motion->clip.skeleton.joint(joint).parent;
}

avf_status avf_motion_describe(const avf_motion* motion, char** out) {
  return guarded([&] {
    require(motion, "motion");
    require(out, "out");
    *out = copyString(avf::bvh::describeClip(motion->clip));
  });
}

avf_status avf_skeleton_load(const char* path, avf_skeleton** out) {
  return create(out, [&] {
    require(path, "path");
    return new avf_skeleton{avf::retarget::loadSkeleton(path)};
  });
}

void avf_skeleton_free(avf_skeleton* skeleton) {
  delete skeleton;
}

size_t avf_skeleton_joint_count(const avf_skeleton* skeleton) {
  return skeleton ? skeleton->skeleton.size() : 0;
}

const char* avf_skeleton_joint_name(const avf_skeleton* skeleton, size_t joint) {
  if (skeleton == nullptr || joint >= skeleton->skeleton.size()) {
    return nullptr;
  }
  return skeleton->skeleton.joint(joint).name.c_str();
}

avf_status avf_retarget_map_build(const avf_motion* source, const avf_skeleton* target,
                                  const char* map_json_path, avf_retarget_map** out) {
  return create(out, [&] {
    require(source, "source");
    require(target, "target");
    avf::retarget::MapOptions options;
    if (map_json_path != nullptr) {
      options = avf::retarget::loadMapOptions(map_json_path);
    }
    return new avf_retarget_map{
        avf::retarget::buildRetargetMap(source->clip.skeleton, target->skeleton, options)};
  });
}

void avf_retarget_map_free(avf_retarget_map* map) {
  delete map;
}

double avf_retarget_map_scale(const avf_retarget_map* map) {
  return map ? map->map.scale : 0.0;
}

size_t avf_retarget_map_pair_count(const avf_retarget_map* map) {
  return map ? map->map.pairs.size() : 0;
}

size_t avf_retarget_map_warning_count(const avf_retarget_map* map) {
  return map ? map->map.warnings.size() : 0;
}

const char* avf_retarget_map_warning(const avf_retarget_map* map, size_t index) {
  if (map == nullptr || index >= map->map.warnings.size()) {
    return nullptr;
  }
  return map->map.warnings[index].c_str();
}

avf_status avf_retarget_apply(const avf_motion* source, const avf_skeleton* target,
                              const avf_retarget_map* map, avf_retargeted** out) {
  return create(out, [&] {
    require(source, "source");
    require(target, "target");
    require(map, "map");
    return new avf_retargeted{avf::retarget::retargetClip(source->clip, target->skeleton, map->map)};
  });
}

void avf_retargeted_free(avf_retargeted* clip) {
  delete clip;
}

size_t avf_retargeted_frame_count(const avf_retargeted* clip) {
  return clip ? clip->clip.poses.size() : 0;
}

avf_status avf_retargeted_joint_positions(const avf_retargeted* clip, size_t frame,
                                          double* positions_out) {
  return guarded([&] {
    require(clip, "clip");
    require(positions_out, "positions_out");
    if (frame >= clip->clip.poses.size()) {
      throw avf::Error(avf::ErrorCode::Index, "frame out of range");
    }
    const auto world = avf::forwardKinematics(clip->clip.skeleton, clip->clip.poses[frame]);
    for (std::size_t j = 0; j < world.size(); ++j) {
      for (int c = 0; c < 3; ++c) {
        positions_out[3 * j + c] = world[j].translation[c];
      }
    }
  });
}

avf_status avf_retargeted_save_bvh(const avf_retargeted* clip, const char* path) {
  return guarded([&] {
    require(clip, "clip");
    require(path, "path");
    avf::bvh::saveBvh(
        avf::bvh::clipFromPoses(clip->clip.skeleton, clip->clip.poses, clip->clip.frameTime), path);
  });
}

avf_status avf_retargeted_save_pose_binary(const avf_retargeted* clip, const char* path) {
  return guarded([&] {
    require(clip, "clip");
    require(path, "path");
    avf::writeFileBytes(path, avf::retarget::encodePoseBinary(clip->clip));
  });
}

avf_status avf_garment_prepare(const char* body_asset, const char* cloth_obj, double epsilon,
                               const char* id, const char* name, const char* out_dir,
                               avf_garment_report* report) {
  return guarded([&] {
    require(body_asset, "body_asset");
    require(cloth_obj, "cloth_obj");
    require(id, "id");
    require(out_dir, "out_dir");
    if (!(epsilon > 0.0)) {
      throw avf::Error(avf::ErrorCode::InvalidArgument, "epsilon must be positive");
    }
    const auto body = loadBodyAsset(body_asset);
    const avf::Mesh cloth = avf::assets::loadObj(cloth_obj);
    avf::skin::PenetrationReport penetration;
    auto garment = avf::skin::prepareGarment(body.basis.restMesh, body.binding, cloth, epsilon,
                                             &penetration);
    garment.id = id;
    avf::assets::writeGarment(garment, name ? name : id, out_dir);
    if (report) {
      report->vertices = garment.mesh.vertexCount();
      report->moved = penetration.moved;
      report->unresolved = penetration.unresolved;
      report->max_displacement = penetration.maxDisplacement;
    }
  });
}

avf_status avf_library_scan(const char* dir, avf_library** out) {
  return create(out, [&] {
    require(dir, "dir");
    return new avf_library{avf::assets::scanLibrary(dir)};
  });
}

void avf_library_free(avf_library* library) {
  delete library;
}

size_t avf_library_count(const avf_library* library) {
  return library ? library->library.entries.size() : 0;
}

const char* avf_library_asset_id(const avf_library* library, size_t index) {
  if (library == nullptr || index >= library->library.entries.size()) {
    return nullptr;
  }
  return library->library.entries[index].id.c_str();
}

const char* avf_library_asset_kind(const avf_library* library, size_t index) {
  if (library == nullptr || index >= library->library.entries.size()) {
    return nullptr;
  }
  return avf::assets::assetKindName(library->library.entries[index].kind);
}

avf_status avf_library_json(const avf_library* library, char** out) {
  return guarded([&] {
    require(library, "library");
    require(out, "out");
    *out = copyString(avf::assets::libraryToJson(library->library));
  });
}

avf_status avf_demo_write(const char* dir, const char* corpus_dir) {
  return guarded([&] {
    require(dir, "dir");
    avf::demo::writeLibrary(dir, corpus_dir ? fs::path(corpus_dir) : fs::path());
  });
}

avf_status avf_generate(const char* config_path, avf_generate_summary* summary) {
  return guarded([&] {
    require(config_path, "config_path");
    const auto result = avf::dataset::runGeneration(avf::dataset::loadConfig(config_path));
    if (summary) {
      summary->combinations = result.combinations;
      summary->failed = result.failed;
      summary->frames = result.frames;
      summary->files = result.files;
    }
  });
}

avf_status avf_service_create(const char* library_dir, const char* body_id,
                              unsigned idle_timeout_seconds, avf_service** out) {
  return create(out, [&] {
    require(library_dir, "library_dir");
    avf::service::ServiceOptions options;
    options.library = library_dir;
    options.bodyId = body_id ? body_id : "";
    if (idle_timeout_seconds > 0) {
      options.idleTimeout = std::chrono::seconds(idle_timeout_seconds);
    }
    return new avf_service{std::make_unique<avf::service::AvatarService>(options)};
  });
}

void avf_service_free(avf_service* service) {
  delete service;
}

avf_status avf_server_create(avf_service* service, const char* static_dir, avf_server** out) {
  return create(out, [&] {
    require(service, "service");
    std::optional<fs::path> dir;
    if (static_dir != nullptr) {
      dir = fs::path(static_dir);
    }
    return new avf_server{std::make_unique<avf::service::HttpServer>(*service->service, dir)};
  });
}

avf_status avf_server_bind(avf_server* server, const char* host, int port, int* bound_port) {
  return guarded([&] {
    require(server, "server");
    require(host, "host");
    if (port < 0 || port > 65535) {
      throw avf::Error(avf::ErrorCode::InvalidArgument, "port out of range");
    }
    const int bound = server->server->bind(host, port);
    if (bound_port) {
      *bound_port = bound;
    }
  });
}

avf_status avf_server_run(avf_server* server) {
  return guarded([&] {
    require(server, "server");
    server->server->run();
  });
}

void avf_server_stop(avf_server* server) {
  if (server) {
    server->server->stop();
  }
}

void avf_server_free(avf_server* server) {
  delete server;
}

} // extern "C"
