#include "dataset.hpp"

#include "binary_io.hpp"
#include "error.hpp"
#include "gltf.hpp"
#include "hash.hpp"
#include "library.hpp"
#include "obj.hpp"
#include "pipeline.hpp"
#include "retarget.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <set>
#include <variant>

namespace avf::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolvePath(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string numbered(const char* prefix, std::size_t n, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%04zu%s", prefix, n, suffix);
  return buf;
}

struct LoadedMotion {
  std::string label;
  retarget::RetargetedClip clip;
  std::vector<std::string> warnings;
};

template <typename T>
using Loaded = std::variant<T, std::string>; // value or failure message

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string(errorCodeName(err->code())) + ": " + err->what();
  }
  return e.what();
}

void writeNormals(const fs::path& path, const pipeline::PosedAvatar& posed) {
  ByteWriter w;
  w.fixedString("AVNRM", 8);
  w.u32(kDatasetBinaryVersion);
  std::size_t n = posed.body.normals.size();
  for (const Mesh& g : posed.garments) {
    n += g.normals.size();
  }
  w.u32(static_cast<std::uint32_t>(n));
  auto put = [&](const Mesh& m) {
    for (const Vec3& v : m.normals) {
      w.f32(static_cast<float>(v.x()));
      w.f32(static_cast<float>(v.y()));
      w.f32(static_cast<float>(v.z()));
    }
  };
  put(posed.body);
  for (const Mesh& g : posed.garments) {
    put(g);
  }
  writeFileBytes(path, w.bytes());
}

void writeSegmentation(const fs::path& path, const std::vector<std::uint32_t>& labels,
                       std::uint32_t labelCount) {
  ByteWriter w;
  w.fixedString("AVSEG", 8);
  w.u32(kDatasetBinaryVersion);
  w.u32(static_cast<std::uint32_t>(labels.size()));
  w.u32(labelCount);
  for (auto l : labels) {
    w.u32(l);
  }
  writeFileBytes(path, w.bytes());
}

void prepareOutputDir(const GenerationConfig& cfg) {
  std::error_code ec;
  if (fs::exists(cfg.outputDir, ec)) {
    if (!fs::is_directory(cfg.outputDir)) {
      throw Error(ErrorCode::Conflict, "output path is not a directory: " +
                                           cfg.outputDir.generic_string());
    }
    if (!fs::is_empty(cfg.outputDir)) {
      if (!cfg.overwrite) {
        throw Error(ErrorCode::Conflict, "output directory is not empty: " +
                                             cfg.outputDir.generic_string() +
                                             " (set \"overwrite\": true)");
      }
      for (const auto& entry : fs::directory_iterator(cfg.outputDir)) {
        fs::remove_all(entry.path());
      }
    }
  }
  fs::create_directories(cfg.outputDir);
}

} // namespace

void GenerationConfig::validate() const {
  if (stride < 1) {
    throw Error(ErrorCode::InvalidArgument, "stride must be at least 1");
  }
  if (!outputs.any()) {
    throw Error(ErrorCode::InvalidArgument, "at least one output kind is required");
  }
  if (shapes.empty() && (!sampling || sampling->count == 0)) {
    throw Error(ErrorCode::InvalidArgument, "no shapes: give \"shapes\" or \"sampling\"");
  }
  if (motions.empty()) {
    throw Error(ErrorCode::InvalidArgument, "at least one motion is required");
  }
  if (garmentSets.empty()) {
    throw Error(ErrorCode::InvalidArgument, "garment_sets must not be empty (use [[]])");
  }
  if (outputDir.empty()) {
    throw Error(ErrorCode::InvalidArgument, "output_dir is required");
  }
  if (library.empty() && bodyFiles.empty()) {
    throw Error(ErrorCode::InvalidArgument, "either \"library\" or explicit body files required");
  }
  if (sampling) {
    for (const auto& [name, range] : sampling->ranges) {
      if (!(range.first <= range.second)) {
        throw Error(ErrorCode::InvalidArgument, "sampling range for " + name + " is empty");
      }
    }
  }
  if (maxFrames && *maxFrames == 0) {
    throw Error(ErrorCode::InvalidArgument, "max_frames must be positive");
  }
}

GenerationConfig parseConfig(const std::string& jsonText, const fs::path& baseDir) {
  GenerationConfig cfg;
  try {
    const json j = json::parse(jsonText);
    if (!j.is_object()) {
      throw Error(ErrorCode::Parse, "config must be a JSON object");
    }
    static const std::set<std::string> known = {
        "library", "body",   "shapes",  "sampling",   "garment_sets", "motions",
        "stride",  "max_frames", "outputs", "output_dir", "overwrite"};
    for (const auto& [key, _] : j.items()) {
      if (!known.count(key)) {
        throw Error(ErrorCode::Parse, "unknown config key \"" + key + "\"");
      }
    }
    if (j.contains("library")) {
      cfg.library = resolvePath(baseDir, j["library"].get<std::string>());
    }
    if (j.contains("body")) {
      if (j["body"].is_string()) {
        cfg.body = j["body"].get<std::string>();
      } else {
        for (const char* role : {"basis", "skeleton", "weights"}) {
          cfg.bodyFiles[role] = resolvePath(baseDir, j["body"].at(role).get<std::string>());
        }
      }
    }
    if (j.contains("shapes")) {
      cfg.shapes = j["shapes"].get<std::vector<std::vector<double>>>();
    }
    if (j.contains("sampling")) {
      const json& s = j["sampling"];
      ShapeSampling sampling;
      if (!s.contains("seed")) {
        throw Error(ErrorCode::InvalidArgument, "sampling requires a seed");
      }
      sampling.seed = s["seed"].get<std::uint64_t>();
      sampling.count = s.at("count").get<std::size_t>();
      if (s.contains("ranges")) {
        for (const auto& [name, r] : s["ranges"].items()) {
          sampling.ranges[name] = {r.at(0).get<double>(), r.at(1).get<double>()};
        }
      }
      cfg.sampling = sampling;
    }
    if (j.contains("garment_sets")) {
      cfg.garmentSets = j["garment_sets"].get<std::vector<std::vector<std::string>>>();
    }
    for (const json& m : j.value("motions", json::array())) {
      GenerationConfig::Motion motion;
      if (m.is_string()) {
        motion.label = m.get<std::string>();
        if (fs::path(motion.label).extension() == ".bvh") {
          motion.bvh = resolvePath(baseDir, motion.label);
        }
      } else {
        motion.label = m.at("bvh").get<std::string>();
        motion.bvh = resolvePath(baseDir, motion.label);
        if (m.contains("map")) {
          motion.map = resolvePath(baseDir, m["map"].get<std::string>());
        }
      }
      cfg.motions.push_back(std::move(motion));
    }
    if (j.contains("stride")) {
      const auto stride = j["stride"].get<std::int64_t>();
      if (stride < 1) {
        throw Error(ErrorCode::InvalidArgument, "stride must be at least 1");
      }
      cfg.stride = static_cast<std::size_t>(stride);
    }
    if (j.contains("max_frames")) {
      cfg.maxFrames = j["max_frames"].get<std::size_t>();
    }
    if (j.contains("outputs")) {
      cfg.outputs = OutputKinds{false, false, false, false, false};
      for (const auto& k : j["outputs"]) {
        const std::string kind = k.get<std::string>();
        if (kind == "mesh") {
          cfg.outputs.mesh = true;
        } else if (kind == "gltf") {
          cfg.outputs.gltf = true;
        } else if (kind == "joints3d") {
          cfg.outputs.joints3d = true;
        } else if (kind == "segmentation") {
          cfg.outputs.segmentation = true;
        } else if (kind == "normals") {
          cfg.outputs.normals = true;
        } else {
          throw Error(ErrorCode::InvalidArgument, "unknown output kind \"" + kind + "\"");
        }
      }
    }
    if (j.contains("output_dir")) {
      cfg.outputDir = resolvePath(baseDir, j["output_dir"].get<std::string>());
    }
    cfg.overwrite = j.value("overwrite", false);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("generation config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

GenerationConfig loadConfig(const fs::path& path) {
  return parseConfig(readFileText(path), path.parent_path());
}

std::vector<double> sampleShape(const ShapeSampling& sampling,
                                const std::vector<std::string>& attributeNames,
                                const std::vector<std::pair<double, double>>& bounds,
                                std::size_t index) {
  std::vector<double> out;
  for (std::size_t a = 0; a < attributeNames.size(); ++a) {
    auto [lo, hi] = bounds.at(a);
    if (auto it = sampling.ranges.find(attributeNames[a]); it != sampling.ranges.end()) {
      lo = it->second.first;
      hi = it->second.second;
    }
    out.push_back(lo + (hi - lo) * keyedUniform(sampling.seed, index, a));
  }
  return out;
}

RunSummary runGeneration(const GenerationConfig& cfg) {
  cfg.validate();

  std::optional<assets::AssetLibrary> library;
  if (!cfg.library.empty()) {
    library = assets::scanLibrary(cfg.library);
  }

  assets::AssetEntry bodyEntry;
  if (!cfg.bodyFiles.empty()) {
    bodyEntry.id = "body";
    bodyEntry.kind = assets::AssetKind::BodyBasis;
    bodyEntry.files = cfg.bodyFiles;
  } else if (!cfg.body.empty()) {
    const auto* e = library->find(cfg.body);
    if (e == nullptr) {
      throw Error(ErrorCode::NotFound, "body asset '" + cfg.body + "' not in the library");
    }
    bodyEntry = *e;
  } else {
    const auto bodies = library->ofKind(assets::AssetKind::BodyBasis);
    if (bodies.size() != 1) {
      throw Error(ErrorCode::InvalidArgument,
                  "library has " + std::to_string(bodies.size()) +
                      " body assets; name one with \"body\"");
    }
    bodyEntry = *bodies.front();
  }
  const assets::BodyAsset body = assets::loadBody(bodyEntry);
  const auto& basis = body.basis;

  if (cfg.sampling) {
    for (const auto& [name, range] : cfg.sampling->ranges) {
      if (std::find(basis.attributeNames.begin(), basis.attributeNames.end(), name) ==
          basis.attributeNames.end()) {
        throw Error(ErrorCode::NotFound, "sampling range names unknown attribute " + name);
      }
    }
  }

  std::vector<shape::ShapeWeights> shapes;
  for (const auto& w : cfg.shapes) {
    shapes.push_back(shape::ShapeWeights::clamped(basis, w));
  }
  if (cfg.sampling) {
    std::vector<std::pair<double, double>> bounds;
    for (const auto& b : basis.weightBounds) {
      bounds.emplace_back(b.min, b.max);
    }
    for (std::size_t i = 0; i < cfg.sampling->count; ++i) {
      shapes.push_back(shape::ShapeWeights::clamped(
          basis, sampleShape(*cfg.sampling, basis.attributeNames, bounds, i)));
    }
  }

  std::set<std::string> garmentIds;
  for (const auto& set : cfg.garmentSets) {
    garmentIds.insert(set.begin(), set.end());
  }
  std::map<std::string, std::uint32_t> garmentLabel;
  std::map<std::string, Loaded<skin::GarmentAsset>> garments;
  for (const auto& id : garmentIds) {
    garmentLabel[id] = static_cast<std::uint32_t>(garmentLabel.size());
    try {
      const auto* e = library ? library->find(id) : nullptr;
      if (e == nullptr) {
        throw Error(ErrorCode::NotFound, "garment '" + id + "' not in the library");
      }
      garments.emplace(id, assets::loadGarment(*e, &body.skeleton));
    } catch (const std::exception& ex) {
      garments.emplace(id, describe(ex));
    }
  }

  std::vector<Loaded<LoadedMotion>> motions;
  for (const auto& m : cfg.motions) {
    try {
      bvh::MotionClip clip;
      retarget::MapOptions options;
      if (m.bvh) {
        clip = bvh::loadBvh(*m.bvh);
        if (m.map) {
          options = retarget::loadMapOptions(*m.map);
        }
      } else {
        const auto* e = library ? library->find(m.label) : nullptr;
        if (e == nullptr) {
          throw Error(ErrorCode::NotFound, "motion '" + m.label + "' not in the library");
        }
        auto asset = assets::loadMotion(*e);
        clip = std::move(asset.clip);
        options = std::move(asset.map);
      }
      const auto map = retarget::buildRetargetMap(clip.skeleton, body.skeleton, options);
      motions.emplace_back(
          LoadedMotion{m.label, retarget::retargetClip(clip, body.skeleton, map), map.warnings});
    } catch (const std::exception& ex) {
      motions.emplace_back(describe(ex));
    }
  }

  prepareOutputDir(cfg);

  RunSummary summary;
  json combos = json::array();
  const std::size_t nShapes = shapes.size();
  const std::size_t nSets = cfg.garmentSets.size();
  const std::size_t nMotions = motions.size();
  for (std::size_t s = 0; s < nShapes; ++s) {
    for (std::size_t g = 0; g < nSets; ++g) {
      std::optional<Loaded<pipeline::DressedAvatar>> dressed;
      const auto& set = cfg.garmentSets[g];
      for (std::size_t m = 0; m < nMotions; ++m) {
        const std::size_t index = (s * nSets + g) * nMotions + m;
        const std::string dirName = numbered("combo_", index, "");
        const fs::path dir = cfg.outputDir / dirName;
        json record = {{"index", index},
                       {"directory", dirName},
                       {"shape", shapes[s].values()},
                       {"garments", set},
                       {"motion", cfg.motions[m].label}};
        ++summary.combinations;
        try {
          if (const auto* err = std::get_if<std::string>(&motions[m])) {
            throw Error(ErrorCode::InvalidArgument, "motion failed to load: " + *err);
          }
          const LoadedMotion& motion = std::get<LoadedMotion>(motions[m]);
          if (!dressed) {
            try {
              std::vector<const skin::GarmentAsset*> parts;
              for (const auto& id : set) {
                if (const auto* err = std::get_if<std::string>(&garments.at(id))) {
                  throw Error(ErrorCode::InvalidArgument,
                              "garment '" + id + "' failed to load: " + *err);
                }
                parts.push_back(&std::get<skin::GarmentAsset>(garments.at(id)));
              }
              dressed = pipeline::dress(body, shapes[s], parts);
            } catch (const std::exception& ex) {
              dressed = describe(ex);
            }
          }
          if (const auto* err = std::get_if<std::string>(&*dressed)) {
            throw Error(ErrorCode::InvalidArgument, "dressing failed: " + *err);
          }
          const auto& avatar = std::get<pipeline::DressedAvatar>(*dressed);

          std::size_t limit = motion.clip.poses.size();
          if (cfg.maxFrames) {
            limit = std::min(limit, *cfg.maxFrames);
          }
          std::vector<std::size_t> frames;
          for (std::size_t f = 0; f < limit; f += cfg.stride) {
            frames.push_back(f);
          }
          fs::create_directories(dir);

          std::string csv = "frame,joint,x,y,z\n";
          std::vector<Pose> sampled;
          for (std::size_t f : frames) {
            const Pose& p = motion.clip.poses[f];
            sampled.push_back(p);
            const auto posed = pipeline::pose(avatar, body.binding, p);
            if (cfg.outputs.mesh) {
              std::vector<std::pair<std::string, const Mesh*>> objects = {{"body", &posed.body}};
              for (std::size_t k = 0; k < posed.garments.size(); ++k) {
                objects.emplace_back(set[k], &posed.garments[k]);
              }
              writeFileText(dir / numbered("frame_", f, ".obj"), assets::exportObjScene(objects));
            }
            if (cfg.outputs.normals) {
              writeNormals(dir / numbered("frame_", f, ".normals.bin"), posed);
            }
            if (cfg.outputs.joints3d) {
              for (std::size_t j = 0; j < posed.joints.size(); ++j) {
                const Vec3& x = posed.joints[j];
                csv += std::to_string(f) + "," + body.skeleton.joint(j).name + "," +
                       assets::formatNumber(x.x()) + "," + assets::formatNumber(x.y()) + "," +
                       assets::formatNumber(x.z()) + "\n";
              }
            }
          }
          if (cfg.outputs.joints3d) {
            writeFileText(dir / "joints.csv", csv);
          }
          if (cfg.outputs.segmentation) {
            std::vector<std::uint32_t> labels;
            for (const auto& id : set) {
              labels.push_back(garmentLabel.at(id));
            }
            writeSegmentation(
                dir / "segmentation.bin", pipeline::segmentation(avatar, body.binding, labels),
                static_cast<std::uint32_t>(pipeline::kGarmentLabelBase + garmentLabel.size()));
          }
          if (cfg.outputs.gltf) {
            assets::GltfScene scene;
            scene.skeleton = body.skeleton;
            scene.parts.push_back({"body", &avatar.body, &body.binding, {}});
            for (const auto& dg : avatar.garments) {
              scene.parts.push_back({dg.id, &dg.mesh, &dg.binding, {}});
            }
            scene.poses = sampled;
            scene.frameTime = motion.clip.frameTime * static_cast<double>(cfg.stride);
            assets::saveGlb(scene, dir / "animation.glb");
          }
          summary.frames += frames.size();
          record["status"] = "ok";
          record["frames"] = frames;
          if (!motion.warnings.empty()) {
            record["warnings"] = motion.warnings;
          }
        } catch (const std::exception& ex) {
          std::error_code ec;
          fs::remove_all(dir, ec);
          ++summary.failed;
          record["status"] = "failed";
          record["error"] = describe(ex);
        }
        combos.push_back(std::move(record));
      }
    }
  }

  json labels = json::array();
  for (int g = 0; g < retarget::kBodyGroupCount; ++g) {
    labels.push_back({{"value", g},
                      {"name", retarget::bodyGroupName(static_cast<retarget::BodyGroup>(g))}});
  }
  for (const auto& [id, label] : garmentLabel) {
    labels.push_back({{"value", pipeline::kGarmentLabelBase + label}, {"name", id}});
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(cfg.outputDir)) {
    if (entry.is_regular_file()) {
      files.push_back(entry.path().lexically_relative(cfg.outputDir));
    }
  }
  std::sort(files.begin(), files.end());
  json fileList = json::array();
  for (const auto& rel : files) {
    if (rel == "manifest.json") {
      continue;
    }
    const fs::path abs = cfg.outputDir / rel;
    fileList.push_back({{"path", rel.generic_string()},
                        {"bytes", fs::file_size(abs)},
                        {"sha256", sha256File(abs)}});
  }
  summary.files = fileList.size();

  const json manifest = {
      {"format", "avf-dataset"},
      {"version", kDatasetBinaryVersion},
      {"body", bodyEntry.id},
      {"attributes", basis.attributeNames},
      {"stride", cfg.stride},
      {"seed", cfg.sampling ? json(cfg.sampling->seed) : json(nullptr)},
      {"labels", labels},
      {"combinations", combos},
      {"summary",
       {{"combinations", summary.combinations},
        {"failed", summary.failed},
        {"frames", summary.frames}}},
      {"files", fileList}};
  summary.manifest = cfg.outputDir / "manifest.json";
  writeFileText(summary.manifest, manifest.dump(2) + "\n");
  return summary;
}

} // namespace avf::dataset
