#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace avf::dataset {

struct ShapeSampling {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  // Attribute name -> [lo, hi]; attributes not listed use the basis bounds.
  std::map<std::string, std::pair<double, double>> ranges;
};

struct OutputKinds {
  bool mesh = true; // OBJ per frame
  bool gltf = false; // one animated GLB per combination
  bool joints3d = true;
  bool segmentation = true;
  bool normals = true;

  bool any() const {
    return mesh || gltf || joints3d || segmentation || normals;
  }
};

/// Config file (JSON), relative paths resolved against the file's directory:
///   {"library": "assets",
///    "body": "body-demo" | {"basis": .., "skeleton": .., "weights": ..},
///    "shapes": [[0, 0, ...], ...],
///    "sampling": {"count": 4, "seed": 7, "ranges": {"height": [-1, 1]}},
///    "garment_sets": [[], ["garment-shirt"]],
///    "motions": ["motion-walk", "clips/run.bvh",
///                {"bvh": "clips/jump.bvh", "map": "clips/jump.map.json"}],
///    "stride": 5, "max_frames": 20,
///    "outputs": ["mesh", "gltf", "joints3d", "segmentation", "normals"],
///    "output_dir": "out", "overwrite": false}
struct GenerationConfig {
  std::filesystem::path library;
  std::string body; // empty: the library's only body-basis asset
  // Explicit {"basis", "skeleton", "weights"} paths instead of a library body.
  std::map<std::string, std::filesystem::path> bodyFiles;
  std::vector<std::vector<double>> shapes;
  std::optional<ShapeSampling> sampling;
  std::vector<std::vector<std::string>> garmentSets{{}};
  struct Motion {
    std::string label; // as written in the config
    std::optional<std::filesystem::path> bvh; // unset: `label` is an asset id
    std::optional<std::filesystem::path> map;
  };
  std::vector<Motion> motions;
  std::size_t stride = 1;
  std::optional<std::size_t> maxFrames; // per clip, before striding
  OutputKinds outputs;
  std::filesystem::path outputDir;
  bool overwrite = false;

  /// Throws Error(InvalidArgument) on a broken invariant.
  void validate() const;
};

GenerationConfig parseConfig(const std::string& jsonText, const std::filesystem::path& baseDir);
GenerationConfig loadConfig(const std::filesystem::path& path);

struct RunSummary {
  std::size_t combinations = 0;
  std::size_t failed = 0;
  std::size_t frames = 0; // frame outputs written
  std::size_t files = 0;
  std::filesystem::path manifest;
};

/// Sweeps shapes x garment sets x motions; every sampled frame of every
/// combination is shaped, dressed, retargeted and skinned. Layout under
/// output_dir:
///   manifest.json
///   combo_NNNN/frame_FFFF.obj          body then garments as OBJ objects
///   combo_NNNN/frame_FFFF.normals.bin  "AVNRM\0\0\0", u32 version, u32 n, f32 xyz[n]
///   combo_NNNN/joints.csv              frame,joint,x,y,z
///   combo_NNNN/segmentation.bin        "AVSEG\0\0\0", u32 version, u32 n,
///                                      u32 label count, u32 labels[n]
///   combo_NNNN/animation.glb
/// Labels 0..13 are body groups, 14 + k the k-th garment id of the run.
/// A failing combination leaves no files and is recorded in the manifest.
RunSummary runGeneration(const GenerationConfig& config);

/// Sampled shape `index` (before clamping) for a given seed.
std::vector<double> sampleShape(const ShapeSampling& sampling,
                                const std::vector<std::string>& attributeNames,
                                const std::vector<std::pair<double, double>>& bounds,
                                std::size_t index);

inline constexpr std::uint32_t kDatasetBinaryVersion = 1;

} // namespace avf::dataset
