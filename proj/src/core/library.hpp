#pragma once

#include "bvh.hpp"
#include "retarget.hpp"
#include "shape_model.hpp"
#include "skin.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace avf::assets {

enum class AssetKind { BodyBasis, Garment, Motion };

const char* assetKindName(AssetKind kind);

/// One catalogue entry, read from an `asset.json` manifest:
///   {"id": "...", "kind": "body-basis" | "garment" | "motion",
///    "name": "...", "thumbnail": "thumb.png",
///    "files": {"<role>": "<relative path>", ...},
///    "epsilon": 0.002}
/// Required roles: body-basis {basis, skeleton, weights}; garment {mesh};
/// motion {bvh}. Optional roles: garment {weights, albedo, normal_map},
/// motion {map}. Texture roles must hold PNG or JPEG files.
struct AssetEntry {
  std::string id;
  AssetKind kind = AssetKind::Garment;
  std::string displayName;
  std::filesystem::path directory;
  std::map<std::string, std::filesystem::path> files; // absolute paths
  std::optional<std::filesystem::path> thumbnail;
  double epsilon = skin::kDefaultGarmentEpsilon;

  std::optional<std::filesystem::path> file(const std::string& role) const;
};

struct AssetLibrary {
  std::filesystem::path root;
  std::vector<AssetEntry> entries; // sorted by id

  const AssetEntry* find(const std::string& id) const;
  std::vector<const AssetEntry*> ofKind(AssetKind kind) const;
};

/// Reads one manifest; throws Error(Catalog) on schema problems or missing
/// files.
AssetEntry readManifest(const std::filesystem::path& manifestPath);

/// Recursively collects every `asset.json` below `root`. All problems
/// (duplicate ids, missing files, bad manifests) are gathered into one
/// Error(Catalog) listing each offender.
AssetLibrary scanLibrary(const std::filesystem::path& root);

/// Catalogue as JSON: {"root": .., "assets": [{id, kind, name, files, thumbnail}]}.
std::string libraryToJson(const AssetLibrary& library, bool absolutePaths = false);

// Weights file: {"format": "avf-weights", "joints": [names],
//                "influences": [[[joint, weight], ...] per vertex]}
std::string weightsToJson(const skin::SkinBinding& binding);
/// Joint names are resolved against `skeleton`; the bind pose is rest.
skin::SkinBinding weightsFromJson(const std::string& text, const Skeleton& skeleton);

struct BodyAsset {
  std::string id;
  shape::BlendShapeBasis basis;
  Skeleton skeleton;
  skin::SkinBinding binding;
};

struct MotionAsset {
  std::string id;
  bvh::MotionClip clip;
  retarget::MapOptions map;
};

BodyAsset loadBody(const AssetEntry& entry);
/// A garment without a weights file has no binding until prepared.
skin::GarmentAsset loadGarment(const AssetEntry& entry, const Skeleton* skeleton = nullptr);
MotionAsset loadMotion(const AssetEntry& entry);

/// Writes a prepared garment as a library entry: mesh.obj, weights.json and
/// asset.json in `dir`. Texture refs and the thumbnail are stored relative to
/// `dir` when possible.
void writeGarment(const skin::GarmentAsset& garment, const std::string& displayName,
                  const std::filesystem::path& dir,
                  const std::optional<std::filesystem::path>& thumbnail = std::nullopt);

/// True for files starting with a PNG or JPEG signature.
bool hasImageHeader(const std::filesystem::path& path);

} // namespace avf::assets
