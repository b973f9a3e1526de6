#include "library.hpp"

#include "binary_io.hpp"
#include "error.hpp"
#include "obj.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

namespace avf::assets {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kTextureRoles = {"albedo", "normal_map"};

struct KindRoles {
  std::vector<std::string> required;
  std::vector<std::string> optional;
};

const KindRoles& rolesFor(AssetKind kind) {
  static const KindRoles body{{"basis", "skeleton", "weights"}, {}};
  static const KindRoles garment{{"mesh"}, {"weights", "albedo", "normal_map"}};
  static const KindRoles motion{{"bvh"}, {"map"}};
  switch (kind) {
    case AssetKind::BodyBasis:
      return body;
    case AssetKind::Garment:
      return garment;
    case AssetKind::Motion:
      return motion;
  }
  return garment;
}

std::optional<AssetKind> parseKind(const std::string& s) {
  if (s == "body-basis") {
    return AssetKind::BodyBasis;
  }
  if (s == "garment") {
    return AssetKind::Garment;
  }
  if (s == "motion") {
    return AssetKind::Motion;
  }
  return std::nullopt;
}

std::string joinLines(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    out += "\n  " + s;
  }
  return out;
}

std::string portable(const fs::path& p) {
  return p.generic_string();
}

} // namespace

const char* assetKindName(AssetKind kind) {
  switch (kind) {
    case AssetKind::BodyBasis:
      return "body-basis";
    case AssetKind::Garment:
      return "garment";
    case AssetKind::Motion:
      return "motion";
  }
  return "unknown";
}

std::optional<fs::path> AssetEntry::file(const std::string& role) const {
  auto it = files.find(role);
  if (it == files.end()) {
    return std::nullopt;
  }
  return it->second;
}

const AssetEntry* AssetLibrary::find(const std::string& id) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), id,
                             [](const AssetEntry& e, const std::string& k) { return e.id < k; });
  return it != entries.end() && it->id == id ? &*it : nullptr;
}

std::vector<const AssetEntry*> AssetLibrary::ofKind(AssetKind kind) const {
  std::vector<const AssetEntry*> out;
  for (const auto& e : entries) {
    if (e.kind == kind) {
      out.push_back(&e);
    }
  }
  return out;
}

bool hasImageHeader(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<unsigned char, 8> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto got = in.gcount();
  static constexpr std::array<unsigned char, 8> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (got == 8 && head == png) {
    return true;
  }
  return got >= 3 && head[0] == 0xFF && head[1] == 0xD8 && head[2] == 0xFF;
}

AssetEntry readManifest(const fs::path& manifestPath) {
  const std::string where = portable(manifestPath);
  json j;
  try {
    j = json::parse(readFileText(manifestPath));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Catalog, where + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) {
    throw Error(ErrorCode::Catalog, where + ": manifest must be an object");
  }

  std::vector<std::string> problems;
  AssetEntry entry;
  entry.directory = manifestPath.parent_path();

  if (j.contains("id") && j["id"].is_string() && !j["id"].get<std::string>().empty()) {
    entry.id = j["id"].get<std::string>();
  } else {
    problems.push_back("missing or empty \"id\"");
  }

  std::optional<AssetKind> kind;
  if (j.contains("kind") && j["kind"].is_string()) {
    kind = parseKind(j["kind"].get<std::string>());
  }
  if (!kind) {
    problems.push_back("\"kind\" must be body-basis, garment or motion");
  } else {
    entry.kind = *kind;
  }

  entry.displayName = entry.id;
  if (j.contains("name")) {
    if (j["name"].is_string()) {
      entry.displayName = j["name"].get<std::string>();
    } else {
      problems.push_back("\"name\" must be a string");
    }
  }

  if (j.contains("epsilon")) {
    if (j["epsilon"].is_number() && j["epsilon"].get<double>() >= 0.0) {
      entry.epsilon = j["epsilon"].get<double>();
    } else {
      problems.push_back("\"epsilon\" must be a non-negative number");
    }
  }

  auto resolve = [&](const std::string& role, const std::string& rel) {
    const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : entry.directory / rel;
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) {
      problems.push_back("missing file for " + role + ": " + portable(p));
      return std::optional<fs::path>{};
    }
    if ((kTextureRoles.count(role) || role == "thumbnail") && !hasImageHeader(p)) {
      problems.push_back(role + " is not a PNG or JPEG file: " + portable(p));
    }
    return std::optional<fs::path>(p);
  };

  if (j.contains("files") && j["files"].is_object()) {
    for (const auto& [role, value] : j["files"].items()) {
      if (!value.is_string()) {
        problems.push_back("file role " + role + " must be a path string");
        continue;
      }
      if (kind) {
        const auto& roles = rolesFor(*kind);
        const bool known =
            std::count(roles.required.begin(), roles.required.end(), role) +
                std::count(roles.optional.begin(), roles.optional.end(), role) >
            0;
        if (!known) {
          problems.push_back("unknown file role " + role + " for " + assetKindName(*kind));
          continue;
        }
      }
      if (auto p = resolve(role, value.get<std::string>())) {
        entry.files[role] = *p;
      }
    }
  } else {
    problems.push_back("missing \"files\" object");
  }
  if (kind && j.contains("files") && j["files"].is_object()) {
    for (const auto& role : rolesFor(*kind).required) {
      if (!j["files"].contains(role)) {
        problems.push_back("missing required file role " + role);
      }
    }
  }

  if (j.contains("thumbnail") && !j["thumbnail"].is_null()) {
    if (j["thumbnail"].is_string()) {
      entry.thumbnail = resolve("thumbnail", j["thumbnail"].get<std::string>());
    } else {
      problems.push_back("\"thumbnail\" must be a path string");
    }
  }

  if (!problems.empty()) {
    std::string msg = where + ":";
    for (const auto& p : problems) {
      msg += " " + p + ";";
    }
    msg.pop_back();
    throw Error(ErrorCode::Catalog, msg);
  }
  return entry;
}

AssetLibrary scanLibrary(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::Io, "asset library root is not a directory: " + portable(root));
  }
  std::vector<fs::path> manifests;
  for (auto it = fs::recursive_directory_iterator(root, ec); !ec && it != fs::end(it);
       it.increment(ec)) {
    if (it->is_regular_file() && it->path().filename() == "asset.json") {
      manifests.push_back(it->path());
    }
  }
  if (ec) {
    throw Error(ErrorCode::Io, "cannot scan " + portable(root) + ": " + ec.message());
  }
  std::sort(manifests.begin(), manifests.end());

  AssetLibrary lib;
  lib.root = root;
  std::vector<std::string> problems;
  std::map<std::string, std::vector<std::string>> seen;
  for (const auto& m : manifests) {
    try {
      AssetEntry e = readManifest(m);
      seen[e.id].push_back(portable(m));
      lib.entries.push_back(std::move(e));
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  }
  for (const auto& [id, where] : seen) {
    if (where.size() > 1) {
      std::string msg = "duplicate id '" + id + "' in";
      for (const auto& w : where) {
        msg += " " + w;
      }
      problems.push_back(msg);
    }
  }
  if (!problems.empty()) {
    throw Error(ErrorCode::Catalog, "asset library " + portable(root) + " has " +
                                        std::to_string(problems.size()) + " problem(s):" +
                                        joinLines(problems));
  }
  std::sort(lib.entries.begin(), lib.entries.end(),
            [](const AssetEntry& a, const AssetEntry& b) { return a.id < b.id; });
  return lib;
}

std::string libraryToJson(const AssetLibrary& library, bool absolutePaths) {
  auto show = [&](const fs::path& p) {
    return absolutePaths ? portable(p) : portable(p.lexically_relative(library.root));
  };
  json assets = json::array();
  for (const auto& e : library.entries) {
    json files = json::object();
    for (const auto& [role, p] : e.files) {
      files[role] = show(p);
    }
    json item = {{"id", e.id},
                 {"kind", assetKindName(e.kind)},
                 {"name", e.displayName},
                 {"files", files},
                 {"thumbnail", e.thumbnail ? json(show(*e.thumbnail)) : json(nullptr)}};
    if (e.kind == AssetKind::Garment) {
      item["epsilon"] = e.epsilon;
    }
    assets.push_back(std::move(item));
  }
  json out = {{"root", portable(library.root)}, {"assets", assets}};
  return out.dump(2) + "\n";
}

std::string weightsToJson(const skin::SkinBinding& binding) {
  json joints = json::array();
  for (const auto& j : binding.skeleton.joints()) {
    joints.push_back(j.name);
  }
  json influences = json::array();
  for (const auto& v : binding.weights) {
    json row = json::array();
    for (const auto& inf : v) {
      row.push_back(json::array({inf.joint, inf.weight}));
    }
    influences.push_back(std::move(row));
  }
  json out = {{"format", "avf-weights"}, {"joints", joints}, {"influences", influences}};
  return out.dump() + "\n";
}

skin::SkinBinding weightsFromJson(const std::string& text, const Skeleton& skeleton) {
  try {
    const json j = json::parse(text);
    if (!j.is_object() || j.value("format", "") != "avf-weights") {
      throw Error(ErrorCode::Parse, "weights file must have \"format\": \"avf-weights\"");
    }
    std::vector<std::uint32_t> remap;
    for (const auto& name : j.at("joints")) {
      const auto idx = skeleton.find(name.get<std::string>());
      if (!idx) {
        throw Error(ErrorCode::NotFound,
                    "weights reference joint '" + name.get<std::string>() +
                        "' missing from the skeleton");
      }
      remap.push_back(static_cast<std::uint32_t>(*idx));
    }
    std::vector<std::vector<skin::Influence>> raw;
    for (const auto& row : j.at("influences")) {
      std::vector<skin::Influence> v;
      for (const auto& pair : row) {
        if (!pair.is_array() || pair.size() != 2) {
          throw Error(ErrorCode::Parse, "influence must be [joint, weight]");
        }
        const auto local = pair[0].get<std::int64_t>();
        if (local < 0 || static_cast<std::size_t>(local) >= remap.size()) {
          throw Error(ErrorCode::Index, "influence joint " + std::to_string(local) +
                                            " out of range");
        }
        v.push_back({remap[static_cast<std::size_t>(local)], pair[1].get<double>()});
      }
      raw.push_back(std::move(v));
    }
    return skin::makeBinding(skeleton, std::move(raw));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("weights file: ") + e.what());
  }
}

namespace {

const fs::path& required(const AssetEntry& entry, const std::string& role) {
  auto it = entry.files.find(role);
  if (it == entry.files.end()) {
    throw Error(ErrorCode::Catalog, "asset '" + entry.id + "' has no " + role + " file");
  }
  return it->second;
}

void expectKind(const AssetEntry& entry, AssetKind kind) {
  if (entry.kind != kind) {
    throw Error(ErrorCode::InvalidArgument, "asset '" + entry.id + "' is a " +
                                                assetKindName(entry.kind) + ", expected " +
                                                assetKindName(kind));
  }
}

} // namespace

BodyAsset loadBody(const AssetEntry& entry) {
  expectKind(entry, AssetKind::BodyBasis);
  BodyAsset body;
  body.id = entry.id;
  const fs::path& basisPath = required(entry, "basis");
  body.basis = basisPath.extension() == ".json" ? shape::basisFromJson(readFileText(basisPath))
                                                : shape::loadBasis(basisPath);
  body.skeleton = retarget::loadSkeleton(required(entry, "skeleton"));
  body.binding = weightsFromJson(readFileText(required(entry, "weights")), body.skeleton);
  body.binding.validate(body.basis.vertexCount());
  return body;
}

skin::GarmentAsset loadGarment(const AssetEntry& entry, const Skeleton* skeleton) {
  expectKind(entry, AssetKind::Garment);
  skin::GarmentAsset g;
  g.id = entry.id;
  g.mesh = loadObj(required(entry, "mesh"));
  g.offsetEpsilon = entry.epsilon;
  if (auto w = entry.file("weights")) {
    if (skeleton == nullptr) {
      throw Error(ErrorCode::InvalidArgument,
                  "garment '" + entry.id + "' weights need a body skeleton");
    }
    g.binding = weightsFromJson(readFileText(*w), *skeleton);
    g.binding->validate(g.mesh.vertexCount());
  }
  for (const auto& role : kTextureRoles) {
    if (auto p = entry.file(role)) {
      g.textureRefs[role] = portable(*p);
    }
  }
  return g;
}

MotionAsset loadMotion(const AssetEntry& entry) {
  expectKind(entry, AssetKind::Motion);
  MotionAsset m;
  m.id = entry.id;
  m.clip = bvh::loadBvh(required(entry, "bvh"));
  if (auto p = entry.file("map")) {
    m.map = retarget::loadMapOptions(*p);
  }
  return m;
}

void writeGarment(const skin::GarmentAsset& garment, const std::string& displayName,
                  const fs::path& dir, const std::optional<fs::path>& thumbnail) {
  fs::create_directories(dir);
  saveObj(garment.mesh, dir / "mesh.obj");
  json files = {{"mesh", "mesh.obj"}};
  if (garment.binding) {
    writeFileText(dir / "weights.json", weightsToJson(*garment.binding));
    files["weights"] = "weights.json";
  }
  auto relative = [&](const fs::path& p) {
    return p.is_absolute() ? portable(fs::proximate(p, fs::absolute(dir))) : portable(p);
  };
  for (const auto& [role, ref] : garment.textureRefs) {
    files[role] = relative(ref);
  }
  json manifest = {{"id", garment.id},
                   {"kind", "garment"},
                   {"name", displayName},
                   {"files", files},
                   {"epsilon", garment.offsetEpsilon}};
  if (thumbnail) {
    manifest["thumbnail"] = relative(*thumbnail);
  }
  writeFileText(dir / "asset.json", manifest.dump(2) + "\n");
}

} // namespace avf::assets
