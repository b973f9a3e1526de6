#include "binary_io.hpp"
#include "error.hpp"
#include "obj.hpp"
#include "shape_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>

namespace avf::shape {

namespace {

constexpr char kMagic[8] = {'A', 'V', 'B', 'A', 'S', 'I', 'S', '\0'};
constexpr std::uint32_t kFlagUvs = 1;

} // namespace

std::vector<std::uint8_t> encodeBasis(const BlendShapeBasis& basis) {
  basis.validate();
  const Mesh& rest = basis.restMesh;
  ByteWriter w;
  w.raw(std::string_view(kMagic, sizeof(kMagic)));
  w.u32(kBasisVersion);
  w.u32(static_cast<std::uint32_t>(rest.vertices.size()));
  w.u32(static_cast<std::uint32_t>(basis.attributeCount()));
  w.u32(static_cast<std::uint32_t>(rest.faces.size()));
  w.u32(rest.uvs.empty() ? 0 : kFlagUvs);
  for (const std::string& name : basis.attributeNames) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
  }
  for (const Vec3& v : rest.vertices) {
    for (int c = 0; c < 3; ++c) {
      w.f32(static_cast<float>(v[c]));
    }
  }
  for (const Face& f : rest.faces) {
    w.u32(f.arity);
    for (std::uint32_t i : f.indices()) {
      w.u32(i);
    }
  }
  for (const Vec2& uv : rest.uvs) {
    w.f32(static_cast<float>(uv.x()));
    w.f32(static_cast<float>(uv.y()));
  }
  for (const auto& field : basis.attributes) {
    for (const Vec3& d : field) {
      for (int c = 0; c < 3; ++c) {
        w.f32(static_cast<float>(d[c]));
      }
    }
  }
  for (const WeightBounds& b : basis.weightBounds) {
    w.f32(static_cast<float>(b.min));
    w.f32(static_cast<float>(b.max));
  }
  return w.take();
}

BlendShapeBasis decodeBasis(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.string(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error(ErrorCode::Parse, "not a basis container (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kBasisVersion) {
    throw Error(ErrorCode::Parse, "unsupported basis version " + std::to_string(version));
  }
  const std::uint32_t n = r.u32();
  const std::uint32_t m = r.u32();
  const std::uint32_t faceCount = r.u32();
  const std::uint32_t flags = r.u32();

  BlendShapeBasis basis;
  r.expectAtLeast(m, 4);
  for (std::uint32_t k = 0; k < m; ++k) {
    const std::uint32_t len = r.u32();
    basis.attributeNames.push_back(r.string(len));
  }
  r.expectAtLeast(n, 12);
  basis.restMesh.vertices.resize(n);
  for (Vec3& v : basis.restMesh.vertices) {
    v = r.vec3f();
  }
  r.expectAtLeast(faceCount, 16);
  basis.restMesh.faces.reserve(faceCount);
  for (std::uint32_t f = 0; f < faceCount; ++f) {
    const std::uint32_t arity = r.u32();
    if (arity != 3 && arity != 4) {
      throw Error(ErrorCode::Parse, "face " + std::to_string(f) + " has arity " +
                                        std::to_string(arity));
    }
    Face face;
    face.arity = static_cast<std::uint8_t>(arity);
    for (std::uint32_t i = 0; i < arity; ++i) {
      face.v[i] = r.u32();
    }
    basis.restMesh.faces.push_back(face);
  }
  if (flags & kFlagUvs) {
    r.expectAtLeast(n, 8);
    basis.restMesh.uvs.resize(n);
    for (Vec2& uv : basis.restMesh.uvs) {
      const double u = r.f32();
      uv = Vec2(u, r.f32());
    }
  }
  r.expectAtLeast(static_cast<std::uint64_t>(m) * n, 12);
  basis.attributes.assign(m, std::vector<Vec3>(n));
  for (auto& field : basis.attributes) {
    for (Vec3& d : field) {
      d = r.vec3f();
    }
  }
  for (std::uint32_t k = 0; k < m; ++k) {
    WeightBounds b;
    b.min = r.f32();
    b.max = r.f32();
    basis.weightBounds.push_back(b);
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::Parse, "trailing bytes after basis container");
  }
  try {
    basis.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, std::string("invalid basis container: ") + e.what());
  }
  basis.restMesh.normals = computeVertexNormals(basis.restMesh);
  return basis;
}

void saveBasis(const BlendShapeBasis& basis, const std::filesystem::path& path) {
  writeFileBytes(path, encodeBasis(basis));
}

BlendShapeBasis loadBasis(const std::filesystem::path& path) {
  const auto bytes = readFileBytes(path);
  return decodeBasis(bytes);
}

std::string basisToJson(const BlendShapeBasis& basis) {
  basis.validate();
  using nlohmann::json;
  json j;
  j["format"] = "avbasis-json";
  j["version"] = kBasisVersion;
  json verts = json::array();
  for (const Vec3& v : basis.restMesh.vertices) {
    verts.push_back({v.x(), v.y(), v.z()});
  }
  j["vertices"] = std::move(verts);
  json faces = json::array();
  for (const Face& f : basis.restMesh.faces) {
    faces.push_back(std::vector<std::uint32_t>(f.indices().begin(), f.indices().end()));
  }
  j["faces"] = std::move(faces);
  if (!basis.restMesh.uvs.empty()) {
    json uvs = json::array();
    for (const Vec2& uv : basis.restMesh.uvs) {
      uvs.push_back({uv.x(), uv.y()});
    }
    j["uvs"] = std::move(uvs);
  }
  json attrs = json::array();
  for (std::size_t k = 0; k < basis.attributeCount(); ++k) {
    json field = json::array();
    for (const Vec3& d : basis.attributes[k]) {
      field.push_back({d.x(), d.y(), d.z()});
    }
    attrs.push_back({{"name", basis.attributeNames[k]},
                     {"bounds", {basis.weightBounds[k].min, basis.weightBounds[k].max}},
                     {"field", std::move(field)}});
  }
  j["attributes"] = std::move(attrs);
  return j.dump(1);
}

namespace {

Vec3 vec3From(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::Parse, "expected a 3-element array");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

} // namespace

BlendShapeBasis basisFromJson(const std::string& text) {
  using nlohmann::json;
  BlendShapeBasis basis;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "avbasis-json") {
      throw Error(ErrorCode::Parse, "not an avbasis-json document");
    }
    for (const json& v : j.at("vertices")) {
      basis.restMesh.vertices.push_back(vec3From(v));
    }
    for (const json& f : j.at("faces")) {
      const auto idx = f.get<std::vector<std::uint32_t>>();
      if (idx.size() != 3 && idx.size() != 4) {
        throw Error(ErrorCode::Parse, "face arity must be 3 or 4");
      }
      Face face;
      face.arity = static_cast<std::uint8_t>(idx.size());
      std::copy(idx.begin(), idx.end(), face.v.begin());
      basis.restMesh.faces.push_back(face);
    }
    if (j.contains("uvs")) {
      for (const json& uv : j.at("uvs")) {
        basis.restMesh.uvs.emplace_back(uv.at(0).get<double>(), uv.at(1).get<double>());
      }
    }
    for (const json& a : j.at("attributes")) {
      basis.attributeNames.push_back(a.at("name").get<std::string>());
      basis.weightBounds.push_back({a.at("bounds").at(0).get<double>(),
                                    a.at("bounds").at(1).get<double>()});
      std::vector<Vec3> field;
      for (const json& d : a.at("field")) {
        field.push_back(vec3From(d));
      }
      basis.attributes.push_back(std::move(field));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("basis json: ") + e.what());
  }
  basis.validate();
  basis.restMesh.normals = computeVertexNormals(basis.restMesh);
  return basis;
}

std::string describeBasis(const BlendShapeBasis& basis) {
  std::ostringstream os;
  os << "vertices: " << basis.vertexCount() << "\n";
  os << "faces: " << basis.restMesh.faces.size() << "\n";
  os << "attributes: " << basis.attributeCount() << "\n";
  for (std::size_t k = 0; k < basis.attributeCount(); ++k) {
    double peak = 0.0;
    for (const Vec3& d : basis.attributes[k]) {
      peak = std::max(peak, d.norm());
    }
    os << "  " << basis.attributeNames[k] << "  bounds [" << basis.weightBounds[k].min << ", "
       << basis.weightBounds[k].max << "]  max displacement " << peak << "\n";
  }
  return os.str();
}

std::vector<AttributeSubset> loadCorpusDirectory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::Io, "corpus directory '" + dir.string() + "' does not exist");
  }
  std::vector<fs::path> attributeDirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) {
      attributeDirs.push_back(entry.path());
    }
  }
  std::sort(attributeDirs.begin(), attributeDirs.end());

  std::vector<AttributeSubset> corpus;
  for (const fs::path& attrDir : attributeDirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(attrDir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".obj") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    AttributeSubset subset;
    subset.name = attrDir.filename().string();
    for (const fs::path& f : files) {
      subset.samples.push_back(assets::loadObj(f));
    }
    corpus.push_back(std::move(subset));
  }
  if (corpus.empty()) {
    throw Error(ErrorCode::Corpus, "corpus directory '" + dir.string() + "' has no attributes");
  }
  return corpus;
}

} // namespace avf::shape
