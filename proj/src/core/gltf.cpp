#include "gltf.hpp"

#include "binary_io.hpp"
#include "error.hpp"

#include <json.hpp>

#include <limits>

namespace avf::assets {

using nlohmann::json;

namespace {

constexpr int kFloat = 5126;
constexpr int kUnsignedShort = 5123;
constexpr int kUnsignedInt = 5125;
constexpr int kArrayBuffer = 34962;
constexpr int kElementArrayBuffer = 34963;

class Builder {
 public:
  json doc = {{"asset", {{"version", "2.0"}, {"generator", "avatar-forge"}}}};

  int addFloats(const std::vector<float>& data, int components, const char* type,
                bool withBounds, int target = -1) {
    const std::size_t count = data.size() / components;
    json acc = {{"componentType", kFloat}, {"count", count}, {"type", type}};
    if (withBounds && count > 0) {
      json lo = json::array(), hi = json::array();
      for (int c = 0; c < components; ++c) {
        float mn = std::numeric_limits<float>::max();
        float mx = std::numeric_limits<float>::lowest();
        for (std::size_t i = 0; i < count; ++i) {
          mn = std::min(mn, data[i * components + c]);
          mx = std::max(mx, data[i * components + c]);
        }
        lo.push_back(mn);
        hi.push_back(mx);
      }
      acc["min"] = lo;
      acc["max"] = hi;
    }
    const std::size_t offset = bin_.size();
    for (float f : data) {
      bin_.f32(f);
    }
    return finish(acc, offset, target);
  }

  int addU16(const std::vector<std::uint16_t>& data, const char* type, int components) {
    json acc = {{"componentType", kUnsignedShort},
                {"count", data.size() / components},
                {"type", type}};
    const std::size_t offset = bin_.size();
    for (auto v : data) {
      bin_.u16(v);
    }
    return finish(acc, offset, kArrayBuffer);
  }

  int addIndices(const std::vector<std::uint32_t>& data) {
    json acc = {{"componentType", kUnsignedInt}, {"count", data.size()}, {"type", "SCALAR"}};
    const std::size_t offset = bin_.size();
    for (auto v : data) {
      bin_.u32(v);
    }
    return finish(acc, offset, kElementArrayBuffer);
  }

  std::vector<std::uint8_t> glb() {
    bin_.padTo(4);
    if (bin_.size() > 0) {
      doc["buffers"] = json::array({{{"byteLength", bin_.size()}}});
    }
    std::string text = doc.dump();
    while (text.size() % 4 != 0) {
      text.push_back(' ');
    }
    const auto& bin = bin_.bytes();
    ByteWriter out;
    out.u32(0x46546C67);
    out.u32(2);
    const std::size_t binChunk = bin.empty() ? 0 : 8 + bin.size();
    out.u32(static_cast<std::uint32_t>(12 + 8 + text.size() + binChunk));
    out.u32(static_cast<std::uint32_t>(text.size()));
    out.u32(0x4E4F534A);
    out.raw(text);
    if (bin.empty()) {
      return out.take();
    }
    out.u32(static_cast<std::uint32_t>(bin.size()));
    out.u32(0x004E4942);
    out.raw(std::span<const std::uint8_t>(bin));
    return out.take();
  }

 private:
  int finish(json acc, std::size_t offset, int target) {
    json view = {{"buffer", 0}, {"byteOffset", offset}, {"byteLength", bin_.size() - offset}};
    if (target >= 0) {
      view["target"] = target;
    }
    bin_.padTo(4);
    doc["bufferViews"].push_back(view);
    acc["bufferView"] = doc["bufferViews"].size() - 1;
    doc["accessors"].push_back(acc);
    return static_cast<int>(doc["accessors"].size() - 1);
  }

  ByteWriter bin_;
};

json quatJson(const Quat& q) {
  const Quat c = canonicalQuat(q);
  return json::array({c.x(), c.y(), c.z(), c.w()});
}

json vecJson(const Vec3& v) {
  return json::array({v.x(), v.y(), v.z()});
}

void pushVec(std::vector<float>& out, const Vec3& v) {
  out.push_back(static_cast<float>(v.x()));
  out.push_back(static_cast<float>(v.y()));
  out.push_back(static_cast<float>(v.z()));
}

void checkScene(const GltfScene& scene) {
  if (scene.skeleton.empty()) {
    throw Error(ErrorCode::InvalidArgument, "glTF export needs a skeleton");
  }
  for (const Pose& p : scene.poses) {
    checkPoseMatches(scene.skeleton, p);
  }
  if (!scene.poses.empty() && !(scene.frameTime > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "frame time must be positive");
  }
  for (const GltfPart& part : scene.parts) {
    if (part.mesh == nullptr) {
      throw Error(ErrorCode::InvalidArgument, "glTF part '" + part.name + "' has no mesh");
    }
    validateMesh(*part.mesh);
    if (part.binding != nullptr) {
      if (!(part.binding->skeleton == scene.skeleton)) {
        throw Error(ErrorCode::Dimension,
                    "glTF part '" + part.name + "' is bound to a different skeleton");
      }
      part.binding->validate(part.mesh->vertexCount());
      checkPoseMatches(scene.skeleton, part.binding->bindPose);
    }
  }
}

} // namespace

std::vector<std::uint8_t> exportGlb(const GltfScene& scene) {
  checkScene(scene);
  Builder b;
  json& doc = b.doc;
  const Skeleton& sk = scene.skeleton;
  const std::size_t nj = sk.size();
  const Pose first = scene.poses.empty() ? Pose::identity(nj) : scene.poses.front();

  json nodes = json::array();
  for (std::size_t k = 0; k < nj; ++k) {
    const Joint& j = sk.joint(k);
    Vec3 t = j.restOffset;
    if (j.parent < 0) {
      t += first.rootTranslation;
    }
    json node = {{"name", j.name}, {"translation", vecJson(t)},
                 {"rotation", quatJson(first.localRotations[k])}};
    json children = json::array();
    for (std::size_t c : sk.children(k)) {
      children.push_back(c);
    }
    if (!children.empty()) {
      node["children"] = children;
    }
    nodes.push_back(node);
  }
  json sceneNodes = json::array();
  for (std::size_t k = 0; k < nj; ++k) {
    if (sk.joint(k).parent < 0) {
      sceneNodes.push_back(k);
    }
  }

  json meshes = json::array(), skins = json::array(), materials = json::array();
  json images = json::array(), textures = json::array();
  auto textureIndex = [&](const std::string& uri) {
    images.push_back({{"uri", uri}});
    textures.push_back({{"source", images.size() - 1}});
    return textures.size() - 1;
  };

  for (const GltfPart& part : scene.parts) {
    const Mesh& m = *part.mesh;
    std::vector<float> pos, nrm, uv;
    for (const Vec3& v : m.vertices) {
      pushVec(pos, v);
    }
    const std::vector<Vec3> normals =
        m.normals.size() == m.vertices.size() ? m.normals : computeVertexNormals(m);
    for (const Vec3& n : normals) {
      pushVec(nrm, n.normalized());
    }
    json attrs = {{"POSITION", b.addFloats(pos, 3, "VEC3", true, kArrayBuffer)},
                  {"NORMAL", b.addFloats(nrm, 3, "VEC3", false, kArrayBuffer)}};
    if (m.uvs.size() == m.vertices.size()) {
      for (const Vec2& t : m.uvs) {
        uv.push_back(static_cast<float>(t.x()));
        uv.push_back(static_cast<float>(1.0 - t.y()));
      }
      attrs["TEXCOORD_0"] = b.addFloats(uv, 2, "VEC2", false, kArrayBuffer);
    }
    if (part.binding != nullptr) {
      std::vector<std::uint16_t> joints;
      std::vector<float> weights;
      for (const auto& infl : part.binding->weights) {
        for (std::size_t s = 0; s < 4; ++s) {
          joints.push_back(s < infl.size() ? static_cast<std::uint16_t>(infl[s].joint) : 0);
          weights.push_back(s < infl.size() ? static_cast<float>(infl[s].weight) : 0.0f);
        }
      }
      attrs["JOINTS_0"] = b.addU16(joints, "VEC4", 4);
      attrs["WEIGHTS_0"] = b.addFloats(weights, 4, "VEC4", false, kArrayBuffer);
    }
    std::vector<std::uint32_t> idx;
    for (const auto& t : triangulate(m)) {
      idx.insert(idx.end(), t.begin(), t.end());
    }
    json prim = {{"attributes", attrs}, {"indices", b.addIndices(idx)}, {"mode", 4}};

    if (!part.textures.empty()) {
      json mat = {{"name", part.name},
                  {"pbrMetallicRoughness", {{"metallicFactor", 0.0}, {"roughnessFactor", 1.0}}}};
      if (auto it = part.textures.find("albedo"); it != part.textures.end()) {
        mat["pbrMetallicRoughness"]["baseColorTexture"] = {{"index", textureIndex(it->second)}};
      }
      if (auto it = part.textures.find("normal_map"); it != part.textures.end()) {
        mat["normalTexture"] = {{"index", textureIndex(it->second)}};
      }
      materials.push_back(mat);
      prim["material"] = materials.size() - 1;
    }
    meshes.push_back({{"name", part.name}, {"primitives", json::array({prim})}});

    json node = {{"name", part.name}, {"mesh", meshes.size() - 1}};
    if (part.binding != nullptr) {
      const auto bind = forwardKinematics(sk, part.binding->bindPose);
      std::vector<float> ibm;
      for (const Transform& w : bind) {
        const Mat4 inv = w.inverse().matrix();
        for (int c = 0; c < 4; ++c) {
          for (int r = 0; r < 4; ++r) {
            ibm.push_back(static_cast<float>(inv(r, c)));
          }
        }
      }
      json jointList = json::array();
      for (std::size_t k = 0; k < nj; ++k) {
        jointList.push_back(k);
      }
      skins.push_back({{"name", part.name},
                       {"joints", jointList},
                       {"skeleton", 0},
                       {"inverseBindMatrices", b.addFloats(ibm, 16, "MAT4", false)}});
      node["skin"] = skins.size() - 1;
    }
    nodes.push_back(node);
    sceneNodes.push_back(nodes.size() - 1);
  }

  if (!scene.poses.empty()) {
    std::vector<float> times;
    for (std::size_t i = 0; i < scene.poses.size(); ++i) {
      times.push_back(static_cast<float>(static_cast<double>(i) * scene.frameTime));
    }
    const int input = b.addFloats(times, 1, "SCALAR", true);
    json samplers = json::array(), channels = json::array();
    for (std::size_t k = 0; k < nj; ++k) {
      std::vector<float> rot;
      for (const Pose& p : scene.poses) {
        const Quat q = canonicalQuat(p.localRotations[k]);
        rot.insert(rot.end(), {static_cast<float>(q.x()), static_cast<float>(q.y()),
                               static_cast<float>(q.z()), static_cast<float>(q.w())});
      }
      samplers.push_back({{"input", input},
                          {"output", b.addFloats(rot, 4, "VEC4", false)},
                          {"interpolation", "LINEAR"}});
      channels.push_back({{"sampler", samplers.size() - 1},
                          {"target", {{"node", k}, {"path", "rotation"}}}});
    }
    for (std::size_t k = 0; k < nj; ++k) {
      if (sk.joint(k).parent >= 0) {
        continue;
      }
      std::vector<float> tr;
      for (const Pose& p : scene.poses) {
        pushVec(tr, sk.joint(k).restOffset + p.rootTranslation);
      }
      samplers.push_back({{"input", input},
                          {"output", b.addFloats(tr, 3, "VEC3", false)},
                          {"interpolation", "LINEAR"}});
      channels.push_back({{"sampler", samplers.size() - 1},
                          {"target", {{"node", k}, {"path", "translation"}}}});
    }
    doc["animations"] =
        json::array({{{"name", "motion"}, {"samplers", samplers}, {"channels", channels}}});
  }

  doc["nodes"] = nodes;
  doc["scenes"] = json::array({{{"nodes", sceneNodes}}});
  doc["scene"] = 0;
  if (!meshes.empty()) {
    doc["meshes"] = meshes;
  }
  if (!skins.empty()) {
    doc["skins"] = skins;
  }
  if (!materials.empty()) {
    doc["materials"] = materials;
    doc["images"] = images;
    doc["textures"] = textures;
  }
  return b.glb();
}

void saveGlb(const GltfScene& scene, const std::filesystem::path& path) {
  const auto bytes = exportGlb(scene);
  writeFileBytes(path, bytes);
}

} // namespace avf::assets
