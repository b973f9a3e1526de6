// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include "binary_io.hpp"
#include "bvh.hpp"
#include "bvh_corpus.hpp"
#include "dataset.hpp"
#include "demo.hpp"
#include "hash.hpp"
#include "http_server.hpp"
#include "library.hpp"
#include "pipeline.hpp"
#include "primitives.hpp"
#include "retarget.hpp"
#include "session.hpp"
#include "shape_model.hpp"
#include "skin.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

using namespace avf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// 1. Blendshape evaluation
Outcome blendshapes() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> w(-3.0, 3.0);
  const std::size_t m = 7;
  bool restExact = true;
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    shape::BlendShapeBasis b;
    b.restMesh = test::gridMesh(9, 9);
    for (Vec3& v : b.restMesh.vertices) {
      v = test::randomVec(rng, -1, 1);
    }
    for (std::size_t k = 0; k < m; ++k) {
      b.attributeNames.push_back("a" + std::to_string(k));
      std::vector<Vec3> field;
      for (std::size_t i = 0; i < b.restMesh.vertices.size(); ++i) {
        field.push_back(test::randomVec(rng, -0.3, 0.3));
      }
      b.attributes.push_back(field);
      b.weightBounds.push_back({-3.0, 3.0});
    }
    const Mesh zero = shape::applyShape(b, shape::ShapeWeights::zero(b));
    restExact = restExact && zero.vertices == b.restMesh.vertices;

    std::vector<double> a(m), c(m), sum(m);
    for (std::size_t k = 0; k < m; ++k) {
      a[k] = w(rng);
      c[k] = w(rng);
      sum[k] = a[k] + c[k];
    }
    const Mesh ma = shape::applyShape(b, shape::ShapeWeights::unbounded(a));
    const Mesh mc = shape::applyShape(b, shape::ShapeWeights::unbounded(c));
    const Mesh ms = shape::applyShape(b, shape::ShapeWeights::unbounded(sum));
    for (std::size_t i = 0; i < b.restMesh.vertices.size(); ++i) {
      // Oracle: explicit sum of scaled fields.
      Vec3 direct = b.restMesh.vertices[i];
      for (std::size_t k = 0; k < m; ++k) {
        direct += a[k] * b.attributes[k][i];
      }
      worst = std::max(worst, (ma.vertices[i] - direct).norm());
      worst = std::max(
          worst, (ma.vertices[i] + mc.vertices[i] - b.restMesh.vertices[i] - ms.vertices[i]).norm());
    }
  }
  const double t = elapsed(start);
  return {restExact && worst < 1e-9 && t < 5.0,
          "zero weights exact: " + std::string(restExact ? "yes" : "no") + ", max linearity error " +
              fmt(worst) + " over 1000 draws (n=100, m=7), " + fmt(t) + " s"};
}

// 2. Per-attribute PCA against the dense covariance eigendecomposition
Outcome subsetPca() {
  std::mt19937_64 rng(1002);
  double worst = 0.0;
  std::size_t attributes = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int rows = 1 + trial % 4;
    const Mesh rest = test::gridMesh(rows, 9);
    std::vector<shape::AttributeSubset> corpus;
    for (int a = 0; a < 3; ++a) {
      shape::AttributeSubset s{"attr" + std::to_string(a), {}};
      const int count = 2 + (trial + a) % 8;
      for (int k = 0; k < count; ++k) {
        Mesh sample = rest;
        for (Vec3& v : sample.vertices) {
          v += test::randomVec(rng, -0.05, 0.05);
        }
        s.samples.push_back(sample);
      }
      corpus.push_back(s);
    }
    const auto build = shape::buildAttributeBasisWithReport(corpus, rest);
    const std::size_t n = rest.vertices.size();
    for (std::size_t a = 0; a < corpus.size(); ++a) {
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3 * n, 3 * n);
      double total = 0.0;
      for (const Mesh& s : corpus[a].samples) {
        Eigen::VectorXd x(3 * n);
        for (std::size_t i = 0; i < n; ++i) {
          x.segment<3>(3 * i) = s.vertices[i] - rest.vertices[i];
        }
        cov += x * x.transpose();
        total += x.squaredNorm();
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
      const double oracle = total - es.eigenvalues()(3 * n - 1);
      const double got =
          shape::subsetResidual(build.basis.attributes[a], corpus[a].samples, rest);
      worst = std::max({worst, std::abs(got - oracle), std::abs(build.fits[a].residual - oracle)});
      ++attributes;
    }
  }
  return {worst < 1e-6, "max residual difference " + fmt(worst) + " over " +
                            std::to_string(attributes) + " attributes (n <= 50)"};
}

// 3. BVH round trip and fuzzing
Outcome bvhRoundTrip() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> texts;
  for (const auto& f : test::bvhFixtures()) {
    texts.push_back(f.second);
  }
  const std::size_t handWritten = texts.size();
  std::mt19937_64 rng(1003);
  for (int i = 0; i < 100; ++i) {
    texts.push_back(bvh::writeBvh(test::randomClip(rng)));
  }
  std::size_t stable = 0;
  std::string why;
  for (const std::string& text : texts) {
    const bvh::MotionClip a = bvh::parseBvh(text);
    const std::string w1 = bvh::writeBvh(a);
    const bvh::MotionClip b = bvh::parseBvh(w1);
    if (test::clipsClose(a, b, 1e-4, &why) && bvh::writeBvh(b) == w1) {
      ++stable;
    }
  }
  std::size_t accepted = 0, rejected = 0, other = 0;
  for (int i = 0; i < 100000; ++i) {
    const std::string input = test::mutate(texts[rng() % handWritten], rng);
    try {
      const bvh::MotionClip clip = bvh::parseBvh(input);
      if (clip.frameCount() > 0) {
        bvh::poseAtFrame(clip, 0);
      }
      bvh::writeBvh(clip);
      ++accepted;
    } catch (const ParseError&) {
      ++rejected;
    } catch (...) {
      ++other;
    }
  }
  const bool ok = handWritten >= 10 && stable == texts.size() && other == 0;
  return {ok, std::to_string(stable) + "/" + std::to_string(texts.size()) + " files stable (" +
                  std::to_string(handWritten) + " hand-written); fuzz 100000 inputs: " +
                  std::to_string(accepted) + " parsed, " + std::to_string(rejected) +
                  " rejected, " + std::to_string(other) + " unexpected; " + fmt(elapsed(start)) +
                  " s"};
}

std::vector<Pose> randomPoses(const Skeleton& s, std::size_t n, std::mt19937_64& rng) {
  std::vector<Pose> poses;
  for (std::size_t f = 0; f < n; ++f) {
    poses.push_back(test::randomPose(s, rng));
  }
  return poses;
}

// 4. Identity retarget
Outcome retargetIdentity() {
  std::mt19937_64 rng(1004);
  double worst = 0.0;
  for (const Skeleton& s : {test::humanoid(true), test::humanoid(false)}) {
    const auto map = retarget::buildRetargetMap(s, s);
    const auto clip = bvh::clipFromPoses(s, randomPoses(s, 100, rng), 1.0 / 30);
    const auto out = retarget::retargetClip(clip, s, map);
    for (std::size_t f = 0; f < 100; ++f) {
      const Pose in = bvh::poseAtFrame(clip, f);
      for (std::size_t k = 0; k < s.size(); ++k) {
        worst = std::max(worst, test::quatDistance(out.poses[f].localRotations[k], in.localRotations[k]));
      }
    }
  }
  return {worst < 1e-6, "max quaternion difference " + fmt(worst) + " over 2 rigs x 100 frames"};
}

// 5. Uniformly scaled target
Outcome retargetScale() {
  std::mt19937_64 rng(1005);
  const Skeleton s = test::humanoid();
  const Skeleton big = s.scaled(2.0);
  const double scale = retarget::computeScale(s, big);
  const auto map = retarget::buildRetargetMap(s, big);
  const auto clip = bvh::clipFromPoses(s, randomPoses(s, 100, rng), 1.0 / 30);
  const auto out = retarget::retargetClip(clip, big, map);
  double worst = 0.0;
  for (std::size_t f = 0; f < clip.frameCount(); ++f) {
    const auto a = forwardKinematics(s, bvh::poseAtFrame(clip, f));
    const auto b = forwardKinematics(big, out.poses[f]);
    for (std::size_t k = 0; k < s.size(); ++k) {
      worst = std::max(worst, (b[k].translation - 2.0 * a[k].translation).norm());
    }
  }
  const double scaleError = std::abs(scale - 2.0);
  return {scaleError < 1e-9 && worst < 1e-4,
          "scale error " + fmt(scaleError) + ", max world position error " + fmt(worst) +
              " over 100 frames"};
}

// 6. Linear blend skinning
Outcome skinning() {
  std::mt19937_64 rng(1006);
  double bindWorst = 0.0, rigidWorst = 0.0;
  for (int rig = 0; rig < 10; ++rig) {
    const std::size_t joints = 4 + rng() % 12;
    const Skeleton skeleton = test::randomTree(joints, rng);
    Mesh mesh = test::gridMesh(6, 6);
    for (Vec3& v : mesh.vertices) {
      v = test::randomVec(rng, -2, 2);
    }
    mesh.normals = computeVertexNormals(mesh);
    std::vector<std::vector<skin::Influence>> raw(mesh.vertices.size());
    std::uniform_real_distribution<double> weight(0.05, 1.0);
    for (auto& list : raw) {
      const std::size_t k = 1 + rng() % 6;
      for (std::size_t i = 0; i < k; ++i) {
        list.push_back({static_cast<std::uint32_t>(rng() % joints), weight(rng)});
      }
    }
    const auto binding = skin::makeBinding(skeleton, raw);
    const Mesh bind = skin::skinMesh(mesh, binding, binding.bindPose);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      bindWorst = std::max(bindWorst, (bind.vertices[v] - mesh.vertices[v]).norm());
    }
    for (int trial = 0; trial < 10; ++trial) {
      Transform t;
      t.rotation = test::randomQuat(rng);
      t.translation = test::randomVec(rng, -5, 5);
      const Mesh out = skin::skinMesh(mesh, binding, composeRigid(skeleton, t, binding.bindPose));
      for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        rigidWorst = std::max(rigidWorst, (out.vertices[v] - t.apply(mesh.vertices[v])).norm());
      }
    }
  }
  return {bindWorst < 1e-9 && rigidWorst < 1e-6,
          "bind pose error " + fmt(bindWorst) + ", rigid error " + fmt(rigidWorst) +
              " over 100 transforms"};
}

// 7. Penetration resolution on nested spheres
Outcome penetration() {
  const auto start = std::chrono::steady_clock::now();
  const Mesh body = primitives::icosphere(3);
  const Mesh cloth = primitives::icosphere(3, 0.9);
  const double eps = 0.01;
  const Mesh out = skin::resolvePenetration(body, cloth, eps);
  const skin::WindingNumber winding(body);
  const skin::SurfaceQuery surface(body);
  std::size_t outside = 0, farEnough = 0, bounded = 0;
  for (std::size_t v = 0; v < out.vertices.size(); ++v) {
    outside += winding(out.vertices[v]) < 0.5;
    farEnough += out.vertices[v].norm() >= 1.01 - 5e-3;
    const double depth = surface.closest(cloth.vertices[v]).distance;
    bounded += (out.vertices[v] - cloth.vertices[v]).norm() <= depth + eps + 5e-3;
  }
  const std::size_t n = out.vertices.size();
  const double t = elapsed(start);
  return {body.faces.size() == 1280 && outside == n && farEnough == n && bounded == n && t < 10.0,
          std::to_string(body.faces.size()) + " body faces, " + std::to_string(n) +
              " cloth vertices: " + std::to_string(outside) + " outside, " +
              std::to_string(farEnough) + " at radius, " + std::to_string(bounded) +
              " within displacement bound; " + fmt(t) + " s"};
}

std::map<std::string, std::string> treeHashes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out[e.path().lexically_relative(dir).generic_string()] = sha256File(e.path());
    }
  }
  return out;
}

// 8. Deterministic dataset generation
Outcome datasetDeterminism() {
  test::TempDir dir("avf-acceptance-dataset");
  demo::writeLibrary(dir.path() / "lib");
  const std::size_t clipFrames = 20, stride = 5;
  for (const char* kind : {"walk", "wave"}) {
    bvh::saveBvh(demo::motion(kind, clipFrames), dir.path() / (std::string(kind) + ".bvh"));
  }
  writeFileText(dir.path() / "map.json", demo::motionMapJson());
  const json sets = {json::array(), {"garment-shirt"}, {"garment-skirt"}, {"garment-shirt", "garment-skirt"}};
  auto config = [&](const std::string& out) {
    return json{{"library", "lib"},
                {"sampling", {{"count", 2}, {"seed", 77}}},
                {"garment_sets", sets},
                {"motions",
                 {{{"bvh", "walk.bvh"}, {"map", "map.json"}}, {{"bvh", "wave.bvh"}, {"map", "map.json"}}}},
                {"stride", stride},
                {"outputs", {"mesh", "gltf", "joints3d", "segmentation", "normals"}},
                {"output_dir", out}};
  };
  const auto start = std::chrono::steady_clock::now();
  const auto a = dataset::runGeneration(dataset::parseConfig(config("run_a").dump(), dir.path()));
  const auto b = dataset::runGeneration(dataset::parseConfig(config("run_b").dump(), dir.path()));
  const double t = elapsed(start);

  const std::size_t shapes = 2, motions = 2;
  const std::size_t expectedCombos = shapes * sets.size() * motions;
  const std::size_t framesPerCombo = (clipFrames + stride - 1) / stride;
  const auto ha = treeHashes(dir.path() / "run_a");
  const auto hb = treeHashes(dir.path() / "run_b");
  const bool identical = ha == hb && !ha.empty();
  const bool counted = a.combinations == expectedCombos && a.failed == 0 &&
                       a.frames == expectedCombos * framesPerCombo && b.combinations == a.combinations;
  return {identical && counted && t < 60.0,
          std::to_string(a.combinations) + " combinations (expected " + std::to_string(expectedCombos) +
              "), " + std::to_string(a.frames) + " frames, " + std::to_string(ha.size()) +
              " files " + (identical ? "byte-identical" : "differ") + " across runs; " + fmt(t) +
              " s for both"};
}

// Minimal payload reader, independent of the encoder.
struct Section {
  std::uint32_t kind = 0, count = 0, components = 0;
  std::string name;
  std::string bytes;
};

std::vector<Section> decodeGeometry(const std::string& b) {
  auto u32 = [&](std::size_t at) {
    std::uint32_t v;
    std::memcpy(&v, b.data() + at, 4);
    return v;
  };
  if (b.size() < 32 || b.compare(0, 8, std::string("AVGEOM\0\0", 8)) != 0) {
    throw std::runtime_error("bad payload header");
  }
  std::vector<Section> out;
  for (std::uint32_t s = 0; s < u32(12); ++s) {
    const std::size_t at = 32 + 32 * s;
    Section sec;
    sec.kind = u32(at);
    sec.count = u32(at + 4);
    sec.components = u32(at + 8);
    sec.bytes = b.substr(u32(at + 16), u32(at + 20));
    sec.name = b.substr(u32(at + 24), u32(at + 28));
    out.push_back(std::move(sec));
  }
  return out;
}

std::string floatBytes(const std::vector<float>& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), 4 * v.size());
}

std::string vertexBytes(const Mesh& m) {
  std::vector<float> v;
  for (std::size_t i = 0; i < m.vertexCount(); ++i) {
    for (int c = 0; c < 3; ++c) {
      v.push_back(static_cast<float>(m.vertices[i][c]));
    }
    for (int c = 0; c < 3; ++c) {
      v.push_back(static_cast<float>(m.normals[i][c]));
    }
  }
  return floatBytes(v);
}

std::string triangleBytes(const Mesh& m) {
  std::vector<std::uint32_t> idx;
  for (const auto& t : triangulate(m)) {
    idx.insert(idx.end(), t.begin(), t.end());
  }
  return std::string(reinterpret_cast<const char*>(idx.data()), 4 * idx.size());
}

// 9. Service geometry against the offline pipeline
Outcome serviceEquivalence() {
  test::TempDir dir("avf-acceptance-service");
  const fs::path lib = dir.path() / "lib";
  demo::writeLibrary(lib);

  // Offline evaluation straight from the asset files.
  const auto library = assets::scanLibrary(lib);
  const auto body = assets::loadBody(*library.find("body-demo"));
  std::map<std::string, skin::GarmentAsset> garments;
  for (const auto* e : library.ofKind(assets::AssetKind::Garment)) {
    garments.emplace(e->id, assets::loadGarment(*e, &body.skeleton));
  }
  std::map<std::string, retarget::RetargetedClip> clips;
  for (const auto* e : library.ofKind(assets::AssetKind::Motion)) {
    const auto m = assets::loadMotion(*e);
    const auto map = retarget::buildRetargetMap(m.clip.skeleton, body.skeleton, m.map);
    clips.emplace(e->id, retarget::retargetClip(m.clip, body.skeleton, map));
  }

  service::AvatarService svc({lib, "", std::chrono::seconds(1800)});
  service::HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  std::thread thread([&] { server.run(); });
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);

  std::mt19937_64 rng(1009);
  std::size_t matched = 0;
  std::string failure;
  try {
    for (int trial = 0; trial < 20 && failure.empty(); ++trial) {
      std::vector<double> alpha;
      json weights;
      for (std::size_t a = 0; a < body.basis.attributeNames.size(); ++a) {
        const auto& bounds = body.basis.weightBounds[a];
        alpha.push_back(std::uniform_real_distribution<double>(bounds.min, bounds.max)(rng));
        weights[body.basis.attributeNames[a]] = alpha.back();
      }
      std::vector<std::string> worn;
      for (const auto& [gid, _] : garments) {
        if (rng() % 2 == 0) {
          worn.push_back(gid);
        }
      }
      auto clip = clips.begin();
      std::advance(clip, rng() % clips.size());
      const std::size_t frame = rng() % clip->second.poses.size();

      auto created = client.Post("/sessions");
      if (!created || created->status != 201) {
        throw std::runtime_error("session creation failed");
      }
      const std::string base = "/sessions/" + json::parse(created->body)["id"].get<std::string>();
      auto expectOk = [&](const httplib::Result& r, const std::string& what) {
        if (!r || r->status != 200) {
          throw std::runtime_error(what + " failed");
        }
      };
      expectOk(client.Put(base + "/shape", json{{"weights", weights}}.dump(), "application/json"), "shape");
      for (const auto& gid : worn) {
        expectOk(client.Post(base + "/garments/" + gid), "garment " + gid);
      }
      expectOk(client.Post(base + "/motion", json{{"asset", clip->first}}.dump(), "application/json"),
               "motion");
      expectOk(client.Put(base + "/frame", json{{"index", frame}}.dump(), "application/json"), "frame");
      auto res = client.Get(base + "/geometry");
      expectOk(res, "geometry");
      const auto sections = decodeGeometry(res->body);

      std::vector<const skin::GarmentAsset*> parts;
      for (const auto& gid : worn) {
        parts.push_back(&garments.at(gid));
      }
      const auto dressed =
          pipeline::dress(body, shape::ShapeWeights::clamped(body.basis, alpha), parts);
      const auto posed = pipeline::pose(dressed, body.binding, clip->second.poses.at(frame));

      std::vector<std::pair<std::string, std::string>> expected = {
          {"body", vertexBytes(posed.body)}, {"body", triangleBytes(posed.body)}};
      for (std::size_t k = 0; k < worn.size(); ++k) {
        expected.emplace_back(worn[k], vertexBytes(posed.garments[k]));
        expected.emplace_back(worn[k], triangleBytes(posed.garments[k]));
      }
      std::vector<float> joints;
      for (const Vec3& j : posed.joints) {
        joints.insert(joints.end(), {static_cast<float>(j.x()), static_cast<float>(j.y()),
                                     static_cast<float>(j.z())});
      }
      expected.emplace_back("joints", floatBytes(joints));

      if (sections.size() != expected.size()) {
        failure = "trial " + std::to_string(trial) + ": section count";
        break;
      }
      for (std::size_t s = 0; s < sections.size(); ++s) {
        if (sections[s].name != expected[s].first || sections[s].bytes != expected[s].second) {
          failure = "trial " + std::to_string(trial) + ": section " + sections[s].name + " differs";
          break;
        }
      }
      if (failure.empty()) {
        ++matched;
      }
      client.Delete(base);
    }
  } catch (const std::exception& e) {
    failure = e.what();
  }
  server.stop();
  thread.join();
  return {matched == 20, std::to_string(matched) + "/20 random states bit-identical" +
                             (failure.empty() ? "" : " (" + failure + ")")};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"blendshape evaluation", blendshapes},
      {"attribute PCA matches dense oracle", subsetPca},
      {"BVH round trip and fuzzing", bvhRoundTrip},
      {"identity retarget", retargetIdentity},
      {"scaled retarget", retargetScale},
      {"linear blend skinning", skinning},
      {"penetration resolution", penetration},
      {"dataset determinism", datasetDeterminism},
      {"service matches offline pipeline", serviceEquivalence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
