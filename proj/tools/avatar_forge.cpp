#include <avatarforge/avatarforge.h>

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <string>
#include <thread>

namespace {

struct Failure {
  avf_status status;
};

void check(avf_status status) {
  if (status != AVF_OK) {
    throw Failure{status};
  }
}

// Owns a C handle.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (p) {
      Free(p);
    }
  }
  T** out() {
    return &p;
  }
  T* get() const {
    return p;
  }
};

using Basis = Handle<avf_basis, avf_basis_free>;
using Motion = Handle<avf_motion, avf_motion_free>;
using SkeletonH = Handle<avf_skeleton, avf_skeleton_free>;
using Map = Handle<avf_retarget_map, avf_retarget_map_free>;
using Retargeted = Handle<avf_retargeted, avf_retargeted_free>;
using Library = Handle<avf_library, avf_library_free>;
using Service = Handle<avf_service, avf_service_free>;
using Server = Handle<avf_server, avf_server_free>;

void printOwned(char* text) {
  std::cout << text;
  avf_string_free(text);
}

const char* optionalPath(const std::string& s) {
  return s.empty() ? nullptr : s.c_str();
}

int serve(const std::string& assets, int port, const std::string& host, const std::string& web,
          const std::string& body, unsigned idle) {
  // Signals go to a waiting thread so the server can shut down cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service;
  check(avf_service_create(assets.c_str(), optionalPath(body), idle, service.out()));
  Server server;
  check(avf_server_create(service.get(), optionalPath(web), server.out()));
  int bound = 0;
  check(avf_server_bind(server.get(), host.c_str(), port, &bound));
  std::cout << "listening on http://" << host << ":" << bound << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    avf_server_stop(server.get());
  });
  const avf_status status = avf_server_run(server.get());
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  check(status);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"avatar-forge: parametric bodies, motion retargeting, dressing and dataset generation"};
  app.set_version_flag("--version", std::string(avf_version()));
  app.require_subcommand(1);

  auto* basis = app.add_subcommand("basis", "blendshape basis tools");
  basis->require_subcommand(1);
  std::string corpus, rest, basisOut, basisFile;
  auto* basisBuild = basis->add_subcommand("build", "build an attribute basis from an OBJ corpus");
  basisBuild->add_option("--corpus", corpus, "corpus directory (one subdirectory per attribute)")
      ->required()
      ->check(CLI::ExistingDirectory);
  basisBuild->add_option("--rest", rest, "rest mesh (OBJ)")->required()->check(CLI::ExistingFile);
  basisBuild->add_option("--out", basisOut, "output basis (.avbasis, or .json)")->required();
  auto* basisInfo = basis->add_subcommand("info", "summarize a basis file");
  basisInfo->add_option("file", basisFile)->required()->check(CLI::ExistingFile);

  auto* bvh = app.add_subcommand("bvh", "BVH tools");
  bvh->require_subcommand(1);
  std::string bvhFile;
  auto* bvhInfo = bvh->add_subcommand("info", "print the hierarchy and motion summary");
  bvhInfo->add_option("file", bvhFile)->required()->check(CLI::ExistingFile);

  auto* retarget = app.add_subcommand("retarget", "retarget a BVH clip onto another skeleton");
  std::string rtBvh, rtTarget, rtMap, rtOut, rtFormat;
  retarget->add_option("--bvh", rtBvh, "source clip")->required()->check(CLI::ExistingFile);
  retarget->add_option("--target", rtTarget, "target skeleton (.json or .bvh)")
      ->required()
      ->check(CLI::ExistingFile);
  retarget->add_option("--map", rtMap, "map options (JSON)")->check(CLI::ExistingFile);
  retarget->add_option("--out", rtOut, "output (.bvh or pose binary)")->required();
  retarget->add_option("--format", rtFormat, "bvh or pose (default: from the extension)")
      ->check(CLI::IsMember({"bvh", "pose"}));

  auto* garment = app.add_subcommand("garment", "garment tools");
  garment->require_subcommand(1);
  std::string gBody, gCloth, gOut, gId, gName;
  double gEpsilon = 0.002;
  auto* garmentPrepare =
      garment->add_subcommand("prepare", "resolve penetration and transfer skin weights");
  garmentPrepare->add_option("--body", gBody, "body-basis asset (asset.json or its directory)")
      ->required()
      ->check(CLI::ExistingPath);
  garmentPrepare->add_option("--cloth", gCloth, "cloth mesh (OBJ) in the body's rest pose")
      ->required()
      ->check(CLI::ExistingFile);
  garmentPrepare->add_option("--out", gOut, "output garment asset directory")->required();
  garmentPrepare->add_option("--epsilon", gEpsilon, "clearance above the body surface")
      ->capture_default_str();
  garmentPrepare->add_option("--id", gId, "asset id (default: output directory name)");
  garmentPrepare->add_option("--name", gName, "display name");

  auto* assetsCmd = app.add_subcommand("assets", "asset library tools");
  assetsCmd->require_subcommand(1);
  std::string scanDir, demoOut, demoCorpus;
  auto* assetsScan = assetsCmd->add_subcommand("scan", "validate a library and print its catalogue");
  assetsScan->add_option("dir", scanDir)->required()->check(CLI::ExistingDirectory);
  auto* assetsDemo = assetsCmd->add_subcommand("demo", "write the synthetic demo library");
  assetsDemo->add_option("--out", demoOut, "library directory")->required();
  assetsDemo->add_option("--corpus", demoCorpus, "also write the OBJ attribute corpus here");

  auto* generate = app.add_subcommand("generate", "batch dataset generation");
  std::string config;
  generate->add_option("--config", config, "generation config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);

  auto* serveCmd = app.add_subcommand("serve", "run the session service");
  std::string serveAssets, serveHost = "127.0.0.1", serveWeb, serveBody;
  int servePort = 8080;
  unsigned serveIdle = 1800;
  serveCmd->add_option("--assets", serveAssets, "asset library directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  serveCmd->add_option("--port", servePort, "port (0: any free port)")
      ->capture_default_str()
      ->check(CLI::Range(0, 65535));
  serveCmd->add_option("--host", serveHost, "bind address")->capture_default_str();
  serveCmd->add_option("--web", serveWeb, "static studio bundle directory")
      ->check(CLI::ExistingDirectory);
  serveCmd->add_option("--body", serveBody, "body-basis asset id");
  serveCmd->add_option("--idle-timeout", serveIdle, "session idle eviction, seconds")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (basisBuild->parsed()) {
      Basis b;
      check(avf_basis_build(corpus.c_str(), rest.c_str(), b.out()));
      check(avf_basis_save(b.get(), basisOut.c_str()));
      std::cout << "wrote " << basisOut << ": " << avf_basis_vertex_count(b.get())
                << " vertices, " << avf_basis_attribute_count(b.get()) << " attributes\n";
    } else if (basisInfo->parsed()) {
      Basis b;
      check(avf_basis_load(basisFile.c_str(), b.out()));
      char* text = nullptr;
      check(avf_basis_describe(b.get(), &text));
      printOwned(text);
    } else if (bvhInfo->parsed()) {
      Motion m;
      check(avf_motion_load(bvhFile.c_str(), m.out()));
      char* text = nullptr;
      check(avf_motion_describe(m.get(), &text));
      printOwned(text);
    } else if (retarget->parsed()) {
      Motion source;
      check(avf_motion_load(rtBvh.c_str(), source.out()));
      SkeletonH target;
      check(avf_skeleton_load(rtTarget.c_str(), target.out()));
      Map map;
      check(avf_retarget_map_build(source.get(), target.get(), optionalPath(rtMap), map.out()));
      for (std::size_t i = 0; i < avf_retarget_map_warning_count(map.get()); ++i) {
        std::cerr << "warning: " << avf_retarget_map_warning(map.get(), i) << "\n";
      }
      Retargeted clip;
      check(avf_retarget_apply(source.get(), target.get(), map.get(), clip.out()));
      const bool asBvh = rtFormat.empty() ? std::filesystem::path(rtOut).extension() == ".bvh"
                                          : rtFormat == "bvh";
      check(asBvh ? avf_retargeted_save_bvh(clip.get(), rtOut.c_str())
                  : avf_retargeted_save_pose_binary(clip.get(), rtOut.c_str()));
      std::cout << "wrote " << rtOut << ": " << avf_retargeted_frame_count(clip.get())
                << " frames, " << avf_retarget_map_pair_count(map.get()) << " mapped joints, scale "
                << avf_retarget_map_scale(map.get()) << "\n";
    } else if (garmentPrepare->parsed()) {
      const std::string id =
          gId.empty() ? std::filesystem::path(gOut).lexically_normal().filename().string() : gId;
      avf_garment_report report{};
      check(avf_garment_prepare(gBody.c_str(), gCloth.c_str(), gEpsilon, id.c_str(),
                                optionalPath(gName), gOut.c_str(), &report));
      std::cout << "wrote " << gOut << ": " << report.vertices << " vertices, " << report.moved
                << " moved (max " << report.max_displacement << "), " << report.unresolved
                << " unresolved\n";
    } else if (assetsScan->parsed()) {
      Library lib;
      check(avf_library_scan(scanDir.c_str(), lib.out()));
      char* text = nullptr;
      check(avf_library_json(lib.get(), &text));
      printOwned(text);
      std::cout << "\n";
    } else if (assetsDemo->parsed()) {
      check(avf_demo_write(demoOut.c_str(), optionalPath(demoCorpus)));
      std::cout << "wrote demo library to " << demoOut << "\n";
      if (!demoCorpus.empty()) {
        std::cout << "wrote attribute corpus to " << demoCorpus << "\n";
      }
    } else if (generate->parsed()) {
      avf_generate_summary summary{};
      check(avf_generate(config.c_str(), &summary));
      std::cout << summary.combinations << " combinations, " << summary.failed << " failed, "
                << summary.frames << " frames, " << summary.files << " files\n";
    } else if (serveCmd->parsed()) {
      return serve(serveAssets, servePort, serveHost, serveWeb, serveBody, serveIdle);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << avf_status_name(f.status) << ": " << avf_last_error() << "\n";
    return 1;
  }
  return 0;
}
