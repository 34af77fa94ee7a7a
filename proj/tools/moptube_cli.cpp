/* Copyright 2026 The moptube Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// moptube command line driver. Talks to the library only through moptube.h.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 stage failure.

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moptube/moptube.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitStage = 4;

int exitCodeFor(mt_status s) {
  switch (s) {
    case MT_OK: return 0;
    case MT_ERR_ARGUMENT: return kExitConfig;
    case MT_ERR_FORMAT:
    case MT_ERR_IO:
    case MT_ERR_DATA: return kExitData;
    default: return kExitStage;
  }
}

struct ConfigDeleter {
  void operator()(mt_config* c) const { mt_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<mt_config, ConfigDeleter>;

struct Failure {
  int code;
};

void check(mt_status s) {
  if (s == MT_OK) return;
  std::fprintf(stderr, "moptube: error: %s\n", mt_last_error());
  throw Failure{exitCodeFor(s)};
}

void printWarnings() {
  for (size_t i = 0; i < mt_warning_count(); ++i) std::fprintf(stderr, "moptube: warning: %s\n", mt_warning(i));
}

std::string configText(const mt_config* cfg) {
  size_t len = 0;
  check(mt_config_text(cfg, nullptr, 0, &len));
  std::string s(len + 1, '\0');
  check(mt_config_text(cfg, s.data(), s.size(), &len));
  s.resize(len);
  return s;
}

struct Options {
  std::string config;
  std::string out;
  std::string seed;
  std::string threads;
  std::vector<std::string> sets;
  std::map<std::string, std::string> keyFlags;
  // stage inputs
  std::string scene, boundaries, trajectories, proposals, clusters, tubes, ranked, tube, spec = "single";
};

ConfigPtr resolveConfig(const Options& o) {
  mt_config* raw = nullptr;
  check(mt_config_create(&raw));
  ConfigPtr cfg(raw);
  if (!o.config.empty()) check(mt_config_load(cfg.get(), o.config.c_str()));
  for (const auto& [k, v] : o.keyFlags)
    if (!v.empty()) check(mt_config_set(cfg.get(), k.c_str(), v.c_str()));
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "moptube: error: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{kExitConfig};
    }
    check(mt_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  if (!o.seed.empty()) check(mt_config_set(cfg.get(), "seed", o.seed.c_str()));
  if (!o.threads.empty()) check(mt_config_set(cfg.get(), "threads", o.threads.c_str()));
  check(mt_config_validate(cfg.get()));
  std::fprintf(stderr, "# resolved config\n%s", configText(cfg.get()).c_str());
  return cfg;
}

std::string requireOpt(const std::string& v, const char* name) {
  if (v.empty()) {
    std::fprintf(stderr, "moptube: error: %s is required\n", name);
    throw Failure{kExitConfig};
  }
  return v;
}

std::string sceneOrManifest(const Options& o) {
  if (!o.scene.empty()) return o.scene;
  if (o.config.size() > 5 && o.config.substr(o.config.size() - 5) == ".json") {
    size_t len = 0;
    check(mt_manifest_scene(o.config.c_str(), nullptr, 0, &len));
    std::string s(len + 1, '\0');
    check(mt_manifest_scene(o.config.c_str(), s.data(), s.size(), &len));
    s.resize(len);
    return s;
  }
  return requireOpt(o.scene, "--scene");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moptube: moving-object tube proposals"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "key = value config file or a run.json manifest");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--threads", o.threads, "worker cap (0 = all cores)");
  app.add_option("--set", o.sets, "config override key=value (repeatable)");
  for (size_t i = 0; i < mt_config_key_count(); ++i) {
    const std::string key = mt_config_key(i);
    if (key == "seed" || key == "threads") continue;
    app.add_option("--" + key, o.keyFlags[key], "override config key " + key)->group("Config overrides");
  }

  auto* synth = app.add_subcommand("synth", "write a synthetic scene");
  synth->add_option("--scene-spec", o.spec, "preset (single, two, static) or synthetic config .json");

  auto* boundaries = app.add_subcommand("boundaries", "motion and image boundary maps");
  auto* mops = app.add_subcommand("mops", "per-frame motion and static proposals");
  auto* track = app.add_subcommand("track", "link flow into point trajectories");
  auto* cluster = app.add_subcommand("cluster", "affinities, propagation and spectral clusters");
  auto* tubes = app.add_subcommand("tubes", "supervoxels and cluster projection");
  auto* rankCmd = app.add_subcommand("rank", "score and rank tubes");
  auto* evalCmd = app.add_subcommand("eval", "evaluate ranked tubes against ground truth");
  auto* overlay = app.add_subcommand("overlay", "render a tube over its frames");
  auto* run = app.add_subcommand("run", "full pipeline");

  for (auto* c : {boundaries, mops, track, tubes, rankCmd, evalCmd, overlay, run})
    c->add_option("--scene", o.scene, "scene.json");
  for (auto* c : {mops, tubes}) c->add_option("--boundaries", o.boundaries, "boundaries directory");
  for (auto* c : {cluster, tubes}) c->add_option("--trajectories", o.trajectories, "trajectories.jsonl");
  for (auto* c : {cluster, evalCmd}) c->add_option("--proposals", o.proposals, "proposals.json");
  tubes->add_option("--clusters", o.clusters, "clusters.json");
  rankCmd->add_option("--tubes", o.tubes, "tubes.json");
  evalCmd->add_option("--ranked", o.ranked, "ranked.json");
  overlay->add_option("--tube", o.tube, "tube directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const std::string out = requireOpt(o.out, "--out");
    if (synth->parsed()) {
      const ConfigPtr cfg = resolveConfig(o);
      char seed[32] = {0};
      check(mt_config_get(cfg.get(), "seed", seed, sizeof seed, nullptr));
      check(mt_synth(o.spec.c_str(), std::stoull(seed), out.c_str()));
    } else if (boundaries->parsed()) {
      const ConfigPtr cfg = resolveConfig(o);
      check(mt_stage_boundaries(cfg.get(), requireOpt(o.scene, "--scene").c_str(), out.c_str()));
    } else if (mops->parsed()) {
      const ConfigPtr cfg = resolveConfig(o);
      check(mt_stage_mops(cfg.get(), requireOpt(o.scene, "--scene").c_str(),
                          requireOpt(o.boundaries, "--boundaries").c_str(), out.c_str()));
    } else if (track->parsed()) {
      const ConfigPtr cfg = resolveConfig(o);
      check(mt_stage_track(cfg.get(), requireOpt(o.scene, "--scene").c_str(), out.c_str()));
    } else if (cluster->parsed()) {
      const ConfigPtr cfg = resolveConfig(o);
      check(mt_stage_cluster(cfg.get(), requireOpt(o.trajectories, "--trajectories").c_str(),
                             requireOpt(o.proposals, "--proposals").c_str(), out.c_str()));
    } else if (tubes->parsed()) {
      const ConfigPtr cfg = resolveConfig(o);
      check(mt_stage_tubes(cfg.get(), requireOpt(o.scene, "--scene").c_str(),
                           requireOpt(o.boundaries, "--boundaries").c_str(),
                           requireOpt(o.trajectories, "--trajectories").c_str(),
                           requireOpt(o.clusters, "--clusters").c_str(), out.c_str()));
    } else if (rankCmd->parsed()) {
      const ConfigPtr cfg = resolveConfig(o);
      check(mt_stage_rank(cfg.get(), requireOpt(o.scene, "--scene").c_str(), requireOpt(o.tubes, "--tubes").c_str(),
                          out.c_str()));
    } else if (evalCmd->parsed()) {
      const ConfigPtr cfg = resolveConfig(o);
      check(mt_stage_eval(cfg.get(), requireOpt(o.scene, "--scene").c_str(), requireOpt(o.ranked, "--ranked").c_str(),
                          o.proposals.empty() ? nullptr : o.proposals.c_str(), out.c_str()));
    } else if (overlay->parsed()) {
      check(mt_overlay(requireOpt(o.scene, "--scene").c_str(), requireOpt(o.tube, "--tube").c_str(), out.c_str()));
    } else if (run->parsed()) {
      const ConfigPtr cfg = resolveConfig(o);
      const std::string scene = sceneOrManifest(o);
      mt_run_summary s{};
      check(mt_run(cfg.get(), scene.c_str(), out.c_str(), &s));
      std::printf("proposals: %d motion, %d static, %d kept\n", s.motion_proposals, s.static_proposals,
                  s.kept_proposals);
      std::printf("trajectories: %d, affinities: %d, clusters: %d, tubes: %d\n", s.trajectories, s.affinity_entries,
                  s.clusters, s.tubes);
      if (s.evaluated)
        std::printf("ABO %.4f  coverage %.4f  det50 %.4f  det70 %.4f  top-1 IoU %.4f\n", s.average_best_overlap,
                    s.coverage, s.det50, s.det70, s.top_tube_iou);
    }
    printWarnings();
  } catch (const Failure& f) {
    printWarnings();
    return f.code;
  }
  return 0;
}
