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

#include "moptube/moptube.h"

#include <cstring>
#include <fstream>
#include <new>
#include <string>
#include <vector>

#include <json.hpp>

#include "moptube/pipeline.hpp"

struct mt_config {
  moptube::PipelineConfig cfg;
};

struct mt_flow {
  moptube::FlowField flow;
};

struct mt_affinity {
  moptube::SparseAffinity a;
};

namespace {

thread_local std::string lastError;
thread_local std::vector<std::string> lastWarnings;

mt_status toStatus(moptube::ErrorCode c) {
  switch (c) {
    case moptube::ErrorCode::argument: return MT_ERR_ARGUMENT;
    case moptube::ErrorCode::format: return MT_ERR_FORMAT;
    case moptube::ErrorCode::io: return MT_ERR_IO;
    case moptube::ErrorCode::data: return MT_ERR_DATA;
    case moptube::ErrorCode::stage: return MT_ERR_STAGE;
  }
  return MT_ERR_INTERNAL;
}

template <class Fn>
mt_status guarded(Fn&& fn) {
  lastError.clear();
  try {
    fn();
    return MT_OK;
  } catch (const moptube::Error& e) {
    lastError = e.what();
    return toStatus(e.code());
  } catch (const std::bad_alloc&) {
    lastError = "out of memory";
  } catch (const std::exception& e) {
    lastError = e.what();
  } catch (...) {
    lastError = "unknown error";
  }
  return MT_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) moptube::fail(moptube::ErrorCode::argument, std::string(what) + " is null");
}

void copyOut(const std::string& s, char* buf, std::size_t cap, std::size_t* len) {
  if (len) *len = s.size();
  if (buf && cap > 0) {
    const std::size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
}

std::string str(const char* p, const char* what) {
  need(p, what);
  return p;
}

// Stage calls validate first so bad values surface as argument errors.
const moptube::PipelineConfig& validated(const mt_config* c) {
  need(c, "config");
  c->cfg.validate();
  return c->cfg;
}

}  // namespace

extern "C" {

const char* mt_version(void) { return "1.0.0"; }
const char* mt_last_error(void) { return lastError.c_str(); }
size_t mt_warning_count(void) { return lastWarnings.size(); }
const char* mt_warning(size_t index) { return index < lastWarnings.size() ? lastWarnings[index].c_str() : nullptr; }

mt_status mt_config_create(mt_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new mt_config();
  });
}

void mt_config_destroy(mt_config* cfg) { delete cfg; }

mt_status mt_config_set(mt_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.set(str(key, "key"), str(value, "value"));
  });
}

mt_status mt_config_get(const mt_config* cfg, const char* key, char* buf, size_t cap, size_t* len) {
  return guarded([&] {
    need(cfg, "config");
    copyOut(cfg->cfg.get(str(key, "key")), buf, cap, len);
  });
}

mt_status mt_config_load(mt_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.loadFile(str(path, "path"));
  });
}

mt_status mt_config_parse(mt_config* cfg, const char* text) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.parse(str(text, "text"));
  });
}

mt_status mt_config_validate(const mt_config* cfg) {
  return guarded([&] { validated(cfg); });
}

mt_status mt_config_text(const mt_config* cfg, char* buf, size_t cap, size_t* len) {
  return guarded([&] {
    need(cfg, "config");
    copyOut(cfg->cfg.toText(), buf, cap, len);
  });
}

size_t mt_config_key_count(void) { return moptube::PipelineConfig::keys().size(); }

const char* mt_config_key(size_t index) {
  const auto& k = moptube::PipelineConfig::keys();
  return index < k.size() ? k[index].c_str() : nullptr;
}

mt_status mt_manifest_scene(const char* manifest, char* buf, size_t cap, size_t* len) {
  return guarded([&] {
    const std::string path = str(manifest, "manifest");
    std::ifstream in(path);
    if (!in) moptube::fail(moptube::ErrorCode::io, "cannot open: " + path);
    try {
      const auto j = nlohmann::json::parse(in);
      copyOut(j.at("scene").get<std::string>(), buf, cap, len);
    } catch (const nlohmann::json::exception& e) {
      moptube::fail(moptube::ErrorCode::format, "bad run manifest " + path + ": " + e.what());
    }
  });
}

mt_status mt_synth(const char* spec, uint64_t seed, const char* out_dir) {
  return guarded([&] {
    const std::string s = str(spec, "spec");
    moptube::SynthConfig c;
    if (s.size() > 5 && s.substr(s.size() - 5) == ".json") {
      c = moptube::loadSynthConfig(s);
      c.seed = seed;
    } else {
      c = moptube::synthPreset(s, seed);
    }
    moptube::stageSynth(c, str(out_dir, "out_dir"));
  });
}

mt_status mt_stage_boundaries(const mt_config* cfg, const char* scene, const char* out_dir) {
  return guarded([&] { moptube::stageBoundaries(validated(cfg), str(scene, "scene"), str(out_dir, "out_dir")); });
}

mt_status mt_stage_mops(const mt_config* cfg, const char* scene, const char* boundaries_dir, const char* out_dir) {
  lastWarnings.clear();
  return guarded([&] {
    moptube::StageWarnings w;
    moptube::stageMops(validated(cfg), str(scene, "scene"), str(boundaries_dir, "boundaries_dir"),
                       str(out_dir, "out_dir"), w);
    lastWarnings = w.messages;
  });
}

mt_status mt_stage_track(const mt_config* cfg, const char* scene, const char* out_dir) {
  return guarded([&] { moptube::stageTrack(validated(cfg), str(scene, "scene"), str(out_dir, "out_dir")); });
}

mt_status mt_stage_cluster(const mt_config* cfg, const char* trajectories, const char* proposals,
                           const char* out_dir) {
  lastWarnings.clear();
  return guarded([&] {
    moptube::StageWarnings w;
    moptube::stageCluster(validated(cfg), str(trajectories, "trajectories"), str(proposals, "proposals"),
                          str(out_dir, "out_dir"), w);
    lastWarnings = w.messages;
  });
}

mt_status mt_stage_tubes(const mt_config* cfg, const char* scene, const char* boundaries_dir,
                         const char* trajectories, const char* clusters, const char* out_dir) {
  lastWarnings.clear();
  return guarded([&] {
    moptube::StageWarnings w;
    moptube::stageTubes(validated(cfg), str(scene, "scene"), str(boundaries_dir, "boundaries_dir"),
                        str(trajectories, "trajectories"), str(clusters, "clusters"), str(out_dir, "out_dir"), w);
    lastWarnings = w.messages;
  });
}

mt_status mt_stage_rank(const mt_config* cfg, const char* scene, const char* tubes, const char* out_dir) {
  return guarded(
      [&] { moptube::stageRank(validated(cfg), str(scene, "scene"), str(tubes, "tubes"), str(out_dir, "out_dir")); });
}

mt_status mt_stage_eval(const mt_config* cfg, const char* scene, const char* ranked, const char* proposals,
                        const char* out_dir) {
  return guarded([&] {
    moptube::stageEval(validated(cfg), str(scene, "scene"), str(ranked, "ranked"),
                       proposals ? std::string(proposals) : std::string(), str(out_dir, "out_dir"));
  });
}

mt_status mt_overlay(const char* scene, const char* tube_dir, const char* out_dir) {
  return guarded([&] { moptube::stageOverlay(str(scene, "scene"), str(tube_dir, "tube_dir"), str(out_dir, "out_dir")); });
}

mt_status mt_run(const mt_config* cfg, const char* scene, const char* out_dir, mt_run_summary* summary) {
  lastWarnings.clear();
  return guarded([&] {
    const auto s = moptube::runPipeline(validated(cfg), str(scene, "scene"), str(out_dir, "out_dir"));
    lastWarnings = s.warnings;
    if (summary) {
      summary->motion_proposals = s.motionProposals;
      summary->static_proposals = s.staticProposals;
      summary->kept_proposals = s.keptProposals;
      summary->trajectories = s.trajectories;
      summary->affinity_entries = s.affinityEntries;
      summary->clusters = s.clusters;
      summary->tubes = s.tubes;
      summary->evaluated = s.evaluated ? 1 : 0;
      summary->average_best_overlap = s.aggregates.averageBestOverlap;
      summary->coverage = s.aggregates.coverage;
      summary->det50 = s.aggregates.det50;
      summary->det70 = s.aggregates.det70;
      summary->top_tube_iou = s.topTubeIoU;
    }
  });
}

mt_status mt_flow_create(int width, int height, const float* uv, mt_flow** out) {
  return guarded([&] {
    need(out, "out");
    if (width < 1 || height < 1) moptube::fail(moptube::ErrorCode::argument, "flow dimensions must be positive");
    auto f = std::make_unique<mt_flow>();
    f->flow = moptube::FlowField(width, height);
    if (uv)
      for (std::size_t i = 0; i < f->flow.u.size(); ++i) {
        f->flow.u[i] = uv[2 * i];
        f->flow.v[i] = uv[2 * i + 1];
      }
    *out = f.release();
  });
}

mt_status mt_flow_load(const char* path, mt_flow** out) {
  return guarded([&] {
    need(out, "out");
    auto f = std::make_unique<mt_flow>();
    f->flow = moptube::loadFlow(str(path, "path"));
    *out = f.release();
  });
}

mt_status mt_flow_save(const mt_flow* flow, const char* path) {
  return guarded([&] {
    need(flow, "flow");
    moptube::saveFlow(flow->flow, str(path, "path"));
  });
}

mt_status mt_flow_size(const mt_flow* flow, int* width, int* height) {
  return guarded([&] {
    need(flow, "flow");
    if (width) *width = flow->flow.width;
    if (height) *height = flow->flow.height;
  });
}

mt_status mt_flow_copy_uv(const mt_flow* flow, float* uv, size_t cap_floats) {
  return guarded([&] {
    need(flow, "flow");
    need(uv, "uv");
    const std::size_t n = flow->flow.u.size();
    if (cap_floats < 2 * n) moptube::fail(moptube::ErrorCode::argument, "uv buffer too small");
    for (std::size_t i = 0; i < n; ++i) {
      uv[2 * i] = flow->flow.u[i];
      uv[2 * i + 1] = flow->flow.v[i];
    }
  });
}

void mt_flow_destroy(mt_flow* flow) { delete flow; }

mt_status mt_affinity_create(int n, const int* i, const int* j, const double* w, size_t m, mt_affinity** out) {
  return guarded([&] {
    need(out, "out");
    if (m > 0) {
      need(i, "i");
      need(j, "j");
      need(w, "w");
    }
    std::vector<moptube::AffinityEntry> e(m);
    for (std::size_t k = 0; k < m; ++k) e[k] = {i[k], j[k], w[k]};
    auto a = std::make_unique<mt_affinity>();
    a->a = moptube::SparseAffinity(n, std::move(e));
    *out = a.release();
  });
}

mt_status mt_affinity_load(const char* path, mt_affinity** out) {
  return guarded([&] {
    need(out, "out");
    auto a = std::make_unique<mt_affinity>();
    a->a = moptube::loadAffinity(str(path, "path"));
    *out = a.release();
  });
}

mt_status mt_affinity_size(const mt_affinity* a, int* n, size_t* entries) {
  return guarded([&] {
    need(a, "affinity");
    if (n) *n = a->a.n();
    if (entries) *entries = a->a.entries().size();
  });
}

void mt_affinity_destroy(mt_affinity* a) { delete a; }

mt_status mt_random_walk(const mt_affinity* a, const uint8_t* marks, int iters, double* x, int* unreachable) {
  return guarded([&] {
    need(a, "affinity");
    need(marks, "marks");
    need(x, "x");
    std::vector<int> fg, bg;
    for (int k = 0; k < a->a.n(); ++k) {
      if (marks[k] == MT_FOREGROUND) fg.push_back(k);
      else if (marks[k] == MT_BACKGROUND) bg.push_back(k);
      else if (marks[k] != MT_UNLABELED) moptube::fail(moptube::ErrorCode::argument, "invalid mark value");
    }
    const auto la = moptube::makeAssignment(a->a.n(), fg, bg);
    const auto r = iters < 0 ? moptube::solveExact(a->a, la) : moptube::diffuse(a->a, la, iters);
    std::copy(r.x.begin(), r.x.end(), x);
    if (unreachable) *unreachable = r.unreachable ? 1 : 0;
  });
}

mt_status mt_quadratic_form(const mt_affinity* a, const double* x, double* out) {
  return guarded([&] {
    need(a, "affinity");
    need(x, "x");
    need(out, "out");
    const moptube::Laplacian l(a->a);
    *out = moptube::quadraticForm(l, std::span<const double>(x, static_cast<std::size_t>(a->a.n())));
  });
}

mt_status mt_tube_iou(const char* tube_dir_a, const char* tube_dir_b, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = moptube::tubeIoU(moptube::loadTube(str(tube_dir_a, "tube_dir_a")), moptube::loadTube(str(tube_dir_b, "tube_dir_b")));
  });
}

}  // extern "C"
