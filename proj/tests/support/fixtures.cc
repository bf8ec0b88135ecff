// Copyright 2026 The spanlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "support/fixtures.h"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace spanlab::testing {

namespace {

SpanSet Set(std::string name, const std::vector<std::string>& phrases) {
  SpanSet s;
  s.name = std::move(name);
  for (const std::string& p : phrases) s.spans.push_back({p, SpanProvenance::kUser});
  return s;
}

Rule MakeRule(std::vector<std::string> sequence, std::string label, std::int64_t idx) {
  Rule r;
  r.sequence = std::move(sequence);
  r.label = std::move(label);
  r.creation_index = idx;
  return r;
}

}  // namespace

TaskDefinition StanceTask() {
  TaskDefinition task;
  task.type = TaskType::kTargetSpecific;
  task.targets = {MakeTargetSpec("Smith", {"Smith"})};
  task.label_categories = {"Favor", "Against"};
  return task;
}

std::vector<SpanSet> StanceSpanSets() {
  return {Set("negation", {"not"}),
          Set("support", {"agree with", "trust", "believe", "back up"})};
}

LabelingFunction StanceLf() {
  LabelingFunction lf;
  lf.id = "stance";
  lf.name = "stance toward Smith";
  lf.span_set_names = {"negation", "support"};
  lf.rules = {MakeRule({"support"}, "Favor", 0),
              MakeRule({"negation", "support"}, "Against", 1)};
  lf.aggregation.kind = AggregationKind::kNearestNeighbor;
  lf.aggregation.direction = SearchDirection::kPreceding;
  return lf;
}

Project StanceProject() {
  Corpus corpus({MakeDocument("d1", kStanceSentence)}, {});
  Project p = CreateProject(StanceTask(), std::move(corpus));
  for (const SpanSet& s : StanceSpanSets()) PutSpanSet(p, s);
  PutLf(p, StanceLf());
  return p;
}

Project ScaleProject(std::size_t n_docs, std::size_t n_lfs, std::uint64_t seed) {
  const SyntheticScenario sc = MakeSyntheticScenario(n_docs, seed);
  ProjectConfig config;
  config.seed = seed;
  Project p = CreateProject(sc.task, sc.corpus, config);
  PutSpanSet(p, Set("negation", sc.lexicon.at("negation")));
  const std::vector<std::string>& pos = sc.lexicon.at("positive");
  const std::vector<std::string>& neg = sc.lexicon.at("negative");
  const std::string pos_label = sc.task.label_categories.at(0);
  const std::string neg_label = sc.task.label_categories.at(1);
  for (std::size_t i = 0; i < n_lfs; ++i) {
    const bool positive = i % 2 == 0;
    const std::vector<std::string>& cues = positive ? pos : neg;
    const std::string cue = cues[(i / 2) % cues.size()];
    const std::string set_name = (positive ? "pos_" : "neg_") + std::to_string(i / 2);
    if (!p.FindSpanSet(set_name)) PutSpanSet(p, Set(set_name, {cue}));
    LabelingFunction lf;
    lf.id = "lf_" + std::to_string(i);
    lf.span_set_names = {"negation", set_name};
    lf.rules = {MakeRule({set_name}, positive ? pos_label : neg_label, 0),
                MakeRule({"negation", set_name}, positive ? neg_label : pos_label, 1)};
    PutLf(p, lf);
  }
  return p;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("spanlab_" + tag + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string ReadFileOrDie(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileOrDie(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace spanlab::testing
