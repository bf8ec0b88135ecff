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

#include <benchmark/benchmark.h>

#include "spanlab/engine.h"
#include "spanlab/label_model.h"
#include "spanlab/project.h"
#include "support/fixtures.h"

namespace spanlab {
namespace {

void BM_TagSpans(benchmark::State& state) {
  const Project p = testing::ScaleProject(static_cast<std::size_t>(state.range(0)), 20, 7);
  const SpanTagger tagger(p.span_sets);
  for (auto _ : state) {
    std::size_t tags = 0;
    for (const Document& doc : p.corpus->documents()) tags += tagger.Tag(doc).size();
    benchmark::DoNotOptimize(tags);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TagSpans)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_BuildLabelMatrix(benchmark::State& state) {
  const Project p = testing::ScaleProject(static_cast<std::size_t>(state.range(0)), 20, 7);
  for (auto _ : state) {
    LabelMatrix m = BuildLabelMatrix(*p.corpus, p.task, p.lfs, p.span_sets, p.config.engine);
    benchmark::DoNotOptimize(m.cells.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildLabelMatrix)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_FitLabelModel(benchmark::State& state) {
  const Project p = testing::ScaleProject(static_cast<std::size_t>(state.range(0)), 20, 7);
  const LabelMatrix m = BuildLabelMatrix(*p.corpus, p.task, p.lfs, p.span_sets);
  for (auto _ : state) {
    LabelModelParams params = FitLabelModel(m);
    benchmark::DoNotOptimize(params.priors.data());
  }
}
BENCHMARK(BM_FitLabelModel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_AssignLabels(benchmark::State& state) {
  const Project base = testing::ScaleProject(static_cast<std::size_t>(state.range(0)), 20, 7);
  for (auto _ : state) {
    Project p = base;
    AssignLabels(p);
    benchmark::DoNotOptimize(p.consensus->hard.data());
  }
}
BENCHMARK(BM_AssignLabels)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace spanlab

BENCHMARK_MAIN();
