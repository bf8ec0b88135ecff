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

// Scripted-annotator loop and a seeded synthetic corpus for offline
// ablations of the labeling workflow.

#ifndef SPANLAB_SIMULATION_H_
#define SPANLAB_SIMULATION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spanlab/llm.h"
#include "spanlab/project.h"
#include "spanlab/sampler.h"

namespace spanlab {

// Span sets (merged phrase-wise into existing sets of the same name) and LFs
// added before the assign-labels run of one iteration.
struct LfGrowthStep {
  int iteration = 1;
  std::vector<SpanSet> span_sets;
  std::vector<LabelingFunction> lfs;
};

enum class SimulatedLlm { kOff, kMock };

struct SimulationPolicy {
  int iterations = 5;
  std::size_t n_reviews = 20;
  // Tried in order until the review budget is filled. Empty means
  // sequential review in corpus order.
  std::vector<SamplerStrategy> strategies;
  SimulatedLlm llm = SimulatedLlm::kOff;
  std::vector<LfGrowthStep> lf_growth;
  // Canned responses by prompt kind for the mock LLM when no responder is
  // supplied to RunSimulation.
  std::map<PromptKind, std::string> mock_fixtures;
};

// Throws SchemaError on malformed input.
SimulationPolicy SimulationPolicyFromJson(const nlohmann::json& j);

struct SimulationRow {
  int iteration = 0;
  double accuracy = 0.0;
  double coverage = 0.0;
  double conflict_rate = 0.0;
  std::size_t overrides = 0;
  std::size_t lf_count = 0;

  bool operator==(const SimulationRow&) const = default;
};

class MissingGoldError : public Error {
 public:
  MissingGoldError()
      : Error("MissingGold", "simulation needs gold labels for every instance") {}
};

struct SimulationResult {
  std::vector<SimulationRow> rows;
  Project project;
};

// Assign labels, then per iteration: sample, correct reviewed instances to
// gold, optionally run mock-LLM span expansion on them and accept every
// suggestion, apply LF growth, assign labels, evaluate. `llm` overrides the
// policy fixtures when non-null.
SimulationResult RunSimulation(Project project, const SimulationPolicy& policy,
                               ChatClient* llm = nullptr);

std::string SimulationCsv(const std::vector<SimulationRow>& rows,
                          const std::string& label = "");

struct SyntheticScenario {
  TaskDefinition task;
  Corpus corpus;
  std::vector<SpanSet> seed_span_sets;
  std::vector<LabelingFunction> seed_lfs;
  std::vector<LfGrowthStep> growth;
  // Every cue phrase per span set, including ones the annotator has not
  // found yet.
  std::map<std::string, std::vector<std::string>> lexicon;
};

// Binary sentiment corpus built from cue lexicons, negations and filler
// words. Only a few cues per class are seeded; growth reveals one more per
// class each iteration.
SyntheticScenario MakeSyntheticScenario(std::size_t n_docs, std::uint64_t seed,
                                        int growth_iterations = 5);

// Project holding the scenario corpus with the seed span sets and LFs applied.
Project ScenarioProject(const SyntheticScenario& scenario,
                        ProjectConfig config = {});

// Mock-LLM responder that reads the samples out of a rendered prompt and, for
// span expansion, proposes every lexicon phrase found in them.
MockChatClient::Responder LexiconResponder(
    std::map<std::string, std::vector<std::string>> lexicon);

enum class AblationArm { kDp, kDpAl, kDpAlLlm };
std::string_view ToString(AblationArm arm);
SimulationPolicy AblationPolicy(const SyntheticScenario& scenario,
                                AblationArm arm, int iterations = 5,
                                std::size_t n_reviews = 20);

}  // namespace spanlab

#endif  // SPANLAB_SIMULATION_H_
