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

// Consensus labels from a label matrix: majority vote, and an EM-fitted
// generative model with one confusion matrix per labeling function.

#ifndef SPANLAB_LABEL_MODEL_H_
#define SPANLAB_LABEL_MODEL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spanlab/engine.h"
#include "spanlab/error.h"

namespace spanlab {

// Plurality over non-abstain votes; ties and all-abstain rows abstain.
std::string MajorityVote(const std::vector<std::string>& row);
// Matrix-cell form; returns a category index or kAbstainCell.
int MajorityVoteCells(const int* row, std::size_t n, std::size_t n_categories);

// How an LF's ABSTAIN enters the likelihood.
//   kMissingAtRandom: abstains are dropped; rows have K entries. A column
//     that only ever holds one label carries no evidence, see
//     PredictConsensus.
//   kClassConditional: abstain is one more observed outcome, so each confusion
//     row has K+1 entries (the last is P(abstain | true class)). Single-label
//     LFs become informative through when they stay silent, but LFs that
//     share evidence are double counted.
enum class AbstainModel { kClassConditional, kMissingAtRandom };
std::string_view ToString(AbstainModel model);
AbstainModel AbstainModelFromString(std::string_view s);

struct LabelModelConfig {
  int max_iters = 200;
  double tol = 1e-6;
  // The fit is deterministic; the seed is recorded with the parameters.
  std::uint64_t seed = 0;
  // Additive pseudo-count in every M-step row.
  double smoothing = 1.0;
  AbstainModel abstain_model = AbstainModel::kMissingAtRandom;
};

struct LabelModelParams {
  std::vector<std::string> lf_ids;
  std::vector<std::string> categories;
  std::vector<double> priors;
  // confusion[lf][true_class][outcome]: outcome < K is a voted category;
  // outcome K (class-conditional model only) is abstain.
  std::vector<std::vector<std::vector<double>>> confusion;
  // EM objective after each iteration: marginal log-likelihood of the
  // observed votes plus the log density of the Dirichlet prior implied by the
  // smoothing pseudo-counts. Non-decreasing.
  std::vector<double> objective_history;
  int iterations = 0;
  bool converged = false;
  LabelModelConfig config;
};

class DegenerateMatrixError : public Error {
 public:
  DegenerateMatrixError()
      : Error("DegenerateMatrix", "label matrix contains no votes") {}
};

LabelModelParams FitLabelModel(const LabelMatrix& matrix,
                               const LabelModelConfig& config = {});

// Objective tracked by FitLabelModel, for an arbitrary parameter set.
double LabelModelObjective(const LabelModelParams& params,
                           const LabelMatrix& matrix,
                           const LabelModelConfig& config);
// Marginal log-likelihood only (no prior term).
double LabelModelLogLikelihood(const LabelModelParams& params,
                               const LabelMatrix& matrix);

// Posterior over categories for one row of cells.
std::vector<double> Posterior(const LabelModelParams& params, const int* row);

enum class OverrideSource { kHuman, kLlmApproved };
std::string_view ToString(OverrideSource source);
OverrideSource OverrideSourceFromString(std::string_view s);

struct Override {
  std::string label;
  OverrideSource source = OverrideSource::kHuman;
  std::string timestamp;  // ISO-8601 UTC

  bool operator==(const Override&) const = default;
};

// Keyed by InstanceKey::ToString().
using OverrideMap = std::map<std::string, Override>;

struct ConsensusState {
  std::vector<InstanceKey> instance_keys;
  std::vector<std::string> categories;
  std::vector<std::vector<double>> probs;
  // Model label per instance: argmax of probs, kAbstain when no LF voted, or
  // the majority vote on missing-at-random fallback rows.
  std::vector<std::string> model_hard;
  // Final label per instance: the override when present, else model_hard.
  std::vector<std::string> hard;
  OverrideMap overrides;
  LabelModelParams model_params;

  std::optional<std::size_t> IndexOf(const std::string& key) const;
  bool operator==(const ConsensusState& o) const;
};

// Rows without any vote receive the prior as probs and a kAbstain hard label.
// Under the missing-at-random model, rows whose votes all come from columns
// with a single distinct label get smoothed vote shares as probs and the
// majority vote as hard label. With fewer than three multi-label columns this
// applies to every voted row.
ConsensusState PredictConsensus(const LabelModelParams& params,
                                const LabelMatrix& matrix,
                                const OverrideMap& overrides = {});

class UnknownInstanceError : public Error {
 public:
  explicit UnknownInstanceError(const std::string& key)
      : Error("UnknownInstance", "unknown instance '" + key + "'") {}
};

class UnknownCategoryError : public Error {
 public:
  explicit UnknownCategoryError(const std::string& label)
      : Error("UnknownCategory", "unknown category '" + label + "'") {}
};

// Sets (label present) or clears (nullopt) an override and returns the
// updated state.
ConsensusState SetOverride(ConsensusState state, const std::string& key,
                           const std::optional<std::string>& label,
                           OverrideSource source = OverrideSource::kHuman,
                           std::string timestamp = "");

// One JSON object per line:
// {"instance", "label", "probs": {category: p}, "source": "model"|"override"}
std::string ExportConsensusJsonl(const ConsensusState& state);

}  // namespace spanlab

#endif  // SPANLAB_LABEL_MODEL_H_
