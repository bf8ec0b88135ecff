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

#include "spanlab/label_model.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace spanlab {
namespace {

using Confusion = std::vector<std::vector<std::vector<double>>>;

std::size_t ArgmaxFirst(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

// Normalizes log-weights in place into probabilities; returns log-sum-exp.
double NormalizeLog(std::vector<double>& logw) {
  const double mx = *std::max_element(logw.begin(), logw.end());
  double sum = 0.0;
  for (double& w : logw) {
    w = std::exp(w - mx);
    sum += w;
  }
  for (double& w : logw) w /= sum;
  return mx + std::log(sum);
}

bool RowHasVote(const int* row, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) {
    if (row[j] != kAbstainCell) return true;
  }
  return false;
}

// Column of `cell` in a confusion row, or -1 when the cell is ignored.
int OutcomeColumn(int cell, std::size_t k_count, std::size_t width) {
  if (cell != kAbstainCell) return cell;
  return width > k_count ? static_cast<int>(k_count) : -1;
}

double RowLogWeight(const LabelModelParams& params, const int* row,
                    std::size_t k) {
  const std::size_t k_count = params.categories.size();
  double lw = std::log(params.priors[k]);
  for (std::size_t j = 0; j < params.confusion.size(); ++j) {
    const auto& c = params.confusion[j][k];
    const int col = OutcomeColumn(row[j], k_count, c.size());
    if (col >= 0) lw += std::log(c[static_cast<std::size_t>(col)]);
  }
  return lw;
}

// M-step with additive smoothing.
// `posteriors` has one row per voted instance (indexed parallel to `rows`).
void MStep(const LabelMatrix& matrix, const std::vector<std::size_t>& rows,
           const std::vector<std::vector<double>>& posteriors,
           const LabelModelConfig& config, std::vector<double>& priors,
           Confusion& confusion) {
  const double smoothing = config.smoothing;
  const std::size_t k_count = matrix.categories.size();
  const std::size_t width =
      k_count + (config.abstain_model == AbstainModel::kClassConditional);
  const std::size_t m = matrix.cols();
  std::vector<double> class_mass(k_count, smoothing);
  Confusion counts(m, std::vector<std::vector<double>>(
                          k_count, std::vector<double>(width, smoothing)));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int* row = &matrix.cells[rows[r] * m];
    const auto& t = posteriors[r];
    for (std::size_t k = 0; k < k_count; ++k) class_mass[k] += t[k];
    for (std::size_t j = 0; j < m; ++j) {
      const int col = OutcomeColumn(row[j], k_count, width);
      if (col < 0) continue;
      for (std::size_t k = 0; k < k_count; ++k) {
        counts[j][k][static_cast<std::size_t>(col)] += t[k];
      }
    }
  }
  double total = 0.0;
  for (double c : class_mass) total += c;
  priors.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) priors[k] = class_mass[k] / total;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < k_count; ++k) {
      double row_total = 0.0;
      for (double c : counts[j][k]) row_total += c;
      for (double& c : counts[j][k]) c /= row_total;
    }
  }
  confusion = std::move(counts);
}

double MaxDelta(const std::vector<double>& a, const std::vector<double>& b,
                const Confusion& ca, const Confusion& cb) {
  double delta = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    delta = std::max(delta, std::abs(a[k] - b[k]));
  }
  for (std::size_t j = 0; j < ca.size(); ++j) {
    for (std::size_t k = 0; k < ca[j].size(); ++k) {
      for (std::size_t l = 0; l < ca[j][k].size(); ++l) {
        delta = std::max(delta, std::abs(ca[j][k][l] - cb[j][k][l]));
      }
    }
  }
  return delta;
}

}  // namespace

int MajorityVoteCells(const int* row, std::size_t n,
                      std::size_t n_categories) {
  std::vector<int> counts(n_categories, 0);
  for (std::size_t j = 0; j < n; ++j) {
    if (row[j] != kAbstainCell) ++counts[static_cast<std::size_t>(row[j])];
  }
  int best = 0;
  int winner = kAbstainCell;
  bool tie = false;
  for (std::size_t k = 0; k < n_categories; ++k) {
    if (counts[k] > best) {
      best = counts[k];
      winner = static_cast<int>(k);
      tie = false;
    } else if (counts[k] == best && best > 0) {
      tie = true;
    }
  }
  return tie ? kAbstainCell : winner;
}

std::string MajorityVote(const std::vector<std::string>& row) {
  std::map<std::string, int> counts;
  for (const std::string& v : row) {
    if (v != kAbstain) ++counts[v];
  }
  int best = 0;
  std::string winner(kAbstain);
  bool tie = false;
  for (const auto& [label, count] : counts) {
    if (count > best) {
      best = count;
      winner = label;
      tie = false;
    } else if (count == best) {
      tie = true;
    }
  }
  return tie ? std::string(kAbstain) : winner;
}

std::vector<double> Posterior(const LabelModelParams& params, const int* row) {
  const std::size_t k_count = params.categories.size();
  std::vector<double> logw(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    logw[k] = RowLogWeight(params, row, k);
  }
  NormalizeLog(logw);
  return logw;
}

double LabelModelLogLikelihood(const LabelModelParams& params,
                               const LabelMatrix& matrix) {
  const std::size_t k_count = matrix.categories.size();
  const std::size_t m = matrix.cols();
  double ll = 0.0;
  std::vector<double> logw(k_count);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const int* row = &matrix.cells[i * m];
    if (!RowHasVote(row, m)) continue;
    for (std::size_t k = 0; k < k_count; ++k) {
      logw[k] = RowLogWeight(params, row, k);
    }
    ll += NormalizeLog(logw);
  }
  return ll;
}

double LabelModelObjective(const LabelModelParams& params,
                           const LabelMatrix& matrix,
                           const LabelModelConfig& config) {
  double prior_term = 0.0;
  for (double p : params.priors) prior_term += config.smoothing * std::log(p);
  for (const auto& lf : params.confusion) {
    for (const auto& c : lf) {
      for (double p : c) prior_term += config.smoothing * std::log(p);
    }
  }
  return LabelModelLogLikelihood(params, matrix) + prior_term;
}

LabelModelParams FitLabelModel(const LabelMatrix& matrix,
                               const LabelModelConfig& config) {
  const std::size_t k_count = matrix.categories.size();
  const std::size_t m = matrix.cols();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    if (RowHasVote(&matrix.cells[i * m], m)) rows.push_back(i);
  }
  if (rows.empty() || k_count == 0) throw DegenerateMatrixError();

  LabelModelParams params;
  params.lf_ids = matrix.lf_ids;
  params.categories = matrix.categories;
  params.config = config;

  // Initial responsibilities: Laplace-smoothed vote shares.
  std::vector<std::vector<double>> t(rows.size(), std::vector<double>(k_count));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int* row = &matrix.cells[rows[r] * m];
    double total = static_cast<double>(k_count);
    for (std::size_t k = 0; k < k_count; ++k) t[r][k] = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (row[j] == kAbstainCell) continue;
      t[r][static_cast<std::size_t>(row[j])] += 1.0;
      total += 1.0;
    }
    for (double& v : t[r]) v /= total;
  }
  MStep(matrix, rows, t, config, params.priors, params.confusion);
  params.objective_history.push_back(
      LabelModelObjective(params, matrix, config));

  for (int iter = 0; iter < config.max_iters; ++iter) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      t[r] = Posterior(params, &matrix.cells[rows[r] * m]);
    }
    std::vector<double> priors;
    Confusion confusion;
    MStep(matrix, rows, t, config, priors, confusion);
    const double delta =
        MaxDelta(priors, params.priors, confusion, params.confusion);
    params.priors = std::move(priors);
    params.confusion = std::move(confusion);
    params.iterations = iter + 1;
    params.objective_history.push_back(
        LabelModelObjective(params, matrix, config));
    if (delta < config.tol) {
      params.converged = true;
      break;
    }
  }
  return params;
}

std::string_view ToString(AbstainModel model) {
  return model == AbstainModel::kMissingAtRandom ? "missing_at_random"
                                                 : "class_conditional";
}

AbstainModel AbstainModelFromString(std::string_view s) {
  if (s == "class_conditional") return AbstainModel::kClassConditional;
  if (s == "missing_at_random") return AbstainModel::kMissingAtRandom;
  throw Error("SchemaError", "unknown abstain model '" + std::string(s) + "'");
}

std::string_view ToString(OverrideSource source) {
  return source == OverrideSource::kLlmApproved ? "llm-approved" : "human";
}

OverrideSource OverrideSourceFromString(std::string_view s) {
  if (s == "llm-approved") return OverrideSource::kLlmApproved;
  if (s == "human") return OverrideSource::kHuman;
  throw Error("SchemaError", "unknown override source '" + std::string(s) + "'");
}

std::optional<std::size_t> ConsensusState::IndexOf(
    const std::string& key) const {
  for (std::size_t i = 0; i < instance_keys.size(); ++i) {
    if (instance_keys[i].ToString() == key) return i;
  }
  return std::nullopt;
}

bool ConsensusState::operator==(const ConsensusState& o) const {
  return instance_keys == o.instance_keys && categories == o.categories &&
         probs == o.probs && model_hard == o.model_hard && hard == o.hard &&
         overrides == o.overrides &&
         model_params.priors == o.model_params.priors &&
         model_params.confusion == o.model_params.confusion;
}

ConsensusState PredictConsensus(const LabelModelParams& params,
                                const LabelMatrix& matrix,
                                const OverrideMap& overrides) {
  ConsensusState state;
  state.instance_keys = matrix.instance_keys;
  state.categories = matrix.categories;
  state.model_params = params;
  const std::size_t m = matrix.cols();
  const std::size_t k_count = params.categories.size();
  // Missing-at-random only: a column with fewer than two distinct votes has
  // the same confusion row for every class up to smoothing, so its votes
  // carry no evidence. Rows voted on only by such columns fall back to
  // majority vote, as does every row when too few columns are informative.
  std::vector<bool> informative(m, true);
  const bool mar = !params.confusion.empty() && !params.confusion[0].empty() &&
                   params.confusion[0][0].size() == k_count;
  if (mar) {
    for (std::size_t j = 0; j < m; ++j) {
      int seen = kAbstainCell;
      bool distinct = false;
      for (std::size_t i = 0; i < matrix.rows() && !distinct; ++i) {
        const int cell = matrix.cells[i * m + j];
        if (cell == kAbstainCell) continue;
        if (seen == kAbstainCell) seen = cell;
        distinct = cell != seen;
      }
      informative[j] = distinct;
    }
    // Fewer than three informative columns do not identify the confusion
    // matrices; EM then drifts to rows the smoothing prior prefers.
    if (std::count(informative.begin(), informative.end(), true) < 3) {
      informative.assign(m, false);
    }
  }
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const int* row = &matrix.cells[i * m];
    bool fallback = mar;
    for (std::size_t j = 0; j < m && fallback; ++j) {
      fallback = row[j] == kAbstainCell || !informative[j];
    }
    if (fallback && RowHasVote(row, m)) {
      // Laplace-smoothed vote shares, as in the EM initialization.
      std::vector<double> p(k_count, 1.0);
      double total = static_cast<double>(k_count);
      for (std::size_t j = 0; j < m; ++j) {
        if (row[j] == kAbstainCell) continue;
        p[static_cast<std::size_t>(row[j])] += 1.0;
        total += 1.0;
      }
      for (double& v : p) v /= total;
      const int mv = MajorityVoteCells(row, m, k_count);
      state.model_hard.push_back(mv == kAbstainCell
                                     ? std::string(kAbstain)
                                     : state.categories[static_cast<std::size_t>(mv)]);
      state.probs.push_back(std::move(p));
    } else if (RowHasVote(row, m)) {
      auto p = Posterior(params, row);
      state.model_hard.push_back(state.categories[ArgmaxFirst(p)]);
      state.probs.push_back(std::move(p));
    } else {
      state.probs.push_back(params.priors);
      state.model_hard.emplace_back(kAbstain);
    }
  }
  state.hard = state.model_hard;
  if (overrides.empty()) return state;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < state.instance_keys.size(); ++i) {
    index.emplace(state.instance_keys[i].ToString(), i);
  }
  for (const auto& [key, ov] : overrides) {
    if (auto it = index.find(key); it != index.end()) {
      state.hard[it->second] = ov.label;
      state.overrides[key] = ov;
    }
  }
  return state;
}

ConsensusState SetOverride(ConsensusState state, const std::string& key,
                           const std::optional<std::string>& label,
                           OverrideSource source, std::string timestamp) {
  const auto idx = state.IndexOf(key);
  if (!idx) throw UnknownInstanceError(key);
  if (!label) {
    state.overrides.erase(key);
    state.hard[*idx] = state.model_hard[*idx];
    return state;
  }
  if (std::find(state.categories.begin(), state.categories.end(), *label) ==
      state.categories.end()) {
    throw UnknownCategoryError(*label);
  }
  state.overrides[key] = Override{*label, source, std::move(timestamp)};
  state.hard[*idx] = *label;
  return state;
}

std::string ExportConsensusJsonl(const ConsensusState& state) {
  std::string out;
  for (std::size_t i = 0; i < state.instance_keys.size(); ++i) {
    const std::string key = state.instance_keys[i].ToString();
    nlohmann::json probs = nlohmann::json::object();
    for (std::size_t k = 0; k < state.categories.size(); ++k) {
      probs[state.categories[k]] = state.probs[i][k];
    }
    nlohmann::json line = {
        {"instance", key},
        {"label", state.hard[i]},
        {"probs", std::move(probs)},
        {"source", state.overrides.count(key) ? "override" : "model"}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace spanlab
