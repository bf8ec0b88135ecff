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

#include "spanlab/sampler.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spanlab/error.h"

namespace spanlab {
namespace {

// Orders indices by score (ascending or descending) then key.
std::vector<std::size_t> RankBy(const std::vector<InstanceKey>& keys,
                                const std::vector<double>& scores,
                                bool descending) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) {
      return descending ? scores[a] > scores[b] : scores[a] < scores[b];
    }
    return keys[a] < keys[b];
  });
  return order;
}

SamplerReport Select(SamplerStrategy strategy,
                     const std::vector<InstanceKey>& keys,
                     const std::vector<double>& scores, double fraction,
                     bool descending) {
  SamplerReport report;
  report.strategy = strategy;
  report.fraction = fraction;
  const std::size_t take = SelectionSize(fraction, keys.size());
  const std::vector<std::size_t> order = RankBy(keys, scores, descending);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    report.scores[keys[i].ToString()] = scores[i];
  }
  for (std::size_t i = 0; i < take; ++i) {
    report.selected.push_back(keys[order[i]].ToString());
  }
  return report;
}

}  // namespace

std::string_view ToString(SamplerStrategy strategy) {
  switch (strategy) {
    case SamplerStrategy::kMargin:
      return "margin";
    case SamplerStrategy::kVoteEntropy:
      return "vote_entropy";
    case SamplerStrategy::kAbstain:
      return "abstain";
  }
  return "abstain";
}

SamplerStrategy SamplerStrategyFromString(std::string_view s) {
  if (s == "margin") return SamplerStrategy::kMargin;
  if (s == "vote_entropy") return SamplerStrategy::kVoteEntropy;
  if (s == "abstain") return SamplerStrategy::kAbstain;
  throw Error("UnknownStrategy", "unknown sampling strategy '" +
                                     std::string(s) + "'");
}

double Margin(const std::vector<double>& probs) {
  double top1 = 0.0;
  double top2 = 0.0;
  for (double p : probs) {
    if (p > top1) {
      top2 = top1;
      top1 = p;
    } else if (p > top2) {
      top2 = p;
    }
  }
  return top1 - top2;
}

double VoteEntropy(const int* row, std::size_t n_lfs, std::size_t n_categories,
                   VoteEntropyMode mode) {
  std::vector<std::size_t> counts(n_categories, 0);
  std::size_t voters = 0;
  for (std::size_t j = 0; j < n_lfs; ++j) {
    if (row[j] == kAbstainCell) continue;
    ++counts[static_cast<std::size_t>(row[j])];
    ++voters;
  }
  const std::size_t denom =
      mode == VoteEntropyMode::kVotingMembers ? voters : n_lfs;
  if (denom == 0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double share = static_cast<double>(c) / static_cast<double>(denom);
    h -= share * std::log(share);
  }
  return h;
}

std::size_t SelectionSize(double fraction, std::size_t n) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error("InvalidArgument", "fraction must lie in [0, 1]");
  }
  // The epsilon absorbs representation error such as 0.1 * 30 > 3.
  const double raw = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, raw)));
}

SamplerReport MarginSampling(const std::vector<InstanceKey>& keys,
                             const std::vector<std::vector<double>>& probs,
                             double fraction) {
  if (keys.size() != probs.size()) {
    throw Error("InvalidArgument", "keys and probs differ in length");
  }
  std::vector<double> scores;
  scores.reserve(probs.size());
  for (const auto& p : probs) scores.push_back(Margin(p));
  return Select(SamplerStrategy::kMargin, keys, scores, fraction, false);
}

SamplerReport VoteEntropySampling(const LabelMatrix& matrix, double fraction,
                                  VoteEntropyMode mode) {
  std::vector<double> scores(matrix.rows(), 0.0);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    if (matrix.cols() == 0) continue;
    scores[i] = VoteEntropy(&matrix.cells[i * matrix.cols()], matrix.cols(),
                            matrix.categories.size(), mode);
  }
  return Select(SamplerStrategy::kVoteEntropy, matrix.instance_keys, scores,
                fraction, true);
}

SamplerReport AbstainSampling(const LabelMatrix& matrix) {
  SamplerReport report;
  report.strategy = SamplerStrategy::kAbstain;
  report.fraction = 1.0;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    bool all_abstain = true;
    for (std::size_t j = 0; j < matrix.cols() && all_abstain; ++j) {
      all_abstain = matrix.at(i, j) == kAbstainCell;
    }
    if (!all_abstain) continue;
    const std::string key = matrix.instance_keys[i].ToString();
    report.selected.push_back(key);
    report.scores[key] = 0.0;
  }
  return report;
}

nlohmann::json SamplerReportToJson(const SamplerReport& report) {
  return {{"strategy", ToString(report.strategy)},
          {"selected", report.selected},
          {"scores", report.scores},
          {"fraction", report.fraction}};
}

SamplerReport SamplerReportFromJson(const nlohmann::json& j) {
  try {
    SamplerReport report;
    report.strategy =
        SamplerStrategyFromString(j.at("strategy").get<std::string>());
    report.selected = j.at("selected").get<std::vector<std::string>>();
    report.scores = j.at("scores").get<std::map<std::string, double>>();
    report.fraction = j.at("fraction").get<double>();
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("", std::string("sampler report: ") + e.what());
  }
}

}  // namespace spanlab
