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

// Active-learning strategies that pick instances for human review.

#ifndef SPANLAB_SAMPLER_H_
#define SPANLAB_SAMPLER_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spanlab/corpus.h"
#include "spanlab/engine.h"

namespace spanlab {

enum class SamplerStrategy { kMargin, kVoteEntropy, kAbstain };
std::string_view ToString(SamplerStrategy strategy);
// Throws Error("UnknownStrategy").
SamplerStrategy SamplerStrategyFromString(std::string_view s);

// Denominator of the vote-entropy shares. kVotingMembers divides by the
// number of non-abstaining LFs on the row; kCommitteeSize divides by the
// total number of LFs, so abstains shrink the summed mass.
enum class VoteEntropyMode { kVotingMembers, kCommitteeSize };

inline constexpr double kDefaultSampleFraction = 0.10;

struct SamplerReport {
  SamplerStrategy strategy = SamplerStrategy::kAbstain;
  std::vector<std::string> selected;  // instance keys, review order
  std::map<std::string, double> scores;
  double fraction = kDefaultSampleFraction;

  bool operator==(const SamplerReport&) const = default;
};

// Top-1 minus top-2 probability.
double Margin(const std::vector<double>& probs);

// Natural-log entropy of the vote shares of one matrix row.
double VoteEntropy(const int* row, std::size_t n_lfs, std::size_t n_categories,
                   VoteEntropyMode mode = VoteEntropyMode::kVotingMembers);

// ceil(fraction * n), clamped to [0, n]. Throws Error("InvalidArgument") for
// a fraction outside [0, 1].
std::size_t SelectionSize(double fraction, std::size_t n);

// Smallest margins first; ties by instance key.
SamplerReport MarginSampling(const std::vector<InstanceKey>& keys,
                             const std::vector<std::vector<double>>& probs,
                             double fraction = kDefaultSampleFraction);

// Highest entropies first; ties by instance key.
SamplerReport VoteEntropySampling(
    const LabelMatrix& matrix, double fraction = kDefaultSampleFraction,
    VoteEntropyMode mode = VoteEntropyMode::kVotingMembers);

// Every all-abstain row in matrix order. With zero LFs every row qualifies.
SamplerReport AbstainSampling(const LabelMatrix& matrix);

nlohmann::json SamplerReportToJson(const SamplerReport& report);
SamplerReport SamplerReportFromJson(const nlohmann::json& j);

}  // namespace spanlab

#endif  // SPANLAB_SAMPLER_H_
