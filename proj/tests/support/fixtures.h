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

// Shared fixtures for tests, the acceptance binary and benchmarks.

#ifndef SPANLAB_TESTS_SUPPORT_FIXTURES_H_
#define SPANLAB_TESTS_SUPPORT_FIXTURES_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spanlab/project.h"
#include "spanlab/simulation.h"

namespace spanlab::testing {

inline constexpr char kStanceSentence[] =
    "I do not agree with Smith being president.";

// Target-specific stance task: target Smith, categories Favor and Against.
TaskDefinition StanceTask();
// negation = {"not"}, support = {"agree with", "trust", "believe", "back up"}.
std::vector<SpanSet> StanceSpanSets();
// Rules {Favor: support} and {Against: (negation, support)}, NearestNeighbor
// preceding.
LabelingFunction StanceLf();

// The worked stance example as a one-document project.
Project StanceProject();

// Synthetic corpus with one span set per cue and `n_lfs` single-cue LFs
// (each also flips on a preceding negation).
Project ScaleProject(std::size_t n_docs, std::size_t n_lfs, std::uint64_t seed);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string ReadFileOrDie(const std::filesystem::path& path);
void WriteFileOrDie(const std::filesystem::path& path, const std::string& text);

}  // namespace spanlab::testing

#endif  // SPANLAB_TESTS_SUPPORT_FIXTURES_H_
