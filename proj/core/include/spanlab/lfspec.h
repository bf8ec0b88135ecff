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

// Labeling-function specification: task definition, span sets, rules and
// aggregation methods, with validation and a canonical strict JSON form.

#ifndef SPANLAB_LFSPEC_H_
#define SPANLAB_LFSPEC_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace spanlab {

// Out-of-band label: the labeling function (or consensus) assigns nothing.
inline constexpr std::string_view kAbstain = "ABSTAIN";

inline constexpr int kSchemaVersion = 1;

enum class TaskType { kTextClassification, kTargetSpecific };

struct TargetSpec {
  std::string name;
  std::vector<std::string> aliases;  // always contains `name`

  bool operator==(const TargetSpec&) const = default;
};

struct TaskDefinition {
  TaskType type = TaskType::kTextClassification;
  std::vector<TargetSpec> targets;
  std::vector<std::string> label_categories;

  bool is_target_specific() const {
    return type == TaskType::kTargetSpecific;
  }
  // Index of `label` in label_categories, or -1.
  int CategoryIndex(std::string_view label) const;
  const TargetSpec* FindTarget(std::string_view name) const;

  bool operator==(const TaskDefinition&) const = default;
};

enum class SpanProvenance { kUser, kLlmSuggested, kLlmAccepted };

struct Span {
  std::string phrase;
  SpanProvenance provenance = SpanProvenance::kUser;

  bool operator==(const Span&) const = default;
};

struct SpanSet {
  std::string name;
  std::vector<Span> spans;

  bool Contains(std::string_view phrase) const;
  bool operator==(const SpanSet&) const = default;
};

struct Rule {
  std::vector<std::string> sequence;  // span-set names, length >= 1
  std::string label;
  std::int64_t creation_index = 0;

  bool operator==(const Rule&) const = default;
};

enum class AggregationKind { kMajorityVoting, kNearestNeighbor, kWindowAnalysis };
enum class SearchDirection { kPreceding, kFollowing, kEither };

struct AggregationMethod {
  AggregationKind kind = AggregationKind::kMajorityVoting;
  SearchDirection direction = SearchDirection::kPreceding;  // NearestNeighbor
  int window_size = 1;                                       // WindowAnalysis

  bool operator==(const AggregationMethod&) const = default;
};

struct LabelingFunction {
  std::string id;
  std::string name;
  std::vector<std::string> span_set_names;
  std::vector<Rule> rules;
  AggregationMethod aggregation;

  bool operator==(const LabelingFunction&) const = default;
};

struct Violation {
  std::string code;  // e.g. "UnknownCategory", "IncompatibleAggregation"
  std::string path;  // JSON pointer into the serialized LF
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool Has(std::string_view code) const;
};

// Pure and total; every problem becomes a report entry.
ValidationReport ValidateTask(const TaskDefinition& task);
ValidationReport ValidateSpanSet(const SpanSet& span_set);
ValidationReport ValidateLf(const LabelingFunction& lf,
                            const std::vector<SpanSet>& project_span_sets,
                            const TaskDefinition& task);

// Rule priority: longer sequences first, then later creation first.
bool HigherPriority(const Rule& a, const Rule& b);
std::vector<Rule> RulesByPriority(std::vector<Rule> rules);

std::int64_t NextCreationIndex(const LabelingFunction& lf);

// Adds `name` to the aliases if missing and drops case-folded duplicates.
TargetSpec MakeTargetSpec(std::string name, std::vector<std::string> aliases);

std::string_view ToString(TaskType type);
std::string_view ToString(AggregationKind kind);
std::string_view ToString(SearchDirection direction);
std::string_view ToString(SpanProvenance provenance);

// Canonical JSON (sorted keys, no whitespace). Parsing is strict: unknown
// fields, wrong types and violated cardinalities raise SchemaError with a
// JSON-pointer path.
nlohmann::json TaskToJson(const TaskDefinition& task);
TaskDefinition TaskFromJson(const nlohmann::json& j,
                            const std::string& path = "");

nlohmann::json SpanSetToJson(const SpanSet& span_set);
SpanSet SpanSetFromJson(const nlohmann::json& j, const std::string& path = "");

nlohmann::json LfToJson(const LabelingFunction& lf);
LabelingFunction LfFromJson(const nlohmann::json& j,
                            const std::string& path = "");

std::string SerializeLf(const LabelingFunction& lf);
// Throws SchemaError, including for malformed JSON text (path "").
LabelingFunction ParseLf(std::string_view json_text);

// Reusable bundle of span sets and LFs, optionally with the task.
struct LfBundle {
  std::optional<TaskDefinition> task;
  std::vector<SpanSet> span_sets;
  std::vector<LabelingFunction> lfs;
};
nlohmann::json BundleToJson(const LfBundle& bundle);
LfBundle BundleFromJson(const nlohmann::json& j);

// JSON Schema (draft 2020-12) describing LfToJson output; embedded in LLM
// prompts and published under docs/.
const nlohmann::json& LfJsonSchema();

}  // namespace spanlab

#endif  // SPANLAB_LFSPEC_H_
