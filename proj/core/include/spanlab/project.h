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

// Project state, the mutation event log, the assign-labels pipeline,
// evaluation, suggestion review and on-disk persistence.

#ifndef SPANLAB_PROJECT_H_
#define SPANLAB_PROJECT_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spanlab/corpus.h"
#include "spanlab/engine.h"
#include "spanlab/error.h"
#include "spanlab/label_model.h"
#include "spanlab/lfspec.h"
#include "spanlab/llm.h"
#include "spanlab/model.h"
#include "spanlab/sampler.h"

namespace spanlab {

inline constexpr int kProjectSchemaVersion = 1;

struct ProjectConfig {
  std::string id = "project";
  std::uint64_t seed = 0;
  EngineOptions engine;
  LabelModelConfig label_model;
  ClassifierConfig classifier;
  std::size_t feature_dim = HashedNgramFeaturizer::kDefaultDimension;
  std::size_t target_window = HashedNgramFeaturizer::kDefaultTargetWindow;
  VoteEntropyMode vote_entropy_mode = VoteEntropyMode::kVotingMembers;
  // Endpoint settings only; the credential itself lives in the environment.
  LlmClientConfig llm;
};

nlohmann::json ProjectConfigToJson(const ProjectConfig& config);
ProjectConfig ProjectConfigFromJson(const nlohmann::json& j);

struct MetricsSnapshot {
  std::string timestamp;
  std::int64_t revision = 0;
  std::optional<double> accuracy;  // ABSTAIN counts as wrong
  double coverage = 0.0;
  double conflict_rate = 0.0;
  std::size_t lf_count = 0;
  std::size_t override_count = 0;
  std::size_t instance_count = 0;

  bool operator==(const MetricsSnapshot&) const = default;
};

nlohmann::json MetricsToJson(const MetricsSnapshot& m);
MetricsSnapshot MetricsFromJson(const nlohmann::json& j);

// A manually tagged span, snapped outward to token boundaries.
struct ManualSpan {
  TokenRange token_range;
  std::string text;
  std::optional<std::string> span_set;

  bool operator==(const ManualSpan&) const = default;
};

// Instances enumerated once per corpus and task; shared between snapshots.
struct InstanceIndex {
  std::vector<Instance> instances;
  std::map<std::string, std::size_t> by_key;

  std::optional<std::size_t> Find(const std::string& key) const;
};

struct Project {
  ProjectConfig config;
  TaskDefinition task;
  std::shared_ptr<const Corpus> corpus;
  std::shared_ptr<const InstanceIndex> index;

  std::vector<SpanSet> span_sets;
  std::vector<LabelingFunction> lfs;
  OverrideMap overrides;
  std::map<std::string, std::vector<ManualSpan>> annotations;
  std::vector<nlohmann::json> events;
  std::vector<Suggestion> suggestions;
  std::int64_t next_suggestion = 1;
  std::vector<AuditEntry> audit;
  std::int64_t revision = 0;
  // Set by any LF, span-set or override change after the last assign-labels.
  bool stale = true;

  // Outputs of the last assign-labels run.
  std::optional<LabelMatrix> matrix;
  std::optional<ConsensusState> consensus;
  std::vector<std::vector<double>> model_probs;  // classifier, per instance
  std::optional<Projection2D> projection;
  std::map<std::string, SamplerReport> sampler_reports;  // by strategy
  std::vector<MetricsSnapshot> metrics;

  // Not persisted: retrained on every assign-labels run.
  std::shared_ptr<const ClassifierParams> classifier;
  std::shared_ptr<const std::vector<FeatureVector>> features;

  const std::vector<Instance>& instances() const { return index->instances; }
  const SpanSet* FindSpanSet(std::string_view name) const;
  const LabelingFunction* FindLf(std::string_view id) const;
  const Suggestion* FindSuggestion(std::string_view id) const;
};

// Persisted state equality (classifier weights and caches excluded).
bool SameState(const Project& a, const Project& b);

// Validates the task and enumerates instances. Throws ValidationFailedError.
Project CreateProject(TaskDefinition task, Corpus corpus,
                      ProjectConfig config = {});

class ValidationFailedError : public Error {
 public:
  explicit ValidationFailedError(ValidationReport report)
      : Error("ValidationFailed", Summary(report)), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  static std::string Summary(const ValidationReport& report);
  ValidationReport report_;
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& what)
      : Error("NotFound", what + " not found") {}
};

class NoLabelingFunctionsError : public Error {
 public:
  NoLabelingFunctionsError()
      : Error("NoLabelingFunctions", "the project has no labeling functions") {}
};

class StaleConsensusError : public Error {
 public:
  explicit StaleConsensusError(const std::string& message)
      : Error("StaleConsensus", message) {}
};

class InvalidSuggestionError : public Error {
 public:
  explicit InvalidSuggestionError(const std::string& message)
      : Error("InvalidSuggestion", message) {}
};

class SchemaVersionMismatchError : public Error {
 public:
  SchemaVersionMismatchError(const std::string& file, std::int64_t found)
      : Error("SchemaVersionMismatch",
              file + ": schema_version " + std::to_string(found) +
                  " is not supported (expected " +
                  std::to_string(kProjectSchemaVersion) + ")") {}
};

// Event log. Every mutation below is recorded as one event and applied
// through ApplyEvent, so replaying the log on a fresh project reproduces the
// state. `source` records provenance ("user", "llm-suggestion:<id>", ...).
void ApplyEvent(Project& project, const nlohmann::json& event);
Project ReplayEvents(const Project& initial,
                     const std::vector<nlohmann::json>& events);

void PutSpanSet(Project& project, const SpanSet& span_set,
                const std::string& source = "user");
// Throws Error("SpanSetInUse") while an LF references the set.
void DeleteSpanSet(Project& project, const std::string& name,
                   const std::string& source = "user");
void PutLf(Project& project, const LabelingFunction& lf,
           const std::string& source = "user");
void DeleteLf(Project& project, const std::string& id,
              const std::string& source = "user");
void SetLabelOverride(Project& project, const std::string& key,
                      const std::optional<std::string>& label,
                      OverrideSource override_source = OverrideSource::kHuman,
                      std::string timestamp = "",
                      const std::string& source = "user");
// Byte ranges [start, end) are snapped outward to token bounds. Throws
// Error("InvalidArgument") for a range that covers no token.
struct SpanRequest {
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<std::string> span_set;
};
void PutAnnotation(Project& project, const std::string& key,
                   const std::vector<SpanRequest>& spans,
                   bool add_to_span_sets = false,
                   const std::string& source = "user");

// Matrix, label model, consensus, classifier, projection, metrics. Leaves
// the project unchanged on failure.
void AssignLabels(Project& project, const std::string& source = "user");

const SamplerReport& RunSampler(Project& project, SamplerStrategy strategy,
                                double fraction = kDefaultSampleFraction);

MetricsSnapshot Evaluate(const Project& project);

// The model-or-override label of every instance (kAbstain before any run).
std::vector<std::string> CurrentLabels(const Project& project);

std::string ExportConsensus(const Project& project);

// LLM assistance split around the network call so callers can release locks.
struct LlmPromptPlan {
  PromptKind kind = PromptKind::kSampleAnalysis;
  std::vector<PromptSample> samples;
  PromptRequest request;
};
LlmPromptPlan PlanLlmPrompt(const Project& project, PromptKind kind,
                            const std::vector<std::string>& instance_keys);

struct LlmIngestResult {
  std::vector<std::string> suggestion_ids;
  std::vector<ParseIssue> dropped;
};
// Records the exchange in the audit log, parses it and stores the results as
// suggestions. Throws MalformedResponseError after auditing.
LlmIngestResult IngestLlmResponse(Project& project, const LlmPromptPlan& plan,
                                  const std::string& raw,
                                  std::string timestamp = "");

void AcceptSuggestion(Project& project, const std::string& id);
void RejectSuggestion(Project& project, const std::string& id);

struct SaveOptions {
  // Called at named points of the save protocol; tests throw or crash here.
  std::function<void(std::string_view stage)> fault_hook;
};

void SaveProject(const Project& project, const std::filesystem::path& dir,
                 const SaveOptions& options = {});
// Falls back to <dir>.bak when a save was interrupted mid-swap.
Project LoadProject(const std::filesystem::path& dir);

}  // namespace spanlab

#endif  // SPANLAB_PROJECT_H_
