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

#include "spanlab/project.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace spanlab {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view ToString(VoteEntropyMode mode) {
  return mode == VoteEntropyMode::kVotingMembers ? "voting_members"
                                                 : "committee_size";
}

VoteEntropyMode VoteEntropyModeFromString(std::string_view s) {
  if (s == "voting_members") return VoteEntropyMode::kVotingMembers;
  if (s == "committee_size") return VoteEntropyMode::kCommitteeSize;
  throw SchemaError("/vote_entropy_mode", "unknown mode '" + std::string(s) + "'");
}

json ParamsToJson(const LabelModelParams& p) {
  return {{"lf_ids", p.lf_ids},
          {"categories", p.categories},
          {"priors", p.priors},
          {"confusion", p.confusion},
          {"objective_history", p.objective_history},
          {"iterations", p.iterations},
          {"converged", p.converged}};
}

LabelModelParams ParamsFromJson(const json& j, const LabelModelConfig& config) {
  LabelModelParams p;
  p.lf_ids = j.at("lf_ids").get<std::vector<std::string>>();
  p.categories = j.at("categories").get<std::vector<std::string>>();
  p.priors = j.at("priors").get<std::vector<double>>();
  p.confusion = j.at("confusion").get<std::vector<std::vector<std::vector<double>>>>();
  p.objective_history = j.at("objective_history").get<std::vector<double>>();
  p.iterations = j.at("iterations").get<int>();
  p.converged = j.at("converged").get<bool>();
  p.config = config;
  return p;
}

// Parameters used when no LF voted anywhere: uniform prior, uninformative
// confusion matrices.
LabelModelParams UninformativeParams(const LabelMatrix& matrix,
                                     const LabelModelConfig& config) {
  LabelModelParams p;
  p.lf_ids = matrix.lf_ids;
  p.categories = matrix.categories;
  p.config = config;
  const std::size_t k = matrix.categories.size();
  const double u = k ? 1.0 / static_cast<double>(k) : 0.0;
  p.priors.assign(k, u);
  const std::size_t width =
      k + (config.abstain_model == AbstainModel::kClassConditional);
  const double w = width ? 1.0 / static_cast<double>(width) : 0.0;
  p.confusion.assign(matrix.cols(), std::vector<std::vector<double>>(
                                        k, std::vector<double>(width, w)));
  p.converged = true;
  return p;
}

json ManualSpanToJson(const ManualSpan& s) {
  return {{"first", s.token_range.first},
          {"last", s.token_range.last},
          {"text", s.text},
          {"span_set", s.span_set ? json(*s.span_set) : json()}};
}

ManualSpan ManualSpanFromJson(const json& j) {
  ManualSpan s;
  s.token_range = {j.at("first").get<std::size_t>(), j.at("last").get<std::size_t>()};
  s.text = j.at("text").get<std::string>();
  if (j.contains("span_set") && !j["span_set"].is_null()) {
    s.span_set = j["span_set"].get<std::string>();
  }
  return s;
}

const Instance& RequireInstance(const Project& p, const std::string& key) {
  const auto idx = p.index->Find(key);
  if (!idx) throw UnknownInstanceError(key);
  return p.index->instances[*idx];
}

std::vector<std::string> ReportSummary(const ValidationReport& r) {
  std::vector<std::string> out;
  for (const Violation& v : r.violations) {
    out.push_back(v.code + " at " + (v.path.empty() ? "/" : v.path) + ": " + v.message);
  }
  return out;
}

std::string NowIfEmpty(std::string ts) {
  return ts.empty() ? UtcTimestamp() : ts;
}

// --- assign-labels pipeline -------------------------------------------------

void RunAssignLabels(Project& p) {
  if (p.lfs.empty()) throw NoLabelingFunctionsError();
  LabelMatrix matrix =
      BuildLabelMatrix(*p.corpus, p.task, p.lfs, p.span_sets, p.config.engine);
  LabelModelParams params;
  try {
    params = FitLabelModel(matrix, p.config.label_model);
  } catch (const DegenerateMatrixError&) {
    params = UninformativeParams(matrix, p.config.label_model);
  }
  ConsensusState consensus = PredictConsensus(params, matrix, p.overrides);

  const auto& instances = p.instances();
  std::shared_ptr<const std::vector<FeatureVector>> features = p.features;
  if (!features || features->size() != instances.size() ||
      (!features->empty() && features->front().dim != p.config.feature_dim)) {
    const HashedNgramFeaturizer featurizer(p.config.feature_dim,
                                           p.config.target_window);
    auto fresh = std::make_shared<std::vector<FeatureVector>>();
    fresh->reserve(instances.size());
    for (const Instance& inst : instances) {
      fresh->push_back(
          featurizer.Featurize(inst, p.corpus->documents()[inst.doc_index]));
    }
    features = std::move(fresh);
  }

  const std::size_t k = p.task.label_categories.size();
  std::vector<std::vector<double>> targets(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::string key = consensus.instance_keys[i].ToString();
    if (auto it = p.overrides.find(key); it != p.overrides.end()) {
      targets[i].assign(k, 0.0);
      targets[i][static_cast<std::size_t>(p.task.CategoryIndex(it->second.label))] = 1.0;
    } else if (consensus.model_hard[i] != kAbstain) {
      targets[i] = consensus.probs[i];
    }
  }
  std::shared_ptr<const ClassifierParams> classifier;
  std::vector<std::vector<double>> model_probs;
  try {
    classifier = std::make_shared<const ClassifierParams>(TrainClassifier(
        *features, targets, p.task.label_categories, p.config.classifier));
    model_probs.reserve(instances.size());
    for (const FeatureVector& fv : *features) {
      model_probs.push_back(PredictProba(*classifier, fv));
    }
  } catch (const NoLabeledDataError&) {
    // Margin sampling stays unavailable until something is labeled.
  }
  std::optional<Projection2D> projection;
  if (instances.size() >= 2) projection = Project2D(*features, p.config.seed);

  p.matrix = std::move(matrix);
  p.consensus = std::move(consensus);
  p.features = std::move(features);
  p.classifier = std::move(classifier);
  p.model_probs = std::move(model_probs);
  p.projection = std::move(projection);
  p.sampler_reports.clear();
  p.stale = false;
  MetricsSnapshot snapshot = Evaluate(p);
  snapshot.revision = p.revision + 1;
  p.metrics.push_back(std::move(snapshot));
}

// --- persistence helpers ------------------------------------------------------

void WriteFileSynced(const fs::path& path, const std::string& content) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("IoError", "cannot create " + path.string());
  std::size_t written = 0;
  while (written < content.size()) {
    const ssize_t n = ::write(fd, content.data() + written, content.size() - written);
    if (n <= 0) {
      ::close(fd);
      throw Error("IoError", "write failed for " + path.string());
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ParseJsonFile(const fs::path& path) {
  const std::string text = ReadFile(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw SchemaError(path.filename().string(), "malformed JSON");
  }
  return j;
}

std::vector<json> ParseJsonlFile(const fs::path& path) {
  std::vector<json> lines;
  if (!fs::exists(path)) return lines;
  std::istringstream in(ReadFile(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw ParseError(line_no, path.filename().string() + ": malformed JSON");
    }
    lines.push_back(std::move(j));
  }
  return lines;
}

void CheckVersion(const json& j, const std::string& file) {
  if (!j.is_object() || !j.contains("schema_version") ||
      !j["schema_version"].is_number_integer()) {
    throw SchemaError(file + "/schema_version", "missing or not an integer");
  }
  const auto v = j["schema_version"].get<std::int64_t>();
  if (v != kProjectSchemaVersion) throw SchemaVersionMismatchError(file, v);
}

std::string Dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string JsonlOf(const std::vector<json>& lines) {
  std::string out;
  for (const json& j : lines) {
    out += Dump(j);
    out += '\n';
  }
  return out;
}

fs::path Normalized(const fs::path& dir) {
  fs::path p = dir.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p;
}

fs::path WithSuffix(const fs::path& dir, const std::string& suffix) {
  fs::path p = dir;
  p += suffix;
  return p;
}

Project LoadFrom(const fs::path& dir) {
  const json meta = ParseJsonFile(dir / "project.json");
  CheckVersion(meta, "project.json");
  Project p;
  try {
    p.config = ProjectConfigFromJson(meta.at("config"));
    TaskDefinition task = TaskFromJson(meta.at("task"), "/task");
    Corpus corpus = ParseJsonlDataset(ReadFile(dir / "dataset.jsonl"));
    p = CreateProject(std::move(task), std::move(corpus), p.config);
    p.revision = meta.at("revision").get<std::int64_t>();
    p.stale = meta.at("stale").get<bool>();
    p.next_suggestion = meta.at("next_suggestion").get<std::int64_t>();
    for (const json& m : meta.at("metrics")) p.metrics.push_back(MetricsFromJson(m));
    for (const auto& [name, r] : meta.at("sampler_reports").items()) {
      p.sampler_reports[name] = SamplerReportFromJson(r);
    }
  } catch (const json::exception& e) {
    throw SchemaError("project.json", e.what());
  }

  const json spansets = ParseJsonFile(dir / "spansets.json");
  CheckVersion(spansets, "spansets.json");
  if (!spansets.contains("span_sets") || !spansets["span_sets"].is_array()) {
    throw SchemaError("spansets.json/span_sets", "missing array");
  }
  for (std::size_t i = 0; i < spansets["span_sets"].size(); ++i) {
    p.span_sets.push_back(SpanSetFromJson(spansets["span_sets"][i],
                                          "/span_sets/" + std::to_string(i)));
  }
  const json lfs = ParseJsonFile(dir / "lfs.json");
  CheckVersion(lfs, "lfs.json");
  if (!lfs.contains("labeling_functions") || !lfs["labeling_functions"].is_array()) {
    throw SchemaError("lfs.json/labeling_functions", "missing array");
  }
  for (std::size_t i = 0; i < lfs["labeling_functions"].size(); ++i) {
    const std::string path = "/labeling_functions/" + std::to_string(i);
    LabelingFunction lf = LfFromJson(lfs["labeling_functions"][i], path);
    const ValidationReport report = ValidateLf(lf, p.span_sets, p.task);
    if (!report.ok()) {
      throw SchemaError("lfs.json" + path, ReportSummary(report).front());
    }
    p.lfs.push_back(std::move(lf));
  }

  try {
    for (const json& line : ParseJsonlFile(dir / "overrides.jsonl")) {
      const std::string key = line.at("instance").get<std::string>();
      if (line.at("label").is_null()) {
        p.overrides.erase(key);
      } else {
        p.overrides[key] = {line.at("label").get<std::string>(),
                            OverrideSourceFromString(line.at("source").get<std::string>()),
                            line.at("timestamp").get<std::string>()};
      }
    }
    const json annotations = ParseJsonFile(dir / "annotations.json");
    for (const auto& [key, spans] : annotations.items()) {
      auto& list = p.annotations[key];
      for (const json& s : spans) list.push_back(ManualSpanFromJson(s));
    }
    const json suggestions = ParseJsonFile(dir / "suggestions.json");
    for (const json& s : suggestions) p.suggestions.push_back(SuggestionFromJson(s));
    p.events = ParseJsonlFile(dir / "events.jsonl");
    p.audit = AuditLog(dir / "audit" / "llm.jsonl").ReadAll();

    if (meta.at("has_consensus").get<bool>()) {
      p.matrix = ImportMatrixCsv(ReadFile(dir / "matrix.csv"), p.task.label_categories);
      const LabelModelParams params =
          ParamsFromJson(ParseJsonFile(dir / "labelmodel.json"), p.config.label_model);
      p.consensus = PredictConsensus(params, *p.matrix, p.overrides);
      if (ExportConsensusJsonl(*p.consensus) != ReadFile(dir / "consensus.jsonl")) {
        throw Error("CorruptProject",
                    "consensus.jsonl does not match the stored label model");
      }
      const bool has_projection = meta.at("has_projection").get<bool>();
      if (has_projection) {
        p.projection = Projection2D{};
        p.projection->explained_variance =
            meta.at("explained_variance").get<std::array<double, 2>>();
      }
      for (const json& line : ParseJsonlFile(dir / "model.jsonl")) {
        if (line.contains("model_probs") && !line["model_probs"].is_null()) {
          p.model_probs.push_back(line["model_probs"].get<std::vector<double>>());
        }
        if (has_projection) {
          p.projection->coords.push_back(line.at("xy").get<std::array<double, 2>>());
        }
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(dir.filename().string(), e.what());
  }
  return p;
}

}  // namespace

// --- config & metrics JSON ------------------------------------------------------

json ProjectConfigToJson(const ProjectConfig& c) {
  return {
      {"id", c.id},
      {"seed", c.seed},
      {"engine",
       {{"max_rule_gap", c.engine.max_rule_gap ? json(*c.engine.max_rule_gap) : json()},
        {"threads", c.engine.threads}}},
      {"label_model",
       {{"max_iters", c.label_model.max_iters},
        {"tol", c.label_model.tol},
        {"seed", c.label_model.seed},
        {"smoothing", c.label_model.smoothing},
        {"abstain_model", ToString(c.label_model.abstain_model)}}},
      {"classifier",
       {{"learning_rate", c.classifier.learning_rate},
        {"epochs", c.classifier.epochs},
        {"l2", c.classifier.l2},
        {"batch_size", c.classifier.batch_size},
        {"seed", c.classifier.seed},
        {"patience", c.classifier.patience}}},
      {"feature_dim", c.feature_dim},
      {"target_window", c.target_window},
      {"vote_entropy_mode", ToString(c.vote_entropy_mode)},
      {"llm",
       {{"endpoint", c.llm.endpoint},
        {"model", c.llm.model},
        {"api_key_env", c.llm.api_key_env},
        {"timeout_ms", c.llm.timeout.count()},
        {"max_retries", c.llm.max_retries}}},
  };
}

ProjectConfig ProjectConfigFromJson(const json& j) {
  // Missing keys keep their defaults so hand-written configs can be short.
  ProjectConfig c;
  auto get = [](const json& obj, const char* key, auto& out) {
    if (obj.contains(key) && !obj[key].is_null()) {
      out = obj[key].get<std::decay_t<decltype(out)>>();
    }
  };
  try {
    if (!j.is_object()) throw SchemaError("/config", "expected object");
    get(j, "id", c.id);
    get(j, "seed", c.seed);
    if (j.contains("engine")) {
      const json& e = j["engine"];
      if (e.contains("max_rule_gap") && !e["max_rule_gap"].is_null()) {
        c.engine.max_rule_gap = e["max_rule_gap"].get<std::size_t>();
      }
      get(e, "threads", c.engine.threads);
    }
    if (j.contains("label_model")) {
      const json& l = j["label_model"];
      get(l, "max_iters", c.label_model.max_iters);
      get(l, "tol", c.label_model.tol);
      get(l, "seed", c.label_model.seed);
      get(l, "smoothing", c.label_model.smoothing);
      if (l.contains("abstain_model")) {
        const std::string name = l["abstain_model"].get<std::string>();
        if (name != "class_conditional" && name != "missing_at_random") {
          throw SchemaError("/label_model/abstain_model",
                            "unknown abstain model '" + name + "'");
        }
        c.label_model.abstain_model = AbstainModelFromString(name);
      }
    }
    if (j.contains("classifier")) {
      const json& m = j["classifier"];
      get(m, "learning_rate", c.classifier.learning_rate);
      get(m, "epochs", c.classifier.epochs);
      get(m, "l2", c.classifier.l2);
      get(m, "batch_size", c.classifier.batch_size);
      get(m, "seed", c.classifier.seed);
      get(m, "patience", c.classifier.patience);
    }
    get(j, "feature_dim", c.feature_dim);
    get(j, "target_window", c.target_window);
    if (j.contains("vote_entropy_mode")) {
      c.vote_entropy_mode =
          VoteEntropyModeFromString(j["vote_entropy_mode"].get<std::string>());
    }
    if (j.contains("llm")) {
      const json& l = j["llm"];
      get(l, "endpoint", c.llm.endpoint);
      get(l, "model", c.llm.model);
      get(l, "api_key_env", c.llm.api_key_env);
      if (l.contains("timeout_ms")) {
        c.llm.timeout = std::chrono::milliseconds(l["timeout_ms"].get<std::int64_t>());
      }
      get(l, "max_retries", c.llm.max_retries);
    }
  } catch (const json::exception& e) {
    throw SchemaError("/config", e.what());
  }
  if (c.feature_dim == 0) throw SchemaError("/config/feature_dim", "must be positive");
  return c;
}

json MetricsToJson(const MetricsSnapshot& m) {
  return {{"timestamp", m.timestamp},
          {"revision", m.revision},
          {"accuracy", m.accuracy ? json(*m.accuracy) : json()},
          {"coverage", m.coverage},
          {"conflict_rate", m.conflict_rate},
          {"lf_count", m.lf_count},
          {"override_count", m.override_count},
          {"instance_count", m.instance_count}};
}

MetricsSnapshot MetricsFromJson(const json& j) {
  MetricsSnapshot m;
  m.timestamp = j.at("timestamp").get<std::string>();
  m.revision = j.at("revision").get<std::int64_t>();
  if (!j.at("accuracy").is_null()) m.accuracy = j["accuracy"].get<double>();
  m.coverage = j.at("coverage").get<double>();
  m.conflict_rate = j.at("conflict_rate").get<double>();
  m.lf_count = j.at("lf_count").get<std::size_t>();
  m.override_count = j.at("override_count").get<std::size_t>();
  m.instance_count = j.at("instance_count").get<std::size_t>();
  return m;
}

std::optional<std::size_t> InstanceIndex::Find(const std::string& key) const {
  auto it = by_key.find(key);
  if (it == by_key.end()) return std::nullopt;
  return it->second;
}

const SpanSet* Project::FindSpanSet(std::string_view name) const {
  for (const SpanSet& s : span_sets) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const LabelingFunction* Project::FindLf(std::string_view id) const {
  for (const LabelingFunction& lf : lfs) {
    if (lf.id == id) return &lf;
  }
  return nullptr;
}

const Suggestion* Project::FindSuggestion(std::string_view id) const {
  for (const Suggestion& s : suggestions) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::string ValidationFailedError::Summary(const ValidationReport& report) {
  const auto lines = ReportSummary(report);
  std::string out = "validation failed";
  for (const std::string& l : lines) out += "; " + l;
  return out;
}

bool SameState(const Project& a, const Project& b) {
  return ProjectConfigToJson(a.config) == ProjectConfigToJson(b.config) &&
         a.task == b.task &&
         SerializeDataset(*a.corpus, DatasetFormat::kJsonl) ==
             SerializeDataset(*b.corpus, DatasetFormat::kJsonl) &&
         a.span_sets == b.span_sets && a.lfs == b.lfs &&
         a.overrides == b.overrides && a.annotations == b.annotations &&
         a.events == b.events && a.suggestions == b.suggestions &&
         a.next_suggestion == b.next_suggestion && a.audit == b.audit &&
         a.revision == b.revision && a.stale == b.stale && a.matrix == b.matrix &&
         a.consensus == b.consensus && a.model_probs == b.model_probs &&
         a.projection == b.projection && a.sampler_reports == b.sampler_reports &&
         a.metrics == b.metrics;
}

Project CreateProject(TaskDefinition task, Corpus corpus, ProjectConfig config) {
  const ValidationReport report = ValidateTask(task);
  if (!report.ok()) throw ValidationFailedError(report);
  Project p;
  p.config = std::move(config);
  p.task = std::move(task);
  p.corpus = std::make_shared<const Corpus>(std::move(corpus));
  auto index = std::make_shared<InstanceIndex>();
  index->instances = EnumerateInstances(*p.corpus, p.task);
  for (std::size_t i = 0; i < index->instances.size(); ++i) {
    index->by_key.emplace(index->instances[i].key.ToString(), i);
  }
  p.index = std::move(index);
  return p;
}

// --- events -------------------------------------------------------------------

void ApplyEvent(Project& p, const json& event) {
  if (!event.is_object() || !event.contains("type") || !event["type"].is_string()) {
    throw SchemaError("/type", "event needs a string type");
  }
  const std::string type = event["type"].get<std::string>();
  try {
    if (type == "put_span_set") {
      SpanSet set = SpanSetFromJson(event.at("span_set"), "/span_set");
      const ValidationReport report = ValidateSpanSet(set);
      if (!report.ok()) throw ValidationFailedError(report);
      auto it = std::find_if(p.span_sets.begin(), p.span_sets.end(),
                             [&](const SpanSet& s) { return s.name == set.name; });
      if (it != p.span_sets.end()) {
        *it = std::move(set);
      } else {
        p.span_sets.push_back(std::move(set));
      }
      p.stale = true;
    } else if (type == "delete_span_set") {
      const std::string name = event.at("name").get<std::string>();
      auto it = std::find_if(p.span_sets.begin(), p.span_sets.end(),
                             [&](const SpanSet& s) { return s.name == name; });
      if (it == p.span_sets.end()) throw NotFoundError("span set '" + name + "'");
      for (const LabelingFunction& lf : p.lfs) {
        if (std::find(lf.span_set_names.begin(), lf.span_set_names.end(), name) !=
            lf.span_set_names.end()) {
          throw Error("SpanSetInUse", "span set '" + name +
                                          "' is used by labeling function '" + lf.id + "'");
        }
      }
      p.span_sets.erase(it);
      p.stale = true;
    } else if (type == "put_lf") {
      LabelingFunction lf = LfFromJson(event.at("lf"), "/lf");
      const ValidationReport report = ValidateLf(lf, p.span_sets, p.task);
      if (!report.ok()) throw ValidationFailedError(report);
      auto it = std::find_if(p.lfs.begin(), p.lfs.end(),
                             [&](const LabelingFunction& l) { return l.id == lf.id; });
      if (it != p.lfs.end()) {
        *it = std::move(lf);
      } else {
        p.lfs.push_back(std::move(lf));
      }
      p.stale = true;
    } else if (type == "delete_lf") {
      const std::string id = event.at("id").get<std::string>();
      auto it = std::find_if(p.lfs.begin(), p.lfs.end(),
                             [&](const LabelingFunction& l) { return l.id == id; });
      if (it == p.lfs.end()) throw NotFoundError("labeling function '" + id + "'");
      p.lfs.erase(it);
      p.stale = true;
    } else if (type == "set_override" || type == "clear_override") {
      const std::string key = event.at("instance").get<std::string>();
      RequireInstance(p, key);
      std::optional<std::string> label;
      Override ov;
      if (type == "set_override") {
        label = event.at("label").get<std::string>();
        if (p.task.CategoryIndex(*label) < 0) throw UnknownCategoryError(*label);
        ov = {*label,
              OverrideSourceFromString(event.at("override_source").get<std::string>()),
              event.at("timestamp").get<std::string>()};
      }
      if (p.consensus) {
        p.consensus = SetOverride(std::move(*p.consensus), key, label, ov.source,
                                  ov.timestamp);
      }
      if (label) {
        p.overrides[key] = ov;
      } else {
        p.overrides.erase(key);
      }
      p.stale = true;
    } else if (type == "put_annotation") {
      const std::string key = event.at("instance").get<std::string>();
      const Instance& inst = RequireInstance(p, key);
      const std::size_t n_tokens = p.corpus->documents()[inst.doc_index].tokens.size();
      std::vector<ManualSpan> spans;
      for (const json& s : event.at("spans")) {
        ManualSpan span = ManualSpanFromJson(s);
        if (span.token_range.first > span.token_range.last ||
            span.token_range.last >= n_tokens) {
          throw Error("InvalidArgument", "annotation token range out of bounds");
        }
        spans.push_back(std::move(span));
      }
      if (spans.empty()) {
        p.annotations.erase(key);
      } else {
        p.annotations[key] = std::move(spans);
      }
    } else if (type == "assign_labels") {
      RunAssignLabels(p);
    } else {
      throw SchemaError("/type", "unknown event type '" + type + "'");
    }
  } catch (const json::exception& e) {
    throw SchemaError("/" + type, e.what());
  }
  json recorded = event;
  recorded["seq"] = p.events.size() + 1;
  p.events.push_back(std::move(recorded));
  ++p.revision;
}

Project ReplayEvents(const Project& initial, const std::vector<json>& events) {
  Project p = CreateProject(initial.task, *initial.corpus, initial.config);
  for (const json& e : events) {
    json copy = e;
    copy.erase("seq");
    ApplyEvent(p, copy);
  }
  return p;
}

void PutSpanSet(Project& p, const SpanSet& span_set, const std::string& source) {
  ApplyEvent(p, {{"type", "put_span_set"},
                 {"span_set", SpanSetToJson(span_set)},
                 {"source", source}});
}

void DeleteSpanSet(Project& p, const std::string& name, const std::string& source) {
  ApplyEvent(p, {{"type", "delete_span_set"}, {"name", name}, {"source", source}});
}

void PutLf(Project& p, const LabelingFunction& lf, const std::string& source) {
  ApplyEvent(p, {{"type", "put_lf"}, {"lf", LfToJson(lf)}, {"source", source}});
}

void DeleteLf(Project& p, const std::string& id, const std::string& source) {
  ApplyEvent(p, {{"type", "delete_lf"}, {"id", id}, {"source", source}});
}

void SetLabelOverride(Project& p, const std::string& key,
                      const std::optional<std::string>& label,
                      OverrideSource override_source, std::string timestamp,
                      const std::string& source) {
  timestamp = NowIfEmpty(std::move(timestamp));
  if (label) {
    ApplyEvent(p, {{"type", "set_override"},
                   {"instance", key},
                   {"label", *label},
                   {"override_source", ToString(override_source)},
                   {"timestamp", timestamp},
                   {"source", source}});
  } else {
    ApplyEvent(p, {{"type", "clear_override"},
                   {"instance", key},
                   {"timestamp", timestamp},
                   {"source", source}});
  }
}

void PutAnnotation(Project& p, const std::string& key,
                   const std::vector<SpanRequest>& spans, bool add_to_span_sets,
                   const std::string& source) {
  const Instance& inst = RequireInstance(p, key);
  const Document& doc = p.corpus->documents()[inst.doc_index];
  std::vector<ManualSpan> snapped;
  for (const SpanRequest& req : spans) {
    if (req.start >= req.end || req.end > doc.text.size()) {
      throw Error("InvalidArgument", "span byte range is empty or out of bounds");
    }
    std::optional<std::size_t> first;
    std::size_t last = 0;
    for (std::size_t t = 0; t < doc.tokens.size(); ++t) {
      if (doc.tokens[t].start < req.end && doc.tokens[t].end > req.start) {
        if (!first) first = t;
        last = t;
      }
    }
    if (!first) throw Error("InvalidArgument", "span covers no token");
    if (req.span_set && !p.FindSpanSet(*req.span_set)) {
      throw NotFoundError("span set '" + *req.span_set + "'");
    }
    const std::size_t begin = doc.tokens[*first].start;
    snapped.push_back({{*first, last},
                       doc.text.substr(begin, doc.tokens[last].end - begin),
                       req.span_set});
  }
  json list = json::array();
  for (const ManualSpan& s : snapped) list.push_back(ManualSpanToJson(s));
  ApplyEvent(p, {{"type", "put_annotation"},
                 {"instance", key},
                 {"spans", list},
                 {"source", source}});
  if (!add_to_span_sets) return;
  for (const ManualSpan& s : snapped) {
    if (!s.span_set) continue;
    SpanSet set = *p.FindSpanSet(*s.span_set);
    if (set.Contains(s.text)) continue;
    set.spans.push_back({s.text, SpanProvenance::kUser});
    PutSpanSet(p, set, source);
  }
}

void AssignLabels(Project& p, const std::string& source) {
  ApplyEvent(p, {{"type", "assign_labels"}, {"source", source}});
}

const SamplerReport& RunSampler(Project& p, SamplerStrategy strategy,
                                double fraction) {
  SamplerReport report;
  if (strategy == SamplerStrategy::kMargin) {
    if (p.stale || !p.consensus) {
      throw StaleConsensusError(
          "margin sampling needs a fresh assign-labels run");
    }
    if (p.model_probs.empty()) {
      throw StaleConsensusError(
          "margin sampling needs a trained classifier; label some instances");
    }
    report = MarginSampling(p.consensus->instance_keys, p.model_probs, fraction);
  } else {
    LabelMatrix fresh;
    const LabelMatrix* matrix = nullptr;
    if (!p.stale && p.matrix) {
      matrix = &*p.matrix;
    } else {
      fresh = BuildLabelMatrix(*p.corpus, p.task, p.lfs, p.span_sets, p.config.engine);
      matrix = &fresh;
    }
    report = strategy == SamplerStrategy::kAbstain
                 ? AbstainSampling(*matrix)
                 : VoteEntropySampling(*matrix, fraction, p.config.vote_entropy_mode);
  }
  auto& slot = p.sampler_reports[std::string(ToString(strategy))];
  slot = std::move(report);
  return slot;
}

std::vector<std::string> CurrentLabels(const Project& p) {
  if (p.consensus) return p.consensus->hard;
  std::vector<std::string> labels;
  labels.reserve(p.instances().size());
  for (const Instance& inst : p.instances()) {
    auto it = p.overrides.find(inst.key.ToString());
    labels.push_back(it == p.overrides.end() ? std::string(kAbstain) : it->second.label);
  }
  return labels;
}

MetricsSnapshot Evaluate(const Project& p) {
  MetricsSnapshot m;
  m.timestamp = UtcTimestamp();
  m.revision = p.revision;
  m.lf_count = p.lfs.size();
  m.override_count = p.overrides.size();
  const std::vector<std::string> labels = CurrentLabels(p);
  const auto& instances = p.instances();
  m.instance_count = instances.size();
  if (instances.empty()) return m;

  std::size_t covered = 0;
  std::size_t with_gold = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (labels[i] != kAbstain) ++covered;
    if (auto gold = p.corpus->GoldFor(instances[i].key)) {
      ++with_gold;
      if (labels[i] != kAbstain && labels[i] == *gold) ++correct;
    }
  }
  const double n = static_cast<double>(instances.size());
  m.coverage = static_cast<double>(covered) / n;
  if (with_gold > 0) {
    m.accuracy = static_cast<double>(correct) / static_cast<double>(with_gold);
  }
  if (p.matrix && p.matrix->cols() > 0) {
    std::size_t conflicts = 0;
    for (std::size_t r = 0; r < p.matrix->rows(); ++r) {
      int seen = kAbstainCell;
      for (std::size_t c = 0; c < p.matrix->cols(); ++c) {
        const int v = p.matrix->at(r, c);
        if (v == kAbstainCell) continue;
        if (seen == kAbstainCell) {
          seen = v;
        } else if (v != seen) {
          ++conflicts;
          break;
        }
      }
    }
    m.conflict_rate = static_cast<double>(conflicts) / static_cast<double>(p.matrix->rows());
  }
  return m;
}

std::string ExportConsensus(const Project& p) {
  return p.consensus ? ExportConsensusJsonl(*p.consensus) : std::string();
}

LlmPromptPlan PlanLlmPrompt(const Project& p, PromptKind kind,
                            const std::vector<std::string>& instance_keys) {
  LlmPromptPlan plan;
  plan.kind = kind;
  for (const std::string& key : instance_keys) {
    const Instance& inst = RequireInstance(p, key);
    plan.samples.push_back({key, p.corpus->documents()[inst.doc_index].text,
                            inst.key.target_name});
  }
  plan.request = RenderPrompt(kind, p.task, plan.samples, p.span_sets, p.lfs);
  return plan;
}

LlmIngestResult IngestLlmResponse(Project& p, const LlmPromptPlan& plan,
                                  const std::string& raw, std::string timestamp) {
  p.audit.push_back({plan.request.context_digest, plan.kind,
                     plan.request.rendered_text, raw, NowIfEmpty(std::move(timestamp))});
  ++p.revision;
  LlmIngestResult result;
  auto add = [&](auto payload, SuggestionStatus status) {
    Suggestion s;
    s.id = "s" + std::to_string(p.next_suggestion++);
    s.status = status;
    s.payload = std::move(payload);
    result.suggestion_ids.push_back(s.id);
    p.suggestions.push_back(std::move(s));
  };
  switch (plan.kind) {
    case PromptKind::kSampleAnalysis: {
      auto parsed = ParseSampleAnalysis(raw, p.task, plan.samples);
      for (auto& item : parsed.items) add(std::move(item), SuggestionStatus::kPending);
      result.dropped = std::move(parsed.dropped);
      break;
    }
    case PromptKind::kSpanExpansion: {
      auto parsed = ParseSpanExpansion(raw, p.span_sets, plan.samples);
      for (auto& item : parsed.items) add(std::move(item), SuggestionStatus::kPending);
      result.dropped = std::move(parsed.dropped);
      break;
    }
    case PromptKind::kLfRecommendation: {
      for (auto& item : ParseLfRecommendation(raw, p.task, p.span_sets, p.lfs)) {
        const SuggestionStatus status = item.status;
        add(std::move(item), status);
      }
      break;
    }
  }
  return result;
}

void AcceptSuggestion(Project& p, const std::string& id) {
  auto it = std::find_if(p.suggestions.begin(), p.suggestions.end(),
                         [&](const Suggestion& s) { return s.id == id; });
  if (it == p.suggestions.end()) throw NotFoundError("suggestion '" + id + "'");
  if (it->status != SuggestionStatus::kPending) {
    throw InvalidSuggestionError("suggestion '" + id + "' is " +
                                 std::string(ToString(it->status)));
  }
  const std::string source = "llm-suggestion:" + id;
  const std::size_t pos = static_cast<std::size_t>(it - p.suggestions.begin());

  if (const auto* rec = std::get_if<LabelRecommendation>(&it->payload)) {
    const LabelRecommendation copy = *rec;
    SetLabelOverride(p, copy.instance_key, copy.label, OverrideSource::kLlmApproved,
                     "", source);
  } else if (const auto* span = std::get_if<SpanSuggestion>(&it->payload)) {
    const SpanSet* set = p.FindSpanSet(span->span_set_name);
    if (set == nullptr) {
      throw InvalidSuggestionError("span set '" + span->span_set_name +
                                   "' no longer exists");
    }
    if (!set->Contains(span->phrase)) {
      SpanSet updated = *set;
      updated.spans.push_back({span->phrase, SpanProvenance::kLlmAccepted});
      PutSpanSet(p, updated, source);
    }
  } else {
    const LfSuggestion lf_suggestion = std::get<LfSuggestion>(it->payload);
    if (!lf_suggestion.validation.ok()) {
      throw InvalidSuggestionError("suggestion '" + id + "' failed validation");
    }
    LabelingFunction lf;
    try {
      lf = ParseLf(lf_suggestion.lf_json);
    } catch (const SchemaError& e) {
      throw InvalidSuggestionError(e.what());
    }
    const ValidationReport report = ValidateLf(lf, p.span_sets, p.task);
    if (!report.ok()) {
      throw InvalidSuggestionError("suggestion no longer validates: " +
                                   ReportSummary(report).front());
    }
    if (lf_suggestion.replaces) {
      if (!p.FindLf(*lf_suggestion.replaces)) {
        throw InvalidSuggestionError("labeling function '" + *lf_suggestion.replaces +
                                     "' no longer exists");
      }
      if (lf.id != *lf_suggestion.replaces && p.FindLf(lf.id)) {
        throw InvalidSuggestionError("labeling function id '" + lf.id + "' is taken");
      }
      if (lf.id != *lf_suggestion.replaces) DeleteLf(p, *lf_suggestion.replaces, source);
    } else if (p.FindLf(lf.id)) {
      throw InvalidSuggestionError("labeling function id '" + lf.id + "' is taken");
    }
    PutLf(p, lf, source);
  }
  Suggestion& s = p.suggestions[pos];
  s.status = SuggestionStatus::kAccepted;
  if (auto* lf = std::get_if<LfSuggestion>(&s.payload)) lf->status = s.status;
}

void RejectSuggestion(Project& p, const std::string& id) {
  auto it = std::find_if(p.suggestions.begin(), p.suggestions.end(),
                         [&](const Suggestion& s) { return s.id == id; });
  if (it == p.suggestions.end()) throw NotFoundError("suggestion '" + id + "'");
  if (it->status != SuggestionStatus::kPending) {
    throw InvalidSuggestionError("suggestion '" + id + "' is " +
                                 std::string(ToString(it->status)));
  }
  it->status = SuggestionStatus::kRejected;
  if (auto* lf = std::get_if<LfSuggestion>(&it->payload)) lf->status = it->status;
  ++p.revision;
}

// --- save / load ----------------------------------------------------------------

void SaveProject(const Project& p, const fs::path& dir_in, const SaveOptions& options) {
  const fs::path dir = Normalized(dir_in);
  const fs::path tmp = WithSuffix(dir, ".tmp");
  const fs::path bak = WithSuffix(dir, ".bak");
  auto hook = [&](std::string_view stage) {
    if (options.fault_hook) options.fault_hook(stage);
  };
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp / "audit");

  WriteFileSynced(tmp / "dataset.jsonl", SerializeDataset(*p.corpus, DatasetFormat::kJsonl));
  json spansets = {{"schema_version", kProjectSchemaVersion}, {"span_sets", json::array()}};
  for (const SpanSet& s : p.span_sets) spansets["span_sets"].push_back(SpanSetToJson(s));
  WriteFileSynced(tmp / "spansets.json", Dump(spansets));
  json lfs = {{"schema_version", kProjectSchemaVersion},
              {"labeling_functions", json::array()}};
  for (const LabelingFunction& lf : p.lfs) lfs["labeling_functions"].push_back(LfToJson(lf));
  WriteFileSynced(tmp / "lfs.json", Dump(lfs));
  hook("partial");

  // The override history, in the order it happened.
  std::vector<json> override_lines;
  for (const json& e : p.events) {
    const std::string type = e.value("type", "");
    if (type == "set_override") {
      override_lines.push_back({{"instance", e["instance"]},
                                {"label", e["label"]},
                                {"source", e["override_source"]},
                                {"timestamp", e["timestamp"]}});
    } else if (type == "clear_override") {
      override_lines.push_back({{"instance", e["instance"]},
                                {"label", nullptr},
                                {"source", nullptr},
                                {"timestamp", e["timestamp"]}});
    }
  }
  WriteFileSynced(tmp / "overrides.jsonl", JsonlOf(override_lines));
  json annotations = json::object();
  for (const auto& [key, spans] : p.annotations) {
    json list = json::array();
    for (const ManualSpan& s : spans) list.push_back(ManualSpanToJson(s));
    annotations[key] = std::move(list);
  }
  WriteFileSynced(tmp / "annotations.json", Dump(annotations));
  json suggestions = json::array();
  for (const Suggestion& s : p.suggestions) suggestions.push_back(SuggestionToJson(s));
  WriteFileSynced(tmp / "suggestions.json", Dump(suggestions));
  WriteFileSynced(tmp / "events.jsonl", JsonlOf(p.events));
  {
    AuditLog log(tmp / "audit" / "llm.jsonl");
    for (const AuditEntry& e : p.audit) log.Append(e);
    if (p.audit.empty()) WriteFileSynced(tmp / "audit" / "llm.jsonl", "");
  }

  json meta = {{"schema_version", kProjectSchemaVersion},
               {"config", ProjectConfigToJson(p.config)},
               {"task", TaskToJson(p.task)},
               {"revision", p.revision},
               {"stale", p.stale},
               {"next_suggestion", p.next_suggestion},
               {"has_consensus", p.consensus.has_value()},
               {"has_projection", p.projection.has_value()},
               {"metrics", json::array()},
               {"sampler_reports", json::object()}};
  for (const MetricsSnapshot& m : p.metrics) meta["metrics"].push_back(MetricsToJson(m));
  for (const auto& [name, r] : p.sampler_reports) {
    meta["sampler_reports"][name] = SamplerReportToJson(r);
  }
  if (p.consensus) {
    WriteFileSynced(tmp / "matrix.csv", ExportMatrixCsv(*p.matrix));
    WriteFileSynced(tmp / "labelmodel.json", Dump(ParamsToJson(p.consensus->model_params)));
    WriteFileSynced(tmp / "consensus.jsonl", ExportConsensusJsonl(*p.consensus));
    std::vector<json> model_lines;
    for (std::size_t i = 0; i < p.consensus->instance_keys.size(); ++i) {
      json line = {{"instance", p.consensus->instance_keys[i].ToString()},
                   {"model_probs", i < p.model_probs.size() ? json(p.model_probs[i]) : json()}};
      if (p.projection) line["xy"] = p.projection->coords[i];
      model_lines.push_back(std::move(line));
    }
    WriteFileSynced(tmp / "model.jsonl", JsonlOf(model_lines));
    if (p.projection) meta["explained_variance"] = p.projection->explained_variance;
  }
  // project.json last: its presence marks a complete directory.
  WriteFileSynced(tmp / "project.json", Dump(meta));
  hook("tmp_written");

  if (fs::exists(dir)) {
    fs::remove_all(bak, ec);
    fs::rename(dir, bak);
  }
  hook("backup_moved");
  fs::rename(tmp, dir);
  hook("swapped");
  fs::remove_all(bak, ec);
}

Project LoadProject(const fs::path& dir_in) {
  const fs::path dir = Normalized(dir_in);
  if (fs::exists(dir / "project.json")) return LoadFrom(dir);
  const fs::path bak = WithSuffix(dir, ".bak");
  if (fs::exists(bak / "project.json")) return LoadFrom(bak);
  throw Error("IoError", "no project found at " + dir.string());
}

}  // namespace spanlab
