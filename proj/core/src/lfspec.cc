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

#include "spanlab/lfspec.h"

#include <algorithm>
#include <map>
#include <set>

#include "spanlab/corpus.h"
#include "spanlab/error.h"

namespace spanlab {
namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects anything not consumed.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(Root(), "expected object");
  }

  const json* Optional(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  const json& Required(const std::string& key) {
    const json* v = Optional(key);
    if (v == nullptr) throw SchemaError(Path(key), "required");
    return *v;
  }

  std::string String(const std::string& key) {
    const json& v = Required(key);
    if (!v.is_string()) throw SchemaError(Path(key), "expected string");
    return v.get<std::string>();
  }

  const json& Array(const std::string& key, std::size_t min_size) {
    const json& v = Required(key);
    if (!v.is_array()) throw SchemaError(Path(key), "expected array");
    if (v.size() < min_size) {
      throw SchemaError(Path(key), "min length " + std::to_string(min_size));
    }
    return v;
  }

  void Finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw SchemaError(Path(key), "unknown field");
    }
  }

  std::string Path(const std::string& key) const { return path_ + "/" + key; }

 private:
  std::string Root() const { return path_.empty() ? "/" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::string> StringArray(const json& arr, const std::string& path) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw SchemaError(path + "/" + std::to_string(i), "expected string");
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

void CheckSchemaVersion(StrictObject& obj) {
  if (const json* v = obj.Optional("schema_version")) {
    if (!v->is_number_integer()) {
      throw SchemaError(obj.Path("schema_version"), "expected integer");
    }
    if (v->get<std::int64_t>() != kSchemaVersion) {
      throw SchemaError(obj.Path("schema_version"),
                        "unsupported version " + v->dump());
    }
  }
}

template <typename Enum, std::size_t N>
Enum ParseEnum(const std::string& value, const std::string& path,
               const std::pair<std::string_view, Enum> (&table)[N]) {
  for (const auto& [name, e] : table) {
    if (value == name) return e;
  }
  throw SchemaError(path, "unknown value '" + value + "'");
}

constexpr std::pair<std::string_view, TaskType> kTaskTypes[] = {
    {"TextClassification", TaskType::kTextClassification},
    {"TargetSpecific", TaskType::kTargetSpecific},
};
constexpr std::pair<std::string_view, AggregationKind> kAggregationKinds[] = {
    {"MajorityVoting", AggregationKind::kMajorityVoting},
    {"NearestNeighbor", AggregationKind::kNearestNeighbor},
    {"WindowAnalysis", AggregationKind::kWindowAnalysis},
};
// "forward" is accepted on import: the worked stance example uses it for cue
// spans that precede the target.
constexpr std::pair<std::string_view, SearchDirection> kDirections[] = {
    {"preceding", SearchDirection::kPreceding},
    {"following", SearchDirection::kFollowing},
    {"either", SearchDirection::kEither},
    {"forward", SearchDirection::kPreceding},
};
constexpr std::pair<std::string_view, SpanProvenance> kProvenances[] = {
    {"user", SpanProvenance::kUser},
    {"llm-suggested", SpanProvenance::kLlmSuggested},
    {"llm-accepted", SpanProvenance::kLlmAccepted},
};

void Add(ValidationReport& report, std::string code, std::string path,
         std::string message) {
  report.violations.push_back(
      {std::move(code), std::move(path), std::move(message)});
}

}  // namespace

int TaskDefinition::CategoryIndex(std::string_view label) const {
  for (std::size_t i = 0; i < label_categories.size(); ++i) {
    if (label_categories[i] == label) return static_cast<int>(i);
  }
  return -1;
}

const TargetSpec* TaskDefinition::FindTarget(std::string_view name) const {
  for (const TargetSpec& t : targets) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

bool SpanSet::Contains(std::string_view phrase) const {
  const auto norms = NormTokens(phrase);
  return std::any_of(spans.begin(), spans.end(), [&](const Span& s) {
    return NormTokens(s.phrase) == norms;
  });
}

bool ValidationReport::Has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

std::string_view ToString(TaskType type) {
  return type == TaskType::kTargetSpecific ? "TargetSpecific"
                                           : "TextClassification";
}

std::string_view ToString(AggregationKind kind) {
  for (const auto& [name, k] : kAggregationKinds) {
    if (k == kind) return name;
  }
  return "MajorityVoting";
}

std::string_view ToString(SearchDirection direction) {
  for (const auto& [name, d] : kDirections) {
    if (d == direction) return name;
  }
  return "preceding";
}

std::string_view ToString(SpanProvenance provenance) {
  for (const auto& [name, p] : kProvenances) {
    if (p == provenance) return name;
  }
  return "user";
}

TargetSpec MakeTargetSpec(std::string name, std::vector<std::string> aliases) {
  aliases.insert(aliases.begin(), name);
  TargetSpec spec{std::move(name), {}};
  std::set<std::string> seen;
  for (std::string& alias : aliases) {
    if (seen.insert(FoldCase(alias)).second) {
      spec.aliases.push_back(std::move(alias));
    }
  }
  return spec;
}

ValidationReport ValidateTask(const TaskDefinition& task) {
  ValidationReport report;
  if (task.label_categories.empty()) {
    Add(report, "EmptyCategories", "/label_categories",
        "at least one label category is required");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < task.label_categories.size(); ++i) {
    const std::string& c = task.label_categories[i];
    const std::string path = "/label_categories/" + std::to_string(i);
    if (c.empty()) Add(report, "EmptyCategory", path, "empty category");
    if (c == kAbstain) {
      Add(report, "ReservedCategory", path,
          "'" + std::string(kAbstain) + "' is reserved");
    }
    if (!seen.insert(c).second) {
      Add(report, "DuplicateCategory", path, "duplicate category '" + c + "'");
    }
  }
  if (task.type == TaskType::kTextClassification && !task.targets.empty()) {
    Add(report, "UnexpectedTargets", "/targets",
        "text classification tasks have no targets");
  }
  if (task.type == TaskType::kTargetSpecific && task.targets.empty()) {
    Add(report, "MissingTargets", "/targets",
        "target-specific tasks need at least one target");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < task.targets.size(); ++i) {
    const TargetSpec& t = task.targets[i];
    const std::string path = "/targets/" + std::to_string(i);
    if (t.name.empty()) Add(report, "EmptyTarget", path + "/name", "empty");
    if (!names.insert(t.name).second) {
      Add(report, "DuplicateTarget", path + "/name", "duplicate target");
    }
    if (t.aliases.empty()) {
      Add(report, "EmptyAliases", path + "/aliases", "no aliases");
    }
    std::set<std::string> folded;
    for (std::size_t a = 0; a < t.aliases.size(); ++a) {
      const std::string alias_path = path + "/aliases/" + std::to_string(a);
      if (NormTokens(t.aliases[a]).empty()) {
        Add(report, "EmptyAlias", alias_path, "alias has no tokens");
      }
      if (!folded.insert(FoldCase(t.aliases[a])).second) {
        Add(report, "DuplicateAlias", alias_path, "duplicate alias");
      }
    }
  }
  return report;
}

ValidationReport ValidateSpanSet(const SpanSet& span_set) {
  ValidationReport report;
  if (span_set.name.empty()) Add(report, "EmptyName", "/name", "empty name");
  std::set<std::vector<std::string>> seen;
  for (std::size_t i = 0; i < span_set.spans.size(); ++i) {
    const std::string path = "/spans/" + std::to_string(i);
    auto norms = NormTokens(span_set.spans[i].phrase);
    if (norms.empty()) {
      Add(report, "EmptySpan", path, "span has no tokens");
    } else if (!seen.insert(std::move(norms)).second) {
      Add(report, "DuplicateSpan", path,
          "duplicate span '" + span_set.spans[i].phrase + "'");
    }
  }
  return report;
}

ValidationReport ValidateLf(const LabelingFunction& lf,
                            const std::vector<SpanSet>& project_span_sets,
                            const TaskDefinition& task) {
  ValidationReport report;
  if (lf.id.empty()) Add(report, "EmptyId", "/id", "empty id");

  std::set<std::string> declared;
  for (std::size_t i = 0; i < lf.span_set_names.size(); ++i) {
    const std::string& name = lf.span_set_names[i];
    const std::string path = "/span_sets/" + std::to_string(i);
    if (!declared.insert(name).second) {
      Add(report, "DuplicateSpanSet", path, "listed twice: '" + name + "'");
    }
    const bool exists = std::any_of(
        project_span_sets.begin(), project_span_sets.end(),
        [&](const SpanSet& s) { return s.name == name; });
    if (!exists) {
      Add(report, "UnknownSpanSet", path, "no span set named '" + name + "'");
    }
  }

  if (lf.rules.empty()) Add(report, "NoRules", "/rules", "an LF needs at least one rule");
  std::set<std::int64_t> indices;
  for (std::size_t r = 0; r < lf.rules.size(); ++r) {
    const Rule& rule = lf.rules[r];
    const std::string path = "/rules/" + std::to_string(r);
    if (rule.sequence.empty()) {
      Add(report, "EmptySequence", path + "/sequence",
          "a rule needs at least one span set");
    }
    for (std::size_t k = 0; k < rule.sequence.size(); ++k) {
      if (!declared.count(rule.sequence[k])) {
        Add(report, "UnknownSpanSet", path + "/sequence/" + std::to_string(k),
            "span set '" + rule.sequence[k] + "' is not listed by the LF");
      }
    }
    if (task.CategoryIndex(rule.label) < 0) {
      Add(report, "UnknownCategory", path + "/label",
          "'" + rule.label + "' is not a label category");
    }
    if (rule.creation_index < 0) {
      Add(report, "InvalidCreationIndex", path + "/creation_index",
          "must be non-negative");
    }
    if (!indices.insert(rule.creation_index).second) {
      Add(report, "DuplicateCreationIndex", path + "/creation_index",
          "creation_index " + std::to_string(rule.creation_index) +
              " used twice");
    }
  }

  const AggregationMethod& agg = lf.aggregation;
  const bool text_method = agg.kind == AggregationKind::kMajorityVoting;
  if (text_method == task.is_target_specific()) {
    Add(report, "IncompatibleAggregation", "/aggregation/kind",
        std::string(ToString(agg.kind)) + " cannot be used for " +
            std::string(ToString(task.type)) + " tasks");
  }
  if (agg.kind == AggregationKind::kWindowAnalysis && agg.window_size < 1) {
    Add(report, "InvalidWindowSize", "/aggregation/window_size",
        "window size must be positive");
  }
  return report;
}

bool HigherPriority(const Rule& a, const Rule& b) {
  if (a.sequence.size() != b.sequence.size()) {
    return a.sequence.size() > b.sequence.size();
  }
  return a.creation_index > b.creation_index;
}

std::vector<Rule> RulesByPriority(std::vector<Rule> rules) {
  std::stable_sort(rules.begin(), rules.end(), HigherPriority);
  return rules;
}

std::int64_t NextCreationIndex(const LabelingFunction& lf) {
  std::int64_t next = 0;
  for (const Rule& r : lf.rules) next = std::max(next, r.creation_index + 1);
  return next;
}

json TaskToJson(const TaskDefinition& task) {
  json targets = json::array();
  for (const TargetSpec& t : task.targets) {
    targets.push_back({{"name", t.name}, {"aliases", t.aliases}});
  }
  return {{"type", ToString(task.type)},
          {"targets", std::move(targets)},
          {"label_categories", task.label_categories}};
}

TaskDefinition TaskFromJson(const json& j, const std::string& path) {
  StrictObject obj(j, path);
  CheckSchemaVersion(obj);
  TaskDefinition task;
  task.type = ParseEnum(obj.String("type"), obj.Path("type"), kTaskTypes);
  if (const json* targets = obj.Optional("targets")) {
    if (!targets->is_array()) {
      throw SchemaError(obj.Path("targets"), "expected array");
    }
    for (std::size_t i = 0; i < targets->size(); ++i) {
      const std::string tpath = obj.Path("targets") + "/" + std::to_string(i);
      const json& t = (*targets)[i];
      if (t.is_string()) {
        task.targets.push_back(MakeTargetSpec(t.get<std::string>(), {}));
        continue;
      }
      StrictObject target(t, tpath);
      std::string name = target.String("name");
      std::vector<std::string> aliases;
      if (const json* a = target.Optional("aliases")) {
        if (!a->is_array()) throw SchemaError(tpath + "/aliases", "expected array");
        aliases = StringArray(*a, tpath + "/aliases");
      }
      target.Finish();
      task.targets.push_back(MakeTargetSpec(std::move(name), std::move(aliases)));
    }
  }
  task.label_categories = StringArray(obj.Array("label_categories", 1),
                                      obj.Path("label_categories"));
  obj.Finish();
  return task;
}

json SpanSetToJson(const SpanSet& span_set) {
  json spans = json::array();
  for (const Span& s : span_set.spans) {
    spans.push_back(
        {{"phrase", s.phrase}, {"provenance", ToString(s.provenance)}});
  }
  return {{"name", span_set.name}, {"spans", std::move(spans)}};
}

SpanSet SpanSetFromJson(const json& j, const std::string& path) {
  StrictObject obj(j, path);
  CheckSchemaVersion(obj);
  SpanSet set;
  set.name = obj.String("name");
  const json& spans = obj.Array("spans", 0);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const std::string spath = obj.Path("spans") + "/" + std::to_string(i);
    if (spans[i].is_string()) {
      set.spans.push_back({spans[i].get<std::string>(), SpanProvenance::kUser});
      continue;
    }
    StrictObject span(spans[i], spath);
    Span s;
    s.phrase = span.String("phrase");
    if (const json* p = span.Optional("provenance")) {
      if (!p->is_string()) throw SchemaError(spath + "/provenance", "expected string");
      s.provenance = ParseEnum(p->get<std::string>(), spath + "/provenance",
                               kProvenances);
    }
    span.Finish();
    set.spans.push_back(std::move(s));
  }
  obj.Finish();
  return set;
}

json LfToJson(const LabelingFunction& lf) {
  json rules = json::array();
  for (const Rule& r : lf.rules) {
    rules.push_back({{"sequence", r.sequence},
                     {"label", r.label},
                     {"creation_index", r.creation_index}});
  }
  json agg = {{"kind", ToString(lf.aggregation.kind)}};
  switch (lf.aggregation.kind) {
    case AggregationKind::kNearestNeighbor:
      agg["direction"] = ToString(lf.aggregation.direction);
      break;
    case AggregationKind::kWindowAnalysis:
      agg["window_size"] = lf.aggregation.window_size;
      break;
    case AggregationKind::kMajorityVoting:
      break;
  }
  return {{"schema_version", kSchemaVersion},
          {"id", lf.id},
          {"name", lf.name},
          {"span_sets", lf.span_set_names},
          {"rules", std::move(rules)},
          {"aggregation", std::move(agg)}};
}

LabelingFunction LfFromJson(const json& j, const std::string& path) {
  StrictObject obj(j, path);
  CheckSchemaVersion(obj);
  LabelingFunction lf;
  lf.id = obj.String("id");
  lf.name = obj.String("name");
  lf.span_set_names =
      StringArray(obj.Array("span_sets", 0), obj.Path("span_sets"));

  const json& rules = obj.Array("rules", 0);
  std::int64_t implicit_index = 0;
  std::vector<bool> explicit_index;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string rpath = obj.Path("rules") + "/" + std::to_string(i);
    StrictObject rule(rules[i], rpath);
    Rule r;
    r.sequence = StringArray(rule.Array("sequence", 1), rpath + "/sequence");
    r.label = rule.String("label");
    if (const json* idx = rule.Optional("creation_index")) {
      if (!idx->is_number_integer()) {
        throw SchemaError(rpath + "/creation_index", "expected integer");
      }
      r.creation_index = idx->get<std::int64_t>();
      implicit_index = std::max(implicit_index, r.creation_index + 1);
      explicit_index.push_back(true);
    } else {
      explicit_index.push_back(false);
    }
    rule.Finish();
    lf.rules.push_back(std::move(r));
  }
  // Rules without an explicit creation_index are numbered in listing order
  // after every explicit one.
  for (std::size_t i = 0; i < lf.rules.size(); ++i) {
    if (!explicit_index[i]) lf.rules[i].creation_index = implicit_index++;
  }

  StrictObject agg(obj.Required("aggregation"), obj.Path("aggregation"));
  lf.aggregation.kind = ParseEnum(agg.String("kind"), agg.Path("kind"),
                                  kAggregationKinds);
  const json* direction = agg.Optional("direction");
  const json* window = agg.Optional("window_size");
  if (direction != nullptr) {
    if (lf.aggregation.kind != AggregationKind::kNearestNeighbor) {
      throw SchemaError(agg.Path("direction"),
                        "only valid for NearestNeighbor");
    }
    if (!direction->is_string()) {
      throw SchemaError(agg.Path("direction"), "expected string");
    }
    lf.aggregation.direction = ParseEnum(direction->get<std::string>(),
                                         agg.Path("direction"), kDirections);
  }
  if (window != nullptr) {
    if (lf.aggregation.kind != AggregationKind::kWindowAnalysis) {
      throw SchemaError(agg.Path("window_size"),
                        "only valid for WindowAnalysis");
    }
    if (!window->is_number_integer()) {
      throw SchemaError(agg.Path("window_size"), "expected integer");
    }
    const auto n = window->get<std::int64_t>();
    if (n < 1 || n > 1'000'000) {
      throw SchemaError(agg.Path("window_size"), "must be in [1, 1000000]");
    }
    lf.aggregation.window_size = static_cast<int>(n);
  } else if (lf.aggregation.kind == AggregationKind::kWindowAnalysis) {
    throw SchemaError(agg.Path("window_size"), "required");
  }
  agg.Finish();
  obj.Finish();
  return lf;
}

std::string SerializeLf(const LabelingFunction& lf) {
  return LfToJson(lf).dump();
}

LabelingFunction ParseLf(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
  return LfFromJson(j);
}

json BundleToJson(const LfBundle& bundle) {
  json out = {{"schema_version", kSchemaVersion}};
  if (bundle.task) out["task"] = TaskToJson(*bundle.task);
  out["span_sets"] = json::array();
  for (const SpanSet& s : bundle.span_sets) {
    out["span_sets"].push_back(SpanSetToJson(s));
  }
  out["labeling_functions"] = json::array();
  for (const LabelingFunction& lf : bundle.lfs) {
    out["labeling_functions"].push_back(LfToJson(lf));
  }
  return out;
}

LfBundle BundleFromJson(const json& j) {
  StrictObject obj(j, "");
  CheckSchemaVersion(obj);
  LfBundle bundle;
  if (const json* task = obj.Optional("task")) {
    bundle.task = TaskFromJson(*task, "/task");
  }
  if (const json* sets = obj.Optional("span_sets")) {
    if (!sets->is_array()) throw SchemaError("/span_sets", "expected array");
    for (std::size_t i = 0; i < sets->size(); ++i) {
      bundle.span_sets.push_back(
          SpanSetFromJson((*sets)[i], "/span_sets/" + std::to_string(i)));
    }
  }
  if (const json* lfs = obj.Optional("labeling_functions")) {
    if (!lfs->is_array()) {
      throw SchemaError("/labeling_functions", "expected array");
    }
    for (std::size_t i = 0; i < lfs->size(); ++i) {
      bundle.lfs.push_back(
          LfFromJson((*lfs)[i], "/labeling_functions/" + std::to_string(i)));
    }
  }
  obj.Finish();
  return bundle;
}

const json& LfJsonSchema() {
  static const json schema = json::parse(R"({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "LabelingFunction",
  "type": "object",
  "additionalProperties": false,
  "required": ["id", "name", "span_sets", "rules", "aggregation"],
  "properties": {
    "schema_version": {"const": 1},
    "id": {"type": "string", "minLength": 1},
    "name": {"type": "string"},
    "span_sets": {"type": "array", "items": {"type": "string"}},
    "rules": {
      "type": "array",
      "minItems": 1,
      "items": {
        "type": "object",
        "additionalProperties": false,
        "required": ["sequence", "label"],
        "properties": {
          "sequence": {"type": "array", "minItems": 1, "items": {"type": "string"}},
          "label": {"type": "string"},
          "creation_index": {"type": "integer", "minimum": 0}
        }
      }
    },
    "aggregation": {
      "type": "object",
      "additionalProperties": false,
      "required": ["kind"],
      "properties": {
        "kind": {"enum": ["MajorityVoting", "NearestNeighbor", "WindowAnalysis"]},
        "direction": {"enum": ["preceding", "following", "either"]},
        "window_size": {"type": "integer", "minimum": 1}
      }
    }
  }
})");
  return schema;
}

}  // namespace spanlab
