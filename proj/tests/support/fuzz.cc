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

#include "support/fuzz.h"

#include <set>

#include "spanlab/engine.h"
#include "spanlab/llm.h"
#include "support/fixtures.h"
#include "support/oracles.h"

namespace spanlab::testing {
namespace {

using nlohmann::json;

const char* const kVocabulary[] = {
    "Favor",        "Against",     "support",       "negation",     "stance",
    "MajorityVoting", "NearestNeighbor", "WindowAnalysis", "preceding", "following",
    "either",       "forward",     "id",            "rules",        "sequence",
    "label",        "aggregation", "kind",          "window_size",  "span_sets",
    "schema_version", "creation_index", "name",     "direction",    "ABSTAIN",
    "",             "lf",          "replaces",      "unknown",      "\xff\xfe"};

std::string RandomString(std::mt19937_64& rng) {
  if (rng() % 3 != 0) return kVocabulary[rng() % std::size(kVocabulary)];
  std::string s;
  const std::size_t len = rng() % 8;
  for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<char>(rng() % 256));
  return s;
}

json* RandomNode(json& root, std::mt19937_64& rng) {
  json* node = &root;
  while ((node->is_object() || node->is_array()) && !node->empty() && rng() % 3 != 0) {
    if (node->is_array()) {
      node = &(*node)[rng() % node->size()];
    } else {
      auto it = node->begin();
      std::advance(it, static_cast<long>(rng() % node->size()));
      node = &it.value();
    }
  }
  return node;
}

LabelingFunction MajorityLf() {
  LabelingFunction lf;
  lf.id = "support_words";
  lf.span_set_names = {"support"};
  lf.rules = {{{"support"}, "Favor", 0}};
  return lf;
}

LabelingFunction WindowLf() {
  LabelingFunction lf = StanceLf();
  lf.id = "window";
  lf.aggregation.kind = AggregationKind::kWindowAnalysis;
  lf.aggregation.window_size = 2;
  return lf;
}

void RecordCrash(FuzzStats& stats, const std::string& what, const std::string& input) {
  if (stats.crashes++ == 0) stats.first_crash = what + " on " + input.substr(0, 200);
}

}  // namespace

json RandomJson(std::mt19937_64& rng, int depth) {
  switch (rng() % (depth > 0 ? 9 : 6)) {
    case 0: return nullptr;
    case 1: return rng() % 2 == 0;
    case 2: {
      static const std::int64_t kInts[] = {0, 1, 2, -1, 7, 1000000, INT64_MAX, INT64_MIN};
      return kInts[rng() % std::size(kInts)];
    }
    case 3: return (Uniform(rng) - 0.5) * 1e6;
    case 4:
    case 5: return RandomString(rng);
    case 6:
    case 7: {
      json a = json::array();
      const std::size_t n = rng() % 4;
      for (std::size_t i = 0; i < n; ++i) a.push_back(RandomJson(rng, depth - 1));
      return a;
    }
    default: {
      json o = json::object();
      const std::size_t n = rng() % 4;
      for (std::size_t i = 0; i < n; ++i) o[RandomString(rng)] = RandomJson(rng, depth - 1);
      return o;
    }
  }
}

void MutateJson(json& j, std::mt19937_64& rng) {
  json* node = RandomNode(j, rng);
  switch (rng() % 6) {
    case 0:  // replace
      *node = RandomJson(rng, 2);
      break;
    case 1:  // delete a member or element
      if (node->is_object() && !node->empty()) {
        auto it = node->begin();
        std::advance(it, static_cast<long>(rng() % node->size()));
        node->erase(it.key());
      } else if (node->is_array() && !node->empty()) {
        node->erase(node->begin() + static_cast<long>(rng() % node->size()));
      } else {
        *node = nullptr;
      }
      break;
    case 2:  // add a member or element
      if (node->is_object()) {
        (*node)[RandomString(rng)] = RandomJson(rng, 1);
      } else if (node->is_array()) {
        node->push_back(node->empty() ? RandomJson(rng, 1) : (*node)[rng() % node->size()]);
      } else {
        *node = json::array({*node});
      }
      break;
    case 3:  // vocabulary string
      *node = kVocabulary[rng() % std::size(kVocabulary)];
      break;
    case 4:  // small integer
      *node = static_cast<int>(rng() % 7) - 2;
      break;
    default:  // empty container
      *node = rng() % 2 ? json::array() : json::object();
      break;
  }
}

std::string MutateText(std::string text, std::mt19937_64& rng) {
  const int edits = 1 + static_cast<int>(rng() % 4);
  for (int e = 0; e < edits && !text.empty(); ++e) {
    const std::size_t pos = rng() % text.size();
    switch (rng() % 4) {
      case 0: text[pos] = static_cast<char>(rng() % 256); break;
      case 1: text.erase(pos, 1 + rng() % 5); break;
      case 2: text.insert(pos, 1, "{}[],:\"\\0e-"[rng() % 11]); break;
      default: text.resize(pos); break;
    }
  }
  return text;
}

bool OracleLfValid(const LabelingFunction& lf, const std::vector<SpanSet>& span_sets,
                   const TaskDefinition& task) {
  if (lf.id.empty() || lf.rules.empty()) return false;
  std::set<std::string> declared;
  for (const std::string& name : lf.span_set_names) {
    if (!declared.insert(name).second) return false;
    bool found = false;
    for (const SpanSet& s : span_sets) found |= s.name == name;
    if (!found) return false;
  }
  std::set<std::int64_t> seen;
  for (const Rule& r : lf.rules) {
    if (r.sequence.empty() || r.creation_index < 0) return false;
    if (!seen.insert(r.creation_index).second) return false;
    for (const std::string& s : r.sequence) {
      if (!declared.count(s)) return false;
    }
    bool known = false;
    for (const std::string& c : task.label_categories) known |= c == r.label;
    if (!known) return false;
  }
  const bool majority = lf.aggregation.kind == AggregationKind::kMajorityVoting;
  if (majority == task.is_target_specific()) return false;
  if (lf.aggregation.kind == AggregationKind::kWindowAnalysis &&
      lf.aggregation.window_size < 1) {
    return false;
  }
  return true;
}

FuzzStats FuzzLfParsers(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const TaskDefinition task = StanceTask();
  const std::vector<SpanSet> span_sets = StanceSpanSets();
  const std::vector<LabelingFunction> existing = {StanceLf()};
  const std::vector<json> seeds = {LfToJson(StanceLf()), LfToJson(MajorityLf()),
                                   LfToJson(WindowLf())};
  const Document doc = MakeDocument("d1", kStanceSentence);
  const auto instances = EnumerateInstances(Corpus({doc}, {}), task);

  FuzzStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    ++stats.inputs;
    json entries = json::array();
    const std::size_t count = 1 + rng() % 3;
    for (std::size_t e = 0; e < count; ++e) {
      json lf = rng() % 10 == 0 ? RandomJson(rng, 3) : seeds[rng() % seeds.size()];
      const int mutations = static_cast<int>(rng() % 4);
      for (int m = 0; m < mutations; ++m) MutateJson(lf, rng);
      if (rng() % 4 == 0) {
        json envelope = {{"lf", lf}};
        if (rng() % 2) envelope["replaces"] = rng() % 2 ? json("stance") : RandomJson(rng, 0);
        entries.push_back(envelope);
      } else {
        entries.push_back(lf);
      }
    }
    json response = {{"labeling_functions", entries}};
    if (rng() % 8 == 0) MutateJson(response, rng);
    std::string raw = response.dump(-1, ' ', false, json::error_handler_t::replace);
    if (rng() % 5 == 0) raw = MutateText(raw, rng);
    if (rng() % 10 == 0) raw = "```json\n" + raw + "\n```";

    // ParseLf on each entry: SchemaError is the only allowed failure.
    for (const json& entry : entries) {
      const json& lf_json = entry.is_object() && entry.contains("lf") ? entry["lf"] : entry;
      std::string text = lf_json.dump(-1, ' ', false, json::error_handler_t::replace);
      if (rng() % 5 == 0) text = MutateText(text, rng);
      try {
        const LabelingFunction lf = ParseLf(text);
        ++stats.parsed_lfs;
        if (ParseLf(SerializeLf(lf)) != lf) RecordCrash(stats, "round trip mismatch", text);
      } catch (const SchemaError&) {
      } catch (const std::exception& ex) {
        RecordCrash(stats, std::string("ParseLf threw ") + ex.what(), text);
      }
    }

    std::vector<LfSuggestion> suggestions;
    try {
      suggestions = ParseLfRecommendation(raw, task, span_sets, existing);
    } catch (const MalformedResponseError&) {
      continue;
    } catch (const std::exception& ex) {
      RecordCrash(stats, std::string("ParseLfRecommendation threw ") + ex.what(), raw);
      continue;
    }
    for (const LfSuggestion& s : suggestions) {
      if (s.status != SuggestionStatus::kPending) continue;
      ++stats.pending;
      bool ok = s.validation.ok();
      try {
        const LabelingFunction lf = ParseLf(s.lf_json);
        ok = ok && OracleLfValid(lf, span_sets, task);
        if (s.replaces) {
          ok = ok && *s.replaces == "stance";
        } else {
          ok = ok && lf.id != "stance";
        }
        if (ok) {
          const LfRunner runner(lf, span_sets, task);
          (void)runner.Label(instances.at(0), doc);
        }
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok && stats.invalid_acceptable++ == 0) stats.first_invalid = s.lf_json;
    }
  }
  return stats;
}

}  // namespace spanlab::testing
