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

#include "spanlab/simulation.h"

#include <cstdio>
#include <random>
#include <set>
#include <sstream>

#include "spanlab/corpus.h"

namespace spanlab {
namespace {

using nlohmann::json;

constexpr char kPositive[] = "Positive";
constexpr char kNegative[] = "Negative";

const std::vector<std::string>& PositiveCues() {
  static const std::vector<std::string> cues = {
      "great",      "excellent",  "love",     "wonderful",
      "fantastic",  "superb",     "delightful", "impressive",
      "brilliant",  "enjoyable",  "top notch", "well made"};
  return cues;
}

const std::vector<std::string>& NegativeCues() {
  static const std::vector<std::string> cues = {
      "terrible", "awful",    "hate",     "horrible",
      "disappointing", "poor", "dreadful", "mediocre",
      "useless",  "broken",   "waste of money", "falls apart"};
  return cues;
}

const std::vector<std::string>& Negations() {
  static const std::vector<std::string> words = {"not", "never", "hardly"};
  return words;
}

const std::vector<std::string>& Fillers() {
  static const std::vector<std::string> words = {
      "the",     "product", "arrived", "on",      "a",       "tuesday",
      "and",     "i",       "used",    "it",      "for",     "three",
      "weeks",   "with",    "my",      "family",  "box",     "was",
      "blue",    "price",   "seemed",  "about",   "what",    "expected",
      "store",   "kitchen", "morning", "battery", "screen",  "cable",
      "manual",  "color",   "size",    "weight",  "shipping", "order",
      "friend",  "gift",    "week",    "office",  "update",  "version",
      "model",   "brand",   "package", "delivery", "evening", "daily",
      "handle",  "button",  "setting", "review",  "customer", "service",
      "after",   "before",  "during",  "today",   "again",   "still"};
  return words;
}

std::size_t UniformIndex(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

SpanSet MakeSpanSet(const std::string& name, const std::vector<std::string>& phrases) {
  SpanSet set;
  set.name = name;
  for (const std::string& p : phrases) set.spans.push_back({p, SpanProvenance::kUser});
  return set;
}

Rule MakeRule(std::vector<std::string> seq, const std::string& label, std::int64_t ci) {
  return Rule{std::move(seq), label, ci};
}

void MergeSpanSet(Project& p, const SpanSet& addition, const std::string& source) {
  const SpanSet* existing = p.FindSpanSet(addition.name);
  if (existing == nullptr) {
    PutSpanSet(p, addition, source);
    return;
  }
  SpanSet merged = *existing;
  bool changed = false;
  for (const Span& s : addition.spans) {
    if (merged.Contains(s.phrase)) continue;
    merged.spans.push_back(s);
    changed = true;
  }
  if (changed) PutSpanSet(p, merged, source);
}

std::string SimTimestamp(int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "2000-01-01T%02d:%02d:00Z", iteration / 60,
                iteration % 60);
  return buf;
}

SimulationRow RowFrom(int iteration, const MetricsSnapshot& m) {
  return {iteration, m.accuracy.value_or(0.0), m.coverage, m.conflict_rate,
          m.override_count, m.lf_count};
}

std::vector<std::string> PickReviews(Project& p, const SimulationPolicy& policy,
                                     std::size_t& cursor) {
  std::vector<std::string> picked;
  std::set<std::string> chosen;
  auto want = [&](const std::string& key) {
    return !p.overrides.count(key) && !chosen.count(key);
  };
  if (policy.strategies.empty()) {
    const auto& instances = p.instances();
    while (picked.size() < policy.n_reviews && cursor < instances.size()) {
      const std::string key = instances[cursor++].key.ToString();
      if (want(key)) {
        picked.push_back(key);
        chosen.insert(key);
      }
    }
    return picked;
  }
  for (SamplerStrategy strategy : policy.strategies) {
    if (picked.size() >= policy.n_reviews) break;
    const SamplerReport& report = RunSampler(p, strategy, 1.0);
    for (const std::string& key : report.selected) {
      if (picked.size() >= policy.n_reviews) break;
      if (want(key)) {
        picked.push_back(key);
        chosen.insert(key);
      }
    }
  }
  return picked;
}

}  // namespace

SimulationPolicy SimulationPolicyFromJson(const json& j) {
  if (!j.is_object()) throw SchemaError("", "policy must be an object");
  static const std::set<std::string> kKnown = {
      "iterations", "n_reviews", "strategies", "llm", "lf_growth", "mock_fixtures"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.count(key)) throw SchemaError("/" + key, "unknown field");
  }
  SimulationPolicy policy;
  try {
    if (j.contains("iterations")) policy.iterations = j["iterations"].get<int>();
    if (j.contains("n_reviews")) {
      const auto n = j["n_reviews"].get<std::int64_t>();
      if (n <= 0) throw SchemaError("/n_reviews", "must be positive");
      policy.n_reviews = static_cast<std::size_t>(n);
    }
    if (policy.iterations < 0) throw SchemaError("/iterations", "must be non-negative");
    if (j.contains("strategies")) {
      for (const json& s : j["strategies"]) {
        policy.strategies.push_back(SamplerStrategyFromString(s.get<std::string>()));
      }
    }
    if (j.contains("llm")) {
      const std::string llm = j["llm"].get<std::string>();
      if (llm == "off") {
        policy.llm = SimulatedLlm::kOff;
      } else if (llm == "mock") {
        policy.llm = SimulatedLlm::kMock;
      } else {
        throw SchemaError("/llm", "expected \"off\" or \"mock\"");
      }
    }
    if (j.contains("lf_growth")) {
      for (std::size_t i = 0; i < j["lf_growth"].size(); ++i) {
        const json& g = j["lf_growth"][i];
        const std::string path = "/lf_growth/" + std::to_string(i);
        LfGrowthStep step;
        step.iteration = g.at("iteration").get<int>();
        if (g.contains("span_sets")) {
          for (const json& s : g["span_sets"]) {
            step.span_sets.push_back(SpanSetFromJson(s, path + "/span_sets"));
          }
        }
        if (g.contains("labeling_functions")) {
          for (const json& lf : g["labeling_functions"]) {
            step.lfs.push_back(LfFromJson(lf, path + "/labeling_functions"));
          }
        }
        policy.lf_growth.push_back(std::move(step));
      }
    }
    if (j.contains("mock_fixtures")) {
      for (const auto& [kind, raw] : j["mock_fixtures"].items()) {
        policy.mock_fixtures[PromptKindFromString(kind)] = raw.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError("", std::string("policy: ") + e.what());
  }
  return policy;
}

SimulationResult RunSimulation(Project p, const SimulationPolicy& policy,
                               ChatClient* llm) {
  for (const Instance& inst : p.instances()) {
    if (!p.corpus->GoldFor(inst.key)) throw MissingGoldError();
  }
  if (p.instances().empty()) throw MissingGoldError();
  std::optional<MockChatClient> fixtures;
  if (policy.llm == SimulatedLlm::kMock && llm == nullptr) {
    if (policy.mock_fixtures.empty()) {
      throw Error("InvalidArgument", "mock LLM mode needs fixtures or a responder");
    }
    fixtures.emplace(MockChatClient::FromFixtures(policy.mock_fixtures));
    llm = &*fixtures;
  }

  SimulationResult result;
  AssignLabels(p, "simulation");
  result.rows.push_back(RowFrom(0, Evaluate(p)));
  std::size_t cursor = 0;
  for (int it = 1; it <= policy.iterations; ++it) {
    const std::vector<std::string> reviews = PickReviews(p, policy, cursor);
    for (const std::string& key : reviews) {
      const auto gold = p.corpus->GoldFor(InstanceKey::Parse(key));
      SetLabelOverride(p, key, *gold, OverrideSource::kHuman, SimTimestamp(it),
                       "simulation");
    }
    if (policy.llm == SimulatedLlm::kMock && !reviews.empty()) {
      std::optional<LlmPromptPlan> plan;
      try {
        plan = PlanLlmPrompt(p, PromptKind::kSpanExpansion, reviews);
      } catch (const MissingExamplesError&) {
        // Nothing to expand from until every span set has an example.
      }
      if (plan) {
        const std::string raw = llm->Complete(plan->request);
        try {
          const LlmIngestResult ingest =
              IngestLlmResponse(p, *plan, raw, SimTimestamp(it));
          for (const std::string& id : ingest.suggestion_ids) {
            const Suggestion* s = p.FindSuggestion(id);
            if (s != nullptr && s->status == SuggestionStatus::kPending) {
              AcceptSuggestion(p, id);
            }
          }
        } catch (const MalformedResponseError&) {
          // Audited; the scripted annotator ignores unusable answers.
        }
      }
    }
    for (const LfGrowthStep& step : policy.lf_growth) {
      if (step.iteration != it) continue;
      for (const SpanSet& set : step.span_sets) MergeSpanSet(p, set, "simulation");
      for (const LabelingFunction& lf : step.lfs) PutLf(p, lf, "simulation");
    }
    AssignLabels(p, "simulation");
    result.rows.push_back(RowFrom(it, Evaluate(p)));
  }
  result.project = std::move(p);
  return result;
}

std::string SimulationCsv(const std::vector<SimulationRow>& rows,
                          const std::string& label) {
  std::string out = label.empty() ? "" : "config,";
  out += "iteration,accuracy,coverage,conflict_rate,overrides,lf_count\n";
  char buf[160];
  for (const SimulationRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%zu,%zu\n", r.iteration,
                  r.accuracy, r.coverage, r.conflict_rate, r.overrides, r.lf_count);
    if (!label.empty()) out += label + ",";
    out += buf;
  }
  return out;
}

SyntheticScenario MakeSyntheticScenario(std::size_t n_docs, std::uint64_t seed,
                                        int growth_iterations) {
  constexpr std::size_t kSeedCues = 3;
  SyntheticScenario sc;
  sc.task.type = TaskType::kTextClassification;
  sc.task.label_categories = {kPositive, kNegative};
  sc.lexicon["positive"] = PositiveCues();
  sc.lexicon["negative"] = NegativeCues();
  sc.lexicon["negation"] = Negations();

  std::mt19937_64 rng(seed);
  std::vector<Document> docs;
  std::vector<GoldLabel> gold;
  const auto& fillers = Fillers();
  for (std::size_t d = 0; d < n_docs; ++d) {
    const bool positive = (rng() >> 17) & 1;
    const auto& own = positive ? PositiveCues() : NegativeCues();
    const auto& other = positive ? NegativeCues() : PositiveCues();
    std::vector<std::string> segments;
    if (Uniform01(rng) >= 0.10) {
      const int n_cues = Uniform01(rng) < 0.7 ? 1 : 2;
      for (int c = 0; c < n_cues; ++c) {
        if (Uniform01(rng) < 0.2) {
          segments.push_back(Negations()[UniformIndex(rng, Negations().size())] + " " +
                             other[UniformIndex(rng, other.size())]);
        } else {
          segments.push_back(own[UniformIndex(rng, own.size())]);
        }
      }
    }
    if (Uniform01(rng) < 0.08) segments.push_back(other[UniformIndex(rng, other.size())]);
    std::vector<std::string> words;
    const std::size_t n_fill = 8 + UniformIndex(rng, 7);
    for (std::size_t w = 0; w < n_fill; ++w) {
      words.push_back(fillers[UniformIndex(rng, fillers.size())]);
    }
    for (const std::string& seg : segments) {
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(
                                       UniformIndex(rng, words.size() + 1)),
                   seg);
    }
    std::string text;
    for (const std::string& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    text += '.';
    char id[32];
    std::snprintf(id, sizeof(id), "d%05zu", d);
    docs.push_back(MakeDocument(id, text));
    gold.push_back({InstanceKey{id, std::nullopt}, positive ? kPositive : kNegative});
  }
  sc.corpus = Corpus(std::move(docs), std::move(gold));

  auto head = [](const std::vector<std::string>& v, std::size_t n) {
    return std::vector<std::string>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
  };
  sc.seed_span_sets = {MakeSpanSet("negation", Negations()),
                       MakeSpanSet("positive", head(PositiveCues(), kSeedCues)),
                       MakeSpanSet("negative", head(NegativeCues(), kSeedCues))};

  LabelingFunction polarity;
  polarity.id = "polarity";
  polarity.name = "Polarity with negation";
  polarity.span_set_names = {"negation", "positive", "negative"};
  polarity.rules = {MakeRule({"positive"}, kPositive, 0),
                    MakeRule({"negative"}, kNegative, 1),
                    MakeRule({"negation", "positive"}, kNegative, 2),
                    MakeRule({"negation", "negative"}, kPositive, 3)};
  LabelingFunction pos_only;
  pos_only.id = "positive_words";
  pos_only.name = "Positive words";
  pos_only.span_set_names = {"positive"};
  pos_only.rules = {MakeRule({"positive"}, kPositive, 0)};
  LabelingFunction neg_only;
  neg_only.id = "negative_words";
  neg_only.name = "Negative words";
  neg_only.span_set_names = {"negative"};
  neg_only.rules = {MakeRule({"negative"}, kNegative, 0)};
  sc.seed_lfs = {polarity, pos_only, neg_only};

  for (int it = 1; it <= growth_iterations; ++it) {
    LfGrowthStep step;
    step.iteration = it;
    const std::size_t cue = kSeedCues + static_cast<std::size_t>(it - 1);
    if (cue < PositiveCues().size()) {
      step.span_sets.push_back(MakeSpanSet("positive", {PositiveCues()[cue]}));
      step.span_sets.push_back(MakeSpanSet("negative", {NegativeCues()[cue]}));
    }
    if (it == 2) {
      LabelingFunction flip;
      flip.id = "negation_flip";
      flip.name = "Negated polarity";
      flip.span_set_names = {"negation", "positive", "negative"};
      flip.rules = {MakeRule({"negation", "positive"}, kNegative, 0),
                    MakeRule({"negation", "negative"}, kPositive, 1)};
      step.lfs.push_back(flip);
    }
    sc.growth.push_back(std::move(step));
  }
  return sc;
}

Project ScenarioProject(const SyntheticScenario& sc, ProjectConfig config) {
  Project p = CreateProject(sc.task, sc.corpus, std::move(config));
  for (const SpanSet& s : sc.seed_span_sets) PutSpanSet(p, s, "scenario");
  for (const LabelingFunction& lf : sc.seed_lfs) PutLf(p, lf, "scenario");
  return p;
}

MockChatClient::Responder LexiconResponder(
    std::map<std::string, std::vector<std::string>> lexicon) {
  return [lexicon = std::move(lexicon)](const PromptRequest& request) -> std::string {
    switch (request.kind) {
      case PromptKind::kSampleAnalysis:
        return R"({"recommendations": []})";
      case PromptKind::kLfRecommendation:
        return R"({"labeling_functions": []})";
      case PromptKind::kSpanExpansion:
        break;
    }
    json spans = json::array();
    std::istringstream in(request.rendered_text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] != '[') continue;
      const std::size_t close = line.find("] ");
      if (close == std::string::npos) continue;
      const std::string id = line.substr(1, close - 1);
      std::string text = line.substr(close + 2);
      if (text.rfind("(target: ", 0) == 0) {
        const std::size_t end = text.find(") ");
        if (end != std::string::npos) text = text.substr(end + 2);
      }
      const std::vector<Token> tokens = Tokenize(text);
      for (const auto& [set_name, phrases] : lexicon) {
        for (const std::string& phrase : phrases) {
          const std::vector<std::string> norms = NormTokens(phrase);
          for (std::size_t i = 0; i + norms.size() <= tokens.size(); ++i) {
            bool match = true;
            for (std::size_t k = 0; k < norms.size() && match; ++k) {
              match = tokens[i + k].norm == norms[k];
            }
            if (!match) continue;
            const std::size_t b = tokens[i].start;
            const std::size_t e = tokens[i + norms.size() - 1].end;
            spans.push_back({{"span_set", set_name},
                             {"phrase", text.substr(b, e - b)},
                             {"source_id", id}});
            break;
          }
        }
      }
    }
    return json{{"spans", spans}}.dump();
  };
}

std::string_view ToString(AblationArm arm) {
  switch (arm) {
    case AblationArm::kDp:
      return "dp";
    case AblationArm::kDpAl:
      return "dp_al";
    case AblationArm::kDpAlLlm:
      return "dp_al_llm";
  }
  return "dp";
}

SimulationPolicy AblationPolicy(const SyntheticScenario& sc, AblationArm arm,
                                int iterations, std::size_t n_reviews) {
  SimulationPolicy policy;
  policy.iterations = iterations;
  policy.n_reviews = n_reviews;
  policy.lf_growth = sc.growth;
  if (arm != AblationArm::kDp) {
    policy.strategies = {SamplerStrategy::kAbstain, SamplerStrategy::kVoteEntropy};
  }
  if (arm == AblationArm::kDpAlLlm) policy.llm = SimulatedLlm::kMock;
  return policy;
}

}  // namespace spanlab
