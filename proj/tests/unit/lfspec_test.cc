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

#include <random>

#include <gtest/gtest.h>

#include "support/fixtures.h"
#include "support/fuzz.h"

namespace spanlab {
namespace {

using nlohmann::json;

TEST(ValidateLfTest, StanceLfIsValid) {
  const ValidationReport r =
      ValidateLf(testing::StanceLf(), testing::StanceSpanSets(), testing::StanceTask());
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.violations.empty());
}

TEST(ValidateLfTest, ReportsEveryProblem) {
  LabelingFunction lf = testing::StanceLf();
  lf.id = "";
  lf.span_set_names.push_back("missing");
  lf.span_set_names.push_back("support");
  lf.rules.push_back({{"undeclared"}, "Neutral", 1});
  lf.rules.push_back({{}, "Favor", -3});
  lf.aggregation.kind = AggregationKind::kMajorityVoting;
  const ValidationReport r = ValidateLf(lf, testing::StanceSpanSets(), testing::StanceTask());
  for (const char* code : {"EmptyId", "UnknownSpanSet", "DuplicateSpanSet", "UnknownCategory",
                           "DuplicateCreationIndex", "EmptySequence", "InvalidCreationIndex",
                           "IncompatibleAggregation"}) {
    EXPECT_TRUE(r.Has(code)) << code;
  }
}

TEST(ValidateLfTest, EmptyRuleListAndWindow) {
  LabelingFunction lf = testing::StanceLf();
  lf.rules.clear();
  EXPECT_TRUE(ValidateLf(lf, testing::StanceSpanSets(), testing::StanceTask()).Has("NoRules"));
  lf = testing::StanceLf();
  lf.aggregation.kind = AggregationKind::kWindowAnalysis;
  lf.aggregation.window_size = 0;
  EXPECT_TRUE(
      ValidateLf(lf, testing::StanceSpanSets(), testing::StanceTask()).Has("InvalidWindowSize"));
}

TEST(ValidateLfTest, TextTaskNeedsMajorityVoting) {
  TaskDefinition task;
  task.label_categories = {"Favor", "Against"};
  LabelingFunction lf = testing::StanceLf();
  EXPECT_TRUE(ValidateLf(lf, testing::StanceSpanSets(), task).Has("IncompatibleAggregation"));
  lf.aggregation = AggregationMethod{};
  EXPECT_TRUE(ValidateLf(lf, testing::StanceSpanSets(), task).ok());
}

TEST(ValidateTaskTest, Problems) {
  TaskDefinition task;
  EXPECT_TRUE(ValidateTask(task).Has("EmptyCategories"));
  task.label_categories = {"A"};
  EXPECT_TRUE(ValidateTask(task).ok());
  task.label_categories = {"A", "A"};
  EXPECT_FALSE(ValidateTask(task).ok());
  task.label_categories = {"A", "ABSTAIN"};
  EXPECT_FALSE(ValidateTask(task).ok());
  task.label_categories = {"A", "B"};
  EXPECT_TRUE(ValidateTask(task).ok());
  task.type = TaskType::kTargetSpecific;
  EXPECT_FALSE(ValidateTask(task).ok());  // no targets
  EXPECT_TRUE(ValidateTask(testing::StanceTask()).ok());
}

TEST(PriorityTest, LongerThenLater) {
  const Rule short_early{{"a"}, "X", 0};
  const Rule short_late{{"b"}, "Y", 5};
  const Rule long_early{{"a", "b"}, "Z", 1};
  EXPECT_TRUE(HigherPriority(long_early, short_late));
  EXPECT_TRUE(HigherPriority(short_late, short_early));
  EXPECT_FALSE(HigherPriority(short_early, short_late));
  const auto ordered = RulesByPriority({short_early, short_late, long_early});
  EXPECT_EQ(ordered[0], long_early);
  EXPECT_EQ(ordered[1], short_late);
  EXPECT_EQ(ordered[2], short_early);
  EXPECT_EQ(NextCreationIndex(testing::StanceLf()), 2);
}

TEST(LfJsonTest, StanceRoundTrip) {
  const LabelingFunction lf = testing::StanceLf();
  const std::string text = SerializeLf(lf);
  EXPECT_EQ(ParseLf(text), lf);
  EXPECT_EQ(SerializeLf(ParseLf(text)), text);
  const json j = json::parse(text);
  EXPECT_EQ(j["aggregation"]["kind"], "NearestNeighbor");
  EXPECT_EQ(j["aggregation"]["direction"], "preceding");
  EXPECT_EQ(j["schema_version"], 1);
}

TEST(LfJsonTest, StrictParsing) {
  json j = LfToJson(testing::StanceLf());
  j["extra"] = 1;
  try {
    LfFromJson(j);
    FAIL() << "unknown field accepted";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/extra");
  }
  j = LfToJson(testing::StanceLf());
  j["rules"][0]["label"] = 3;
  try {
    LfFromJson(j);
    FAIL() << "wrong type accepted";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/rules/0/label");
  }
  j = LfToJson(testing::StanceLf());
  j["schema_version"] = 2;
  EXPECT_THROW(LfFromJson(j), SchemaError);
  j = LfToJson(testing::StanceLf());
  j["aggregation"]["window_size"] = 2;  // not allowed for NearestNeighbor
  EXPECT_THROW(LfFromJson(j), SchemaError);
  EXPECT_THROW(ParseLf("{"), SchemaError);
  EXPECT_THROW(ParseLf("[1e99999]"), SchemaError);
  EXPECT_THROW(ParseLf("[]"), SchemaError);
}

TEST(LfJsonTest, ForwardIsPrecedingAndCreationIndexDefaults) {
  json j = LfToJson(testing::StanceLf());
  j["aggregation"]["direction"] = "forward";
  j["rules"][0].erase("creation_index");
  j["rules"][1].erase("creation_index");
  const LabelingFunction lf = LfFromJson(j);
  EXPECT_EQ(lf.aggregation.direction, SearchDirection::kPreceding);
  EXPECT_EQ(lf.rules[0].creation_index, 0);
  EXPECT_EQ(lf.rules[1].creation_index, 1);
}

LabelingFunction RandomLf(std::mt19937_64& rng) {
  static const char* kNames[] = {"a", "b", "c", "\xc3\xa9t\xc3\xa9", "with space"};
  LabelingFunction lf;
  lf.id = "lf" + std::to_string(rng() % 100);
  lf.name = rng() % 2 ? "" : "name \"quoted\"";
  const std::size_t n_sets = 1 + rng() % 3;
  for (std::size_t i = 0; i < n_sets; ++i) lf.span_set_names.push_back(kNames[i + rng() % 3]);
  const std::size_t n_rules = 1 + rng() % 4;
  for (std::size_t r = 0; r < n_rules; ++r) {
    Rule rule;
    const std::size_t len = 1 + rng() % 3;
    for (std::size_t k = 0; k < len; ++k) {
      rule.sequence.push_back(lf.span_set_names[rng() % lf.span_set_names.size()]);
    }
    rule.label = rng() % 2 ? "Favor" : "Against";
    rule.creation_index = static_cast<std::int64_t>(r * 3 + rng() % 3);
    lf.rules.push_back(rule);
  }
  lf.aggregation.kind = static_cast<AggregationKind>(rng() % 3);
  if (lf.aggregation.kind == AggregationKind::kNearestNeighbor) {
    lf.aggregation.direction = static_cast<SearchDirection>(rng() % 3);
  }
  if (lf.aggregation.kind == AggregationKind::kWindowAnalysis) {
    lf.aggregation.window_size = 1 + static_cast<int>(rng() % 5);
  }
  return lf;
}

TEST(LfJsonTest, PropertyRoundTripIdentity) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 1000; ++t) {
    const LabelingFunction lf = RandomLf(rng);
    ASSERT_EQ(ParseLf(SerializeLf(lf)), lf) << SerializeLf(lf);
    ASSERT_EQ(LfFromJson(LfToJson(lf)), lf);
  }
}

// Whatever the parser accepts validates the same way as the hand-written
// oracle.
TEST(LfJsonTest, PropertyMutatedInputsValidateLikeOracle) {
  std::mt19937_64 rng(22);
  const auto sets = testing::StanceSpanSets();
  const auto task = testing::StanceTask();
  int parsed = 0;
  for (int t = 0; t < 3000; ++t) {
    json j = LfToJson(testing::StanceLf());
    testing::MutateJson(j, rng);
    LabelingFunction lf;
    try {
      lf = LfFromJson(j);
    } catch (const SchemaError&) {
      continue;
    }
    ++parsed;
    ASSERT_EQ(ValidateLf(lf, sets, task).ok(), testing::OracleLfValid(lf, sets, task))
        << j.dump();
  }
  EXPECT_GT(parsed, 300);
}

TEST(SpanSetJsonTest, RoundTripAndContains) {
  SpanSet s = testing::StanceSpanSets()[1];
  s.spans[1].provenance = SpanProvenance::kLlmAccepted;
  EXPECT_EQ(SpanSetFromJson(SpanSetToJson(s)), s);
  EXPECT_TRUE(s.Contains("Agree   WITH"));
  EXPECT_FALSE(s.Contains("agree"));
  EXPECT_TRUE(ValidateSpanSet(s).ok());
  SpanSet bad;
  bad.name = "";
  bad.spans = {{"  ", SpanProvenance::kUser}};
  EXPECT_FALSE(ValidateSpanSet(bad).ok());
}

TEST(TaskJsonTest, RoundTripAndTargetShorthand) {
  const TaskDefinition task = testing::StanceTask();
  EXPECT_EQ(TaskFromJson(TaskToJson(task)), task);
  const TaskDefinition shorthand = TaskFromJson(json::parse(
      R"({"type":"TargetSpecific","targets":["Smith"],"label_categories":["Favor","Against"]})"));
  EXPECT_EQ(shorthand, task);
  EXPECT_THROW(TaskFromJson(json::parse(R"({"type":"Other","label_categories":["a","b"]})")),
               SchemaError);
}

TEST(BundleTest, RoundTrip) {
  LfBundle b;
  b.task = testing::StanceTask();
  b.span_sets = testing::StanceSpanSets();
  b.lfs = {testing::StanceLf()};
  const LfBundle back = BundleFromJson(BundleToJson(b));
  EXPECT_EQ(back.task, b.task);
  EXPECT_EQ(back.span_sets, b.span_sets);
  EXPECT_EQ(back.lfs, b.lfs);
}

TEST(SchemaTest, DescribesLfJson) {
  const json& schema = LfJsonSchema();
  EXPECT_EQ(schema["type"], "object");
  for (const char* key : {"id", "span_sets", "rules", "aggregation"}) {
    EXPECT_TRUE(schema["properties"].contains(key)) << key;
  }
  // Every serialized LF only uses described properties.
  for (const auto& [key, value] : LfToJson(testing::StanceLf()).items()) {
    EXPECT_TRUE(schema["properties"].contains(key)) << key;
  }
}

}  // namespace
}  // namespace spanlab
