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

#include "spanlab/corpus.h"

#include <random>

#include <gtest/gtest.h>

#include "support/fixtures.h"
#include "support/oracles.h"

namespace spanlab {
namespace {

TEST(TokenizeTest, StanceSentence) {
  const auto tokens = Tokenize(testing::kStanceSentence);
  ASSERT_EQ(tokens.size(), 9u);
  EXPECT_EQ(tokens.front().surface, "I");
  EXPECT_EQ(tokens[5].surface, "Smith");
  EXPECT_EQ(tokens.back().surface, ".");
  EXPECT_EQ(tokens[5].norm, "smith");
}

TEST(TokenizeTest, ByteOffsetsAcrossMultibyteText) {
  const std::string text = "h\xc3\xa9llo w\xc3\xb6rld!";
  const auto tokens = Tokenize(text);
  ASSERT_EQ(tokens.size(), 3u);
  EXPECT_EQ(tokens[0].start, 0u);
  EXPECT_EQ(tokens[0].end, 6u);
  EXPECT_EQ(tokens[1].start, 7u);
  EXPECT_EQ(tokens[1].surface, "w\xc3\xb6rld");
  EXPECT_EQ(tokens[2].surface, "!");
}

TEST(TokenizeTest, EmptyAndWhitespace) {
  EXPECT_TRUE(Tokenize("").empty());
  EXPECT_TRUE(Tokenize(" \t\n ").empty());
}

// Random byte strings, including invalid UTF-8.
TEST(TokenizeTest, PropertyTokensAreOrderedSubstrings) {
  std::mt19937_64 rng(11);
  const std::string alphabet[] = {"a", "B", "7", " ", "\t", ",", ".", "'", "\xc3\xa9",
                                  "\xce\x91", "\xff", "\xe2\x80\x94", "\n", "-"};
  for (int t = 0; t < 2000; ++t) {
    std::string text;
    const std::size_t len = rng() % 24;
    for (std::size_t i = 0; i < len; ++i) text += alphabet[rng() % std::size(alphabet)];
    const auto tokens = Tokenize(text);
    std::size_t prev_end = 0;
    for (const Token& tok : tokens) {
      ASSERT_LE(prev_end, tok.start) << text;
      ASSERT_LT(tok.start, tok.end) << text;
      ASSERT_LE(tok.end, text.size()) << text;
      ASSERT_EQ(tok.surface, text.substr(tok.start, tok.end - tok.start));
      ASSERT_EQ(tok.surface.find_first_of(" \t\n"), std::string::npos);
      prev_end = tok.end;
    }
    // Every non-whitespace byte belongs to some token.
    std::size_t covered = 0;
    for (const Token& tok : tokens) covered += tok.end - tok.start;
    std::size_t non_space = 0;
    for (char c : text) non_space += (c != ' ' && c != '\t' && c != '\n');
    ASSERT_EQ(covered, non_space) << text;
  }
}

TEST(FoldCaseTest, Scripts) {
  EXPECT_EQ(FoldCase("SMITH"), "smith");
  EXPECT_EQ(FoldCase("\xc3\x80\xc3\x89"), "\xc3\xa0\xc3\xa9");  // ÀÉ
  EXPECT_EQ(FoldCase("\xce\x91\xce\x92"), "\xce\xb1\xce\xb2");  // ΑΒ
  EXPECT_EQ(FoldCase("\xd0\x9f\xd0\xa0"), "\xd0\xbf\xd1\x80");  // ПР
  EXPECT_EQ(FoldCase("already lower 123"), "already lower 123");
}

TEST(TargetTest, SingleOccurrence) {
  const Document doc = MakeDocument("d1", testing::kStanceSentence);
  const auto occ = FindTargetOccurrences(doc, "Smith", {"Smith"});
  ASSERT_EQ(occ.size(), 1u);
  EXPECT_EQ(occ[0].token_range, (TokenRange{5, 5}));
  EXPECT_EQ(occ[0].alias_matched, "Smith");
}

TEST(TargetTest, LongestAliasWins) {
  const Document doc = MakeDocument("d1", "President Smith spoke");
  const auto occ = FindTargetOccurrences(doc, "Smith", {"Smith", "President Smith"});
  ASSERT_EQ(occ.size(), 1u);
  EXPECT_EQ(occ[0].token_range, (TokenRange{0, 1}));
}

TEST(TargetTest, CaseInsensitiveAndTokenAligned) {
  const Document doc = MakeDocument("d1", "smith met SMITHSON and Smith.");
  const auto occ = FindTargetOccurrences(doc, "Smith", {"Smith"});
  ASSERT_EQ(occ.size(), 2u);
  EXPECT_EQ(occ[0].token_range.first, 0u);
  EXPECT_EQ(occ[1].token_range.first, 4u);
}

// Brute force: every alias match position, then greedy selection by
// (length desc, start asc) without overlaps.
TEST(TargetTest, PropertyMatchesBruteForce) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> words = {"a", "b", "c"};
  for (int t = 0; t < 500; ++t) {
    std::string text;
    const std::size_t n = rng() % 10;
    for (std::size_t i = 0; i < n; ++i) text += (i ? " " : "") + words[rng() % 3];
    std::vector<std::string> aliases;
    const std::size_t n_alias = 1 + rng() % 3;
    for (std::size_t a = 0; a < n_alias; ++a) {
      std::string alias;
      const std::size_t len = 1 + rng() % 2;
      for (std::size_t i = 0; i < len; ++i) alias += (i ? " " : "") + words[rng() % 3];
      aliases.push_back(alias);
    }
    const Document doc = MakeDocument("d", text);
    struct Match {
      std::size_t first, last;
    };
    std::vector<Match> all;
    for (const std::string& alias : aliases) {
      const auto norms = NormTokens(alias);
      for (std::size_t s = 0; s + norms.size() <= doc.tokens.size(); ++s) {
        bool ok = true;
        for (std::size_t k = 0; k < norms.size(); ++k) ok &= doc.tokens[s + k].norm == norms[k];
        if (ok) all.push_back({s, s + norms.size() - 1});
      }
    }
    std::sort(all.begin(), all.end(), [](const Match& x, const Match& y) {
      if (x.last - x.first != y.last - y.first) return x.last - x.first > y.last - y.first;
      return x.first < y.first;
    });
    std::vector<Match> chosen;
    for (const Match& m : all) {
      bool free = true;
      for (const Match& c : chosen) free &= m.last < c.first || c.last < m.first;
      if (free) chosen.push_back(m);
    }
    std::sort(chosen.begin(), chosen.end(),
              [](const Match& x, const Match& y) { return x.first < y.first; });
    const auto occ = FindTargetOccurrences(doc, "T", aliases);
    ASSERT_EQ(occ.size(), chosen.size()) << text;
    for (std::size_t i = 0; i < occ.size(); ++i) {
      EXPECT_EQ(occ[i].token_range.first, chosen[i].first) << text;
      EXPECT_EQ(occ[i].token_range.last, chosen[i].last) << text;
    }
  }
}

TEST(DatasetTest, JsonlWithGold) {
  const Corpus c = ParseJsonlDataset(
      "{\"id\":\"a\",\"text\":\"I trust Smith\",\"gold\":{\"Smith\":\"Favor\"}}\n"
      "\n"
      "{\"id\":\"b\",\"text\":\"plain\",\"gold\":\"Pos\"}\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.GoldFor(InstanceKey{"a", "Smith"}), "Favor");
  EXPECT_EQ(c.GoldFor(InstanceKey{"b", std::nullopt}), "Pos");
  EXPECT_FALSE(c.GoldFor(InstanceKey{"a", std::nullopt}).has_value());
  ASSERT_NE(c.Find("b"), nullptr);
  EXPECT_EQ(c.Find("b")->text, "plain");
}

TEST(DatasetTest, CsvWithQuotes) {
  const Corpus c = ParseCsvDataset("id,text,gold\nx,\"hello, \"\"world\"\"\",Pos\ny,bye,\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.documents()[0].text, "hello, \"world\"");
  EXPECT_EQ(c.GoldFor(InstanceKey{"x", std::nullopt}), "Pos");
  EXPECT_FALSE(c.GoldFor(InstanceKey{"y", std::nullopt}).has_value());
}

TEST(DatasetTest, Errors) {
  EXPECT_THROW(ParseJsonlDataset("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n"),
               DuplicateIdError);
  EXPECT_THROW(ParseJsonlDataset("{\"id\":\"a\"}\n"), MissingFieldError);
  EXPECT_THROW(ParseJsonlDataset("{not json\n"), ParseError);
  EXPECT_THROW(ParseJsonlDataset("{\"id\":\"a\",\"text\":\"x\",\"gold\":1e999999}\n"), Error);
  EXPECT_THROW(ParseCsvDataset("id,body\nx,y\n"), MissingFieldError);
  EXPECT_THROW(ParseCsvDataset(""), ParseError);
}

TEST(DatasetTest, PropertySerializeRoundTrip) {
  std::mt19937_64 rng(5);
  const std::string pieces[] = {"a", " ", ",", "\"", "\n", "\xc3\xa9", "x y", "\\"};
  for (int t = 0; t < 200; ++t) {
    std::vector<Document> docs;
    std::vector<GoldLabel> gold;
    const std::size_t n = 1 + rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
      std::string text = "t";
      const std::size_t len = rng() % 10;
      for (std::size_t k = 0; k < len; ++k) text += pieces[rng() % std::size(pieces)];
      const std::string id = "d" + std::to_string(i);
      docs.push_back(MakeDocument(id, text));
      if (rng() % 2) gold.push_back({InstanceKey{id, std::nullopt}, rng() % 2 ? "Pos" : "Neg"});
    }
    const Corpus c(docs, gold);
    for (DatasetFormat f : {DatasetFormat::kJsonl, DatasetFormat::kCsv}) {
      const std::string bytes = SerializeDataset(c, f);
      const Corpus back =
          f == DatasetFormat::kJsonl ? ParseJsonlDataset(bytes) : ParseCsvDataset(bytes);
      ASSERT_EQ(back, c) << bytes;
    }
  }
}

TEST(DatasetTest, FormatFromPathAndFiles) {
  EXPECT_EQ(DatasetFormatFromPath("x/data.jsonl"), DatasetFormat::kJsonl);
  EXPECT_EQ(DatasetFormatFromPath("data.csv"), DatasetFormat::kCsv);
  testing::TempDir dir("dataset");
  const Corpus c({MakeDocument("a", "one"), MakeDocument("b", "two")}, {});
  SaveDataset(c, dir.path() / "d.jsonl", DatasetFormat::kJsonl);
  EXPECT_EQ(LoadDataset(dir.path() / "d.jsonl"), c);
  EXPECT_THROW(LoadDataset(dir.path() / "missing.jsonl"), Error);
}

TEST(InstanceKeyTest, ParseAndOrder) {
  EXPECT_EQ(InstanceKey::Parse("d1::Smith"), (InstanceKey{"d1", "Smith"}));
  EXPECT_EQ(InstanceKey::Parse("d1"), (InstanceKey{"d1", std::nullopt}));
  EXPECT_EQ((InstanceKey{"d1", "Smith"}).ToString(), "d1::Smith");
  EXPECT_LT((InstanceKey{"a", std::nullopt}), (InstanceKey{"b", std::nullopt}));
}

}  // namespace
}  // namespace spanlab
