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

#ifndef SPANLAB_CORPUS_H_
#define SPANLAB_CORPUS_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spanlab/error.h"

namespace spanlab {

// A token of a document. Offsets are UTF-8 byte offsets into the document
// text, half-open: [start, end).
struct Token {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string norm;  // case-folded surface

  bool operator==(const Token&) const = default;
};

struct Document {
  std::string id;
  std::string text;
  std::vector<Token> tokens;

  bool operator==(const Document&) const = default;
};

// Inclusive token index pair.
struct TokenRange {
  std::size_t first = 0;
  std::size_t last = 0;

  bool operator==(const TokenRange&) const = default;
  bool Overlaps(const TokenRange& o) const {
    return first <= o.last && o.first <= last;
  }
};

struct TargetOccurrence {
  std::string target_name;
  std::string alias_matched;
  TokenRange token_range;

  bool operator==(const TargetOccurrence&) const = default;
};

// Identifies one labeling unit: a whole document, or a (document, target)
// pair for target-specific tasks.
struct InstanceKey {
  std::string doc_id;
  std::optional<std::string> target_name;

  // "doc" or "doc::target". Used as the external key everywhere (HTTP paths,
  // JSONL exports, CSV).
  std::string ToString() const;
  static InstanceKey Parse(std::string_view s);

  auto operator<=>(const InstanceKey&) const = default;
};

struct GoldLabel {
  InstanceKey instance_key;
  std::string label;

  bool operator==(const GoldLabel&) const = default;
};

enum class DatasetFormat { kJsonl, kCsv };

DatasetFormat DatasetFormatFromPath(const std::filesystem::path& path);

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(const std::string& id)
      : Error("DuplicateId", "duplicate document id '" + id + "'"), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class MissingFieldError : public Error {
 public:
  MissingFieldError(const std::string& field, std::size_t record)
      : Error("MissingField", "record " + std::to_string(record) +
                                  ": missing field '" + field + "'"),
        field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Immutable after construction; safe for concurrent readers.
class Corpus {
 public:
  Corpus() = default;
  // Throws DuplicateIdError.
  Corpus(std::vector<Document> documents, std::vector<GoldLabel> gold);

  const std::vector<Document>& documents() const { return documents_; }
  const std::vector<GoldLabel>& gold() const { return gold_; }
  std::size_t size() const { return documents_.size(); }

  const Document* Find(std::string_view id) const;
  std::optional<std::string> GoldFor(const InstanceKey& key) const;
  bool has_gold() const { return !gold_.empty(); }

  bool operator==(const Corpus& o) const {
    return documents_ == o.documents_ && gold_ == o.gold_;
  }

 private:
  std::vector<Document> documents_;
  std::vector<GoldLabel> gold_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<InstanceKey, std::string> gold_by_key_;
};

// Maximal runs of letters/digits form one token; any other non-whitespace
// code point is a token of its own. Invalid UTF-8 bytes are treated as
// single-byte punctuation tokens.
std::vector<Token> Tokenize(std::string_view text);

// Simple case folding (ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic).
std::string FoldCase(std::string_view text);

// Norms of Tokenize(text), the form used for every phrase comparison.
std::vector<std::string> NormTokens(std::string_view text);

Document MakeDocument(std::string id, std::string text);

Corpus LoadDataset(const std::filesystem::path& path, DatasetFormat format);
Corpus LoadDataset(const std::filesystem::path& path);
Corpus ParseJsonlDataset(std::string_view content);
Corpus ParseCsvDataset(std::string_view content);

std::string SerializeDataset(const Corpus& corpus, DatasetFormat format);
void SaveDataset(const Corpus& corpus, const std::filesystem::path& path,
                 DatasetFormat format);

// All case-insensitive token-sequence matches of any alias. Overlaps are
// resolved longest alias first, then leftmost; result is in text order.
std::vector<TargetOccurrence> FindTargetOccurrences(
    const Document& doc, const std::string& target_name,
    const std::vector<std::string>& aliases);

}  // namespace spanlab

#endif  // SPANLAB_CORPUS_H_
