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

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spanlab/internal/utf8.h"

namespace spanlab {
namespace {

using nlohmann::json;

constexpr std::string_view kKeySeparator = "::";

enum class CharClass { kSpace, kWord, kPunct };

bool IsSpace(char32_t c) {
  if (c < 0x80) return c == ' ' || (c >= 0x09 && c <= 0x0d);
  switch (c) {
    case 0x85: case 0xa0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202f: case 0x205f: case 0x3000: case 0xfeff:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200b;
  }
}

bool IsNonAsciiPunct(char32_t c) {
  struct Range { char32_t lo, hi; };
  static constexpr Range kRanges[] = {
      {0x00a1, 0x00bf}, {0x00d7, 0x00d7}, {0x00f7, 0x00f7},
      {0x2010, 0x2027}, {0x2030, 0x205e}, {0x20a0, 0x20cf},
      {0x2190, 0x2bff}, {0x3001, 0x303f}, {0xfe30, 0xfe4f},
      {0xff01, 0xff0f}, {0xff1a, 0xff20}, {0xff3b, 0xff40},
      {0xff5b, 0xff65}, {0x1f000, 0x1faff},
  };
  for (const Range& r : kRanges) {
    if (c >= r.lo && c <= r.hi) return true;
  }
  return false;
}

CharClass Classify(char32_t c, bool valid) {
  if (!valid) return CharClass::kPunct;
  if (IsSpace(c)) return CharClass::kSpace;
  if (c < 0x80) {
    if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
        (c >= 'A' && c <= 'Z')) {
      return CharClass::kWord;
    }
    return CharClass::kPunct;
  }
  return IsNonAsciiPunct(c) ? CharClass::kPunct : CharClass::kWord;
}

char32_t FoldCodePoint(char32_t c) {
  if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
  if (c >= 0xc0 && c <= 0xde && c != 0xd7) return c + 32;
  if (c >= 0x100 && c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
  if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x14a && c <= 0x177) return (c % 2 == 0) ? c + 1 : c;
  if (c == 0x178) return 0xff;
  if (c >= 0x179 && c <= 0x17e) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3a9 && c != 0x3a2) return c + 32;
  if (c == 0x386) return 0x3ac;
  if (c >= 0x388 && c <= 0x38a) return c + 37;
  if (c == 0x38c) return 0x3cc;
  if (c == 0x38e || c == 0x38f) return c + 63;
  if (c >= 0x410 && c <= 0x42f) return c + 32;
  if (c >= 0x400 && c <= 0x40f) return c + 80;
  return c;
}

void AddGold(const json& gold, const std::string& doc_id,
             std::size_t record, std::vector<GoldLabel>& out) {
  if (gold.is_null()) return;
  if (gold.is_string()) {
    out.push_back({InstanceKey{doc_id, std::nullopt}, gold.get<std::string>()});
    return;
  }
  if (gold.is_object()) {
    for (const auto& [target, label] : gold.items()) {
      if (!label.is_string()) {
        throw ParseError(record, "gold label for target '" + target +
                                     "' must be a string");
      }
      out.push_back({InstanceKey{doc_id, target}, label.get<std::string>()});
    }
    return;
  }
  throw ParseError(record, "gold must be a string or an object");
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// RFC 4180 records; quoted fields may span lines. Returns (first line number,
// fields) per record.
std::vector<std::pair<std::size_t, std::vector<std::string>>> SplitCsv(
    std::string_view content) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;
  auto end_record = [&] {
    if (field_started || !fields.empty() || !field.empty()) {
      fields.push_back(std::move(field));
      records.emplace_back(record_line, std::move(fields));
    }
    fields.clear();
    field.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          throw ParseError(line, "unexpected quote inside unquoted field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError(record_line, "unterminated quoted field");
  end_record();
  return records;
}

std::string CsvQuote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string InstanceKey::ToString() const {
  if (!target_name) return doc_id;
  return doc_id + std::string(kKeySeparator) + *target_name;
}

InstanceKey InstanceKey::Parse(std::string_view s) {
  const auto pos = s.find(kKeySeparator);
  if (pos == std::string_view::npos) return {std::string(s), std::nullopt};
  return {std::string(s.substr(0, pos)),
          std::string(s.substr(pos + kKeySeparator.size()))};
}

DatasetFormat DatasetFormatFromPath(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::kCsv
                                    : DatasetFormat::kJsonl;
}

Corpus::Corpus(std::vector<Document> documents, std::vector<GoldLabel> gold)
    : documents_(std::move(documents)), gold_(std::move(gold)) {
  by_id_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (!by_id_.emplace(documents_[i].id, i).second) {
      throw DuplicateIdError(documents_[i].id);
    }
  }
  for (const GoldLabel& g : gold_) gold_by_key_[g.instance_key] = g.label;
}

const Document* Corpus::Find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &documents_[it->second];
}

std::optional<std::string> Corpus::GoldFor(const InstanceKey& key) const {
  auto it = gold_by_key_.find(key);
  if (it == gold_by_key_.end()) return std::nullopt;
  return it->second;
}

std::string FoldCase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  internal::Utf8Reader reader(text);
  while (!reader.done()) {
    const auto cp = reader.Next();
    if (!cp.valid) {
      out.append(text.substr(cp.offset, cp.length));
    } else {
      internal::AppendUtf8(FoldCodePoint(cp.value), out);
    }
  }
  return out;
}

std::vector<Token> Tokenize(std::string_view text) {
  std::vector<Token> tokens;
  internal::Utf8Reader reader(text);
  std::size_t word_start = std::string_view::npos;
  auto flush_word = [&](std::size_t end) {
    if (word_start == std::string_view::npos) return;
    std::string surface(text.substr(word_start, end - word_start));
    std::string norm = FoldCase(surface);
    tokens.push_back({std::move(surface), word_start, end, std::move(norm)});
    word_start = std::string_view::npos;
  };
  while (!reader.done()) {
    const auto cp = reader.Next();
    switch (Classify(cp.value, cp.valid)) {
      case CharClass::kWord:
        if (word_start == std::string_view::npos) word_start = cp.offset;
        break;
      case CharClass::kSpace:
        flush_word(cp.offset);
        break;
      case CharClass::kPunct: {
        flush_word(cp.offset);
        std::string surface(text.substr(cp.offset, cp.length));
        std::string norm = FoldCase(surface);
        tokens.push_back({std::move(surface), cp.offset,
                          cp.offset + cp.length, std::move(norm)});
        break;
      }
    }
  }
  flush_word(text.size());
  return tokens;
}

std::vector<std::string> NormTokens(std::string_view text) {
  std::vector<std::string> norms;
  for (Token& t : Tokenize(text)) norms.push_back(std::move(t.norm));
  return norms;
}

Document MakeDocument(std::string id, std::string text) {
  Document doc{std::move(id), std::move(text), {}};
  doc.tokens = Tokenize(doc.text);
  return doc;
}

Corpus ParseJsonlDataset(std::string_view content) {
  std::vector<Document> docs;
  std::vector<GoldLabel> gold;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = content.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    if (!record.is_object()) throw ParseError(line_no, "expected an object");
    auto id = record.find("id");
    if (id == record.end() || !id->is_string() ||
        id->get_ref<const std::string&>().empty()) {
      throw MissingFieldError("id", line_no);
    }
    auto text = record.find("text");
    if (text == record.end() || !text->is_string() ||
        text->get_ref<const std::string&>().empty()) {
      throw MissingFieldError("text", line_no);
    }
    const std::string doc_id = id->get<std::string>();
    if (auto g = record.find("gold"); g != record.end()) {
      AddGold(*g, doc_id, line_no, gold);
    }
    docs.push_back(MakeDocument(doc_id, text->get<std::string>()));
  }
  return Corpus(std::move(docs), std::move(gold));
}

Corpus ParseCsvDataset(std::string_view content) {
  auto records = SplitCsv(content);
  if (records.empty()) throw ParseError(1, "missing header row");
  const auto& header = records.front().second;
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto id_col = column("id");
  const auto text_col = column("text");
  const auto gold_col = column("gold");
  if (!id_col) throw MissingFieldError("id", 1);
  if (!text_col) throw MissingFieldError("text", 1);

  std::vector<Document> docs;
  std::vector<GoldLabel> gold;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [line, fields] = records[r];
    if (fields.size() != header.size()) {
      throw ParseError(line, "expected " + std::to_string(header.size()) +
                                 " fields, got " +
                                 std::to_string(fields.size()));
    }
    if (fields[*id_col].empty()) throw MissingFieldError("id", line);
    if (fields[*text_col].empty()) throw MissingFieldError("text", line);
    if (gold_col && !fields[*gold_col].empty()) {
      const std::string& g = fields[*gold_col];
      if (g.front() == '{') {
        json parsed;
        try {
          parsed = json::parse(g);
        } catch (const json::exception& e) {
          throw ParseError(line, e.what());
        }
        AddGold(parsed, fields[*id_col], line, gold);
      } else {
        AddGold(json(g), fields[*id_col], line, gold);
      }
    }
    docs.push_back(MakeDocument(fields[*id_col], fields[*text_col]));
  }
  return Corpus(std::move(docs), std::move(gold));
}

Corpus LoadDataset(const std::filesystem::path& path, DatasetFormat format) {
  const std::string content = ReadFile(path);
  return format == DatasetFormat::kCsv ? ParseCsvDataset(content)
                                       : ParseJsonlDataset(content);
}

Corpus LoadDataset(const std::filesystem::path& path) {
  return LoadDataset(path, DatasetFormatFromPath(path));
}

std::string SerializeDataset(const Corpus& corpus, DatasetFormat format) {
  std::map<std::string, json> gold_by_doc;
  for (const GoldLabel& g : corpus.gold()) {
    json& slot = gold_by_doc[g.instance_key.doc_id];
    if (g.instance_key.target_name) {
      slot[*g.instance_key.target_name] = g.label;
    } else {
      slot = g.label;
    }
  }
  std::string out;
  if (format == DatasetFormat::kCsv) {
    const bool with_gold = corpus.has_gold();
    out += with_gold ? "id,text,gold\n" : "id,text\n";
    for (const Document& d : corpus.documents()) {
      out += CsvQuote(d.id) + "," + CsvQuote(d.text);
      if (with_gold) {
        out += ",";
        auto it = gold_by_doc.find(d.id);
        if (it != gold_by_doc.end()) {
          out += CsvQuote(it->second.is_string()
                              ? it->second.get<std::string>()
                              : it->second.dump());
        }
      }
      out += "\n";
    }
    return out;
  }
  for (const Document& d : corpus.documents()) {
    json record = {{"id", d.id}, {"text", d.text}};
    if (auto it = gold_by_doc.find(d.id); it != gold_by_doc.end()) {
      record["gold"] = it->second;
    }
    out += record.dump();
    out += "\n";
  }
  return out;
}

void SaveDataset(const Corpus& corpus, const std::filesystem::path& path,
                 DatasetFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("IoError", "cannot write " + path.string());
  out << SerializeDataset(corpus, format);
  if (!out) throw Error("IoError", "write failed for " + path.string());
}

std::vector<TargetOccurrence> FindTargetOccurrences(
    const Document& doc, const std::string& target_name,
    const std::vector<std::string>& aliases) {
  struct Candidate {
    std::size_t start;
    std::size_t length;
    std::size_t alias;
  };
  std::vector<Candidate> candidates;
  for (std::size_t a = 0; a < aliases.size(); ++a) {
    const auto norms = NormTokens(aliases[a]);
    if (norms.empty() || norms.size() > doc.tokens.size()) continue;
    for (std::size_t s = 0; s + norms.size() <= doc.tokens.size(); ++s) {
      bool match = true;
      for (std::size_t k = 0; k < norms.size() && match; ++k) {
        match = doc.tokens[s + k].norm == norms[k];
      }
      if (match) candidates.push_back({s, norms.size(), a});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) {
                     if (x.length != y.length) return x.length > y.length;
                     return x.start < y.start;
                   });
  std::vector<TargetOccurrence> result;
  std::vector<bool> used(doc.tokens.size(), false);
  for (const Candidate& c : candidates) {
    bool free = true;
    for (std::size_t k = c.start; k < c.start + c.length && free; ++k) {
      free = !used[k];
    }
    if (!free) continue;
    for (std::size_t k = c.start; k < c.start + c.length; ++k) used[k] = true;
    result.push_back({target_name, aliases[c.alias],
                      TokenRange{c.start, c.start + c.length - 1}});
  }
  std::sort(result.begin(), result.end(),
            [](const TargetOccurrence& x, const TargetOccurrence& y) {
              return x.token_range.first < y.token_range.first;
            });
  return result;
}

}  // namespace spanlab
