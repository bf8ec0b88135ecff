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

#include "spanlab/engine.h"

#include <algorithm>
#include <map>
#include <sstream>
#include <thread>

namespace spanlab {

std::vector<Instance> EnumerateInstances(const Corpus& corpus,
                                         const TaskDefinition& task) {
  std::vector<Instance> instances;
  const auto& docs = corpus.documents();
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (!task.is_target_specific()) {
      instances.push_back({InstanceKey{docs[d].id, std::nullopt}, d, {}});
      continue;
    }
    for (const TargetSpec& target : task.targets) {
      auto occurrences =
          FindTargetOccurrences(docs[d], target.name, target.aliases);
      if (occurrences.empty()) continue;
      instances.push_back(
          {InstanceKey{docs[d].id, target.name}, d, std::move(occurrences)});
    }
  }
  return instances;
}

std::string LabelMatrix::LabelAt(std::size_t row, std::size_t col) const {
  const int cell = at(row, col);
  return cell == kAbstainCell ? std::string(kAbstain) : categories[cell];
}

SpanTagger::SpanTagger(const std::vector<const SpanSet*>& span_sets) {
  Build(span_sets);
}

SpanTagger::SpanTagger(const std::vector<SpanSet>& span_sets) {
  std::vector<const SpanSet*> ptrs;
  for (const SpanSet& s : span_sets) ptrs.push_back(&s);
  Build(ptrs);
}

void SpanTagger::Build(const std::vector<const SpanSet*>& span_sets) {
  for (std::size_t i = 0; i < span_sets.size(); ++i) {
    names_.push_back(span_sets[i]->name);
    for (const Span& span : span_sets[i]->spans) {
      auto norms = NormTokens(span.phrase);
      if (norms.empty()) continue;
      std::string first = norms.front();
      by_first_token_[first].push_back({std::move(norms), i});
    }
  }
  for (auto& [first, phrases] : by_first_token_) {
    std::stable_sort(phrases.begin(), phrases.end(),
                     [](const Phrase& a, const Phrase& b) {
                       if (a.norms.size() != b.norms.size()) {
                         return a.norms.size() > b.norms.size();
                       }
                       return a.span_set < b.span_set;
                     });
  }
}

std::vector<TaggedSpan> SpanTagger::Tag(const Document& doc) const {
  std::vector<TaggedSpan> tags;
  const auto& tokens = doc.tokens;
  std::size_t i = 0;
  while (i < tokens.size()) {
    auto it = by_first_token_.find(tokens[i].norm);
    const Phrase* match = nullptr;
    if (it != by_first_token_.end()) {
      for (const Phrase& p : it->second) {
        if (i + p.norms.size() > tokens.size()) continue;
        bool ok = true;
        for (std::size_t k = 1; k < p.norms.size() && ok; ++k) {
          ok = tokens[i + k].norm == p.norms[k];
        }
        if (ok) {
          match = &p;
          break;
        }
      }
    }
    if (match == nullptr) {
      ++i;
      continue;
    }
    const std::size_t last = i + match->norms.size() - 1;
    tags.push_back(
        {names_[match->span_set], TokenRange{i, last},
         doc.text.substr(tokens[i].start, tokens[last].end - tokens[i].start)});
    i = last + 1;
  }
  return tags;
}

std::vector<TaggedSpan> TagSpans(const Document& doc,
                                 const std::vector<SpanSet>& span_sets) {
  return SpanTagger(span_sets).Tag(doc);
}

namespace {

bool RuleMatchesAt(const Rule& rule, const std::vector<TaggedSpan>& tags,
                   std::size_t pos, const EngineOptions& options) {
  const std::size_t k = rule.sequence.size();
  if (k == 0 || pos + k > tags.size()) return false;
  for (std::size_t j = 0; j < k; ++j) {
    if (tags[pos + j].span_set_name != rule.sequence[j]) return false;
    if (j > 0 && options.max_rule_gap) {
      const std::size_t gap = tags[pos + j].token_range.first -
                              tags[pos + j - 1].token_range.last - 1;
      if (gap > *options.max_rule_gap) return false;
    }
  }
  return true;
}

std::string Plurality(const std::vector<const std::string*>& labels,
                      const std::vector<std::string>& categories) {
  std::map<std::string_view, int> counts;
  for (const std::string* l : labels) {
    if (*l != kAbstain) ++counts[*l];
  }
  int best = 0;
  std::string_view winner;
  bool tie = false;
  for (const std::string& c : categories) {
    auto it = counts.find(c);
    if (it == counts.end()) continue;
    if (it->second > best) {
      best = it->second;
      winner = c;
      tie = false;
    } else if (it->second == best) {
      tie = true;
    }
  }
  if (best == 0 || tie) return std::string(kAbstain);
  return std::string(winner);
}

enum class Side { kOverlap = 0, kPreceding = 1, kFollowing = 2 };

Side SideOf(const TokenRange& span, const TokenRange& target) {
  if (span.Overlaps(target)) return Side::kOverlap;
  return span.last < target.first ? Side::kPreceding : Side::kFollowing;
}

}  // namespace

std::vector<LabeledSpan> ApplyRules(const std::vector<TaggedSpan>& tags,
                                    const std::vector<Rule>& rules,
                                    const std::string& lf_id,
                                    const EngineOptions& options) {
  const std::vector<Rule> ordered = RulesByPriority(rules);
  std::vector<LabeledSpan> out;
  std::size_t pos = 0;
  while (pos < tags.size()) {
    const Rule* fired = nullptr;
    for (const Rule& rule : ordered) {
      if (RuleMatchesAt(rule, tags, pos, options)) {
        fired = &rule;
        break;
      }
    }
    if (fired == nullptr) {
      ++pos;
      continue;
    }
    const std::size_t k = fired->sequence.size();
    out.push_back({fired->label,
                   TokenRange{tags[pos].token_range.first,
                              tags[pos + k - 1].token_range.last},
                   RuleRef{lf_id, fired->creation_index}});
    pos += k;
  }
  return out;
}

std::string AggregateText(const std::vector<LabeledSpan>& spans,
                          const std::vector<std::string>& categories) {
  std::vector<const std::string*> labels;
  for (const LabeledSpan& s : spans) labels.push_back(&s.label);
  return Plurality(labels, categories);
}

std::size_t TokenGap(const TokenRange& a, const TokenRange& b) {
  if (a.Overlaps(b)) return 0;
  return a.last < b.first ? b.first - a.last - 1 : a.first - b.last - 1;
}

std::string AggregateTarget(const TargetOccurrence& occurrence,
                            const std::vector<LabeledSpan>& spans,
                            const AggregationMethod& method,
                            const std::vector<std::string>& categories) {
  const TokenRange& target = occurrence.token_range;
  struct Candidate {
    std::size_t gap;
    Side side;
    std::size_t first;
    const std::string* label;
  };
  std::vector<Candidate> candidates;
  for (const LabeledSpan& s : spans) {
    candidates.push_back({TokenGap(s.token_range, target),
                          SideOf(s.token_range, target), s.token_range.first,
                          &s.label});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.gap != b.gap) return a.gap < b.gap;
              if (a.side != b.side) return a.side < b.side;
              return a.first < b.first;
            });

  if (method.kind == AggregationKind::kNearestNeighbor) {
    // Spans overlapping the target are eligible in every direction.
    for (const Candidate& c : candidates) {
      const bool allowed =
          c.side == Side::kOverlap ||
          method.direction == SearchDirection::kEither ||
          (method.direction == SearchDirection::kPreceding &&
           c.side == Side::kPreceding) ||
          (method.direction == SearchDirection::kFollowing &&
           c.side == Side::kFollowing);
      if (allowed) return *c.label;
    }
    return std::string(kAbstain);
  }

  if (method.kind == AggregationKind::kWindowAnalysis) {
    const auto n = static_cast<std::size_t>(std::max(method.window_size, 0));
    std::vector<const std::string*> window;
    std::size_t before = 0;
    std::size_t after = 0;
    for (const Candidate& c : candidates) {
      if (c.side == Side::kOverlap) {
        window.push_back(c.label);
      } else if (c.side == Side::kPreceding && before < n) {
        window.push_back(c.label);
        ++before;
      } else if (c.side == Side::kFollowing && after < n) {
        window.push_back(c.label);
        ++after;
      }
    }
    return Plurality(window, categories);
  }

  std::vector<const std::string*> all;
  for (const LabeledSpan& s : spans) all.push_back(&s.label);
  return Plurality(all, categories);
}

namespace {

std::vector<const SpanSet*> ResolveSpanSets(
    const LabelingFunction& lf, const std::vector<SpanSet>& span_sets) {
  std::vector<const SpanSet*> resolved;
  for (const std::string& name : lf.span_set_names) {
    for (const SpanSet& s : span_sets) {
      if (s.name == name) {
        resolved.push_back(&s);
        break;
      }
    }
  }
  return resolved;
}

}  // namespace

LfRunner::LfRunner(const LabelingFunction& lf,
                   const std::vector<SpanSet>& span_sets,
                   const TaskDefinition& task, EngineOptions options)
    : lf_(lf),
      rules_by_priority_(RulesByPriority(lf.rules)),
      task_(&task),
      tagger_(ResolveSpanSets(lf, span_sets)),
      options_(options) {}

std::vector<LabeledSpan> LfRunner::LabelSpans(const Document& doc) const {
  return ApplyRules(tagger_.Tag(doc), rules_by_priority_, lf_.id, options_);
}

std::string LfRunner::LabelWithSpans(
    const Instance& instance, const std::vector<LabeledSpan>& spans) const {
  const auto& categories = task_->label_categories;
  if (!task_->is_target_specific()) return AggregateText(spans, categories);
  if (instance.occurrences.empty()) return std::string(kAbstain);
  std::vector<std::string> per_occurrence;
  for (const TargetOccurrence& occ : instance.occurrences) {
    per_occurrence.push_back(
        AggregateTarget(occ, spans, lf_.aggregation, categories));
  }
  std::vector<const std::string*> labels;
  for (const std::string& l : per_occurrence) labels.push_back(&l);
  return Plurality(labels, categories);
}

std::string LfRunner::Label(const Instance& instance,
                            const Document& doc) const {
  if (task_->is_target_specific() && instance.occurrences.empty()) {
    return std::string(kAbstain);
  }
  return LabelWithSpans(instance, LabelSpans(doc));
}

void LfRunner::LabelDocument(const Document& doc,
                             const std::vector<const Instance*>& instances,
                             std::vector<std::string>& out) const {
  out.clear();
  const auto spans = LabelSpans(doc);
  for (const Instance* inst : instances) {
    out.push_back(LabelWithSpans(*inst, spans));
  }
}

Vote ApplyLf(const Instance& instance, const Document& doc,
             const LabelingFunction& lf, const std::vector<SpanSet>& span_sets,
             const TaskDefinition& task) {
  LfRunner runner(lf, span_sets, task);
  return {instance.key, lf.id, runner.Label(instance, doc)};
}

LabelMatrix BuildLabelMatrix(const Corpus& corpus, const TaskDefinition& task,
                             const std::vector<LabelingFunction>& lfs,
                             const std::vector<SpanSet>& span_sets,
                             const EngineOptions& options) {
  const std::vector<Instance> instances = EnumerateInstances(corpus, task);
  LabelMatrix matrix;
  matrix.categories = task.label_categories;
  for (const Instance& inst : instances) matrix.instance_keys.push_back(inst.key);
  for (const LabelingFunction& lf : lfs) matrix.lf_ids.push_back(lf.id);
  matrix.cells.assign(instances.size() * lfs.size(), kAbstainCell);
  if (lfs.empty() || instances.empty()) return matrix;

  std::vector<LfRunner> runners;
  runners.reserve(lfs.size());
  for (const LabelingFunction& lf : lfs) {
    runners.emplace_back(lf, span_sets, task, options);
  }

  // Instances of one document are contiguous; work is split by document.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < instances.size();) {
    std::size_t j = i;
    while (j < instances.size() &&
           instances[j].doc_index == instances[i].doc_index) {
      ++j;
    }
    groups.emplace_back(i, j);
    i = j;
  }

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<const Instance*> group;
    std::vector<std::string> labels;
    for (std::size_t g = begin; g < end; ++g) {
      const auto [first, last] = groups[g];
      group.clear();
      for (std::size_t i = first; i < last; ++i) group.push_back(&instances[i]);
      const Document& doc = corpus.documents()[instances[first].doc_index];
      for (std::size_t c = 0; c < runners.size(); ++c) {
        runners[c].LabelDocument(doc, group, labels);
        for (std::size_t k = 0; k < labels.size(); ++k) {
          matrix.at(first + k, c) = task.CategoryIndex(labels[k]);
        }
      }
    }
  };

  unsigned threads = options.threads != 0
                         ? options.threads
                         : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, groups.size()));
  if (threads <= 1) {
    work(0, groups.size());
    return matrix;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (groups.size() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(groups.size(), begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(work, begin, end);
  }
  for (std::thread& th : pool) th.join();
  return matrix;
}

namespace {

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back().push_back(c);
    }
  }
  return fields;
}

}  // namespace

std::string ExportMatrixCsv(const LabelMatrix& matrix) {
  std::ostringstream out;
  out << "instance_key,lf_id,vote\n";
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    const std::string key = CsvField(matrix.instance_keys[r].ToString());
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      out << key << ',' << CsvField(matrix.lf_ids[c]) << ','
          << CsvField(matrix.LabelAt(r, c)) << '\n';
    }
  }
  return out.str();
}

LabelMatrix ImportMatrixCsv(std::string_view csv,
                            std::vector<std::string> categories) {
  LabelMatrix matrix;
  matrix.categories = std::move(categories);
  std::map<std::string, std::size_t> rows;
  std::map<std::string, std::size_t> cols;
  std::vector<std::tuple<std::size_t, std::size_t, int>> entries;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < csv.size()) {
    std::size_t eol = csv.find('\n', pos);
    if (eol == std::string_view::npos) eol = csv.size();
    const std::string_view line = csv.substr(pos, eol - pos);
    pos = eol + 1;
    if (++line_no == 1 || line.empty()) continue;
    const auto fields = SplitCsvLine(line);
    if (fields.size() != 3) throw ParseError(line_no, "expected 3 fields");
    auto [rit, new_row] = rows.emplace(fields[0], rows.size());
    if (new_row) matrix.instance_keys.push_back(InstanceKey::Parse(fields[0]));
    auto [cit, new_col] = cols.emplace(fields[1], cols.size());
    if (new_col) matrix.lf_ids.push_back(fields[1]);
    int cell = kAbstainCell;
    if (fields[2] != kAbstain) {
      cell = -1;
      for (std::size_t k = 0; k < matrix.categories.size(); ++k) {
        if (matrix.categories[k] == fields[2]) cell = static_cast<int>(k);
      }
      if (cell < 0) {
        throw ParseError(line_no, "unknown category '" + fields[2] + "'");
      }
    }
    entries.emplace_back(rit->second, cit->second, cell);
  }
  matrix.cells.assign(matrix.rows() * matrix.cols(), kAbstainCell);
  for (const auto& [r, c, v] : entries) matrix.at(r, c) = v;
  return matrix;
}

}  // namespace spanlab
