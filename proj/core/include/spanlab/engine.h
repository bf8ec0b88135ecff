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

#ifndef SPANLAB_ENGINE_H_
#define SPANLAB_ENGINE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spanlab/corpus.h"
#include "spanlab/lfspec.h"

namespace spanlab {

struct TaggedSpan {
  std::string span_set_name;
  TokenRange token_range;
  std::string matched_text;

  bool operator==(const TaggedSpan&) const = default;
};

struct RuleRef {
  std::string lf_id;
  std::int64_t creation_index = 0;

  bool operator==(const RuleRef&) const = default;
};

struct LabeledSpan {
  std::string label;
  TokenRange token_range;  // union of the matched rule's tagged spans
  RuleRef rule_ref;

  bool operator==(const LabeledSpan&) const = default;
};

struct Vote {
  InstanceKey instance_key;
  std::string lf_id;
  std::string label;  // category or kAbstain
};

// One labeling unit resolved against a corpus.
struct Instance {
  InstanceKey key;
  std::size_t doc_index = 0;
  std::vector<TargetOccurrence> occurrences;  // empty for text classification
};

// Every document (text classification) or every (document, target) pair in
// which the target occurs, in document order then task target order.
std::vector<Instance> EnumerateInstances(const Corpus& corpus,
                                         const TaskDefinition& task);

inline constexpr int kAbstainCell = -1;

// Dense n_instances x n_lfs vote matrix. Cells hold a category index into
// `categories` or kAbstainCell.
struct LabelMatrix {
  std::vector<InstanceKey> instance_keys;
  std::vector<std::string> lf_ids;
  std::vector<std::string> categories;
  std::vector<int> cells;

  std::size_t rows() const { return instance_keys.size(); }
  std::size_t cols() const { return lf_ids.size(); }
  int at(std::size_t row, std::size_t col) const {
    return cells[row * cols() + col];
  }
  int& at(std::size_t row, std::size_t col) {
    return cells[row * cols() + col];
  }
  std::string LabelAt(std::size_t row, std::size_t col) const;

  bool operator==(const LabelMatrix&) const = default;
};

struct EngineOptions {
  // Maximum number of untagged tokens allowed between consecutive spans of a
  // multi-span rule. Unset means unlimited.
  std::optional<std::size_t> max_rule_gap;
  // Worker threads for BuildLabelMatrix; 0 picks hardware concurrency.
  unsigned threads = 0;
};

// Precompiled phrase index for a list of span sets. Tagging is a greedy
// left-to-right scan: at each position the longest phrase wins, ties go to the
// span set listed first, matched tokens are consumed.
class SpanTagger {
 public:
  explicit SpanTagger(const std::vector<const SpanSet*>& span_sets);
  explicit SpanTagger(const std::vector<SpanSet>& span_sets);

  std::vector<TaggedSpan> Tag(const Document& doc) const;

 private:
  struct Phrase {
    std::vector<std::string> norms;
    std::size_t span_set = 0;
  };
  void Build(const std::vector<const SpanSet*>& span_sets);

  std::vector<std::string> names_;
  std::unordered_map<std::string, std::vector<Phrase>> by_first_token_;
};

std::vector<TaggedSpan> TagSpans(const Document& doc,
                                 const std::vector<SpanSet>& span_sets);

std::vector<LabeledSpan> ApplyRules(const std::vector<TaggedSpan>& tags,
                                    const std::vector<Rule>& rules,
                                    const std::string& lf_id = "",
                                    const EngineOptions& options = {});

// Plurality over spans; tie or no spans gives kAbstain.
std::string AggregateText(const std::vector<LabeledSpan>& spans,
                          const std::vector<std::string>& categories);

// Token gap between two ranges; 0 when they overlap.
std::size_t TokenGap(const TokenRange& a, const TokenRange& b);

std::string AggregateTarget(const TargetOccurrence& occurrence,
                            const std::vector<LabeledSpan>& spans,
                            const AggregationMethod& method,
                            const std::vector<std::string>& categories);

// Compiled form of one LF against the project span sets.
class LfRunner {
 public:
  LfRunner(const LabelingFunction& lf, const std::vector<SpanSet>& span_sets,
           const TaskDefinition& task, EngineOptions options = {});

  const LabelingFunction& lf() const { return lf_; }

  std::vector<LabeledSpan> LabelSpans(const Document& doc) const;
  std::string Label(const Instance& instance, const Document& doc) const;
  // Labels for several instances of the same document, sharing one tagging
  // pass.
  void LabelDocument(const Document& doc,
                     const std::vector<const Instance*>& instances,
                     std::vector<std::string>& out) const;

 private:
  std::string LabelWithSpans(const Instance& instance,
                             const std::vector<LabeledSpan>& spans) const;

  LabelingFunction lf_;
  std::vector<Rule> rules_by_priority_;
  const TaskDefinition* task_;
  SpanTagger tagger_;
  EngineOptions options_;
};

Vote ApplyLf(const Instance& instance, const Document& doc,
             const LabelingFunction& lf, const std::vector<SpanSet>& span_sets,
             const TaskDefinition& task);

LabelMatrix BuildLabelMatrix(const Corpus& corpus, const TaskDefinition& task,
                             const std::vector<LabelingFunction>& lfs,
                             const std::vector<SpanSet>& span_sets,
                             const EngineOptions& options = {});

// instance_key,lf_id,vote rows (header included).
std::string ExportMatrixCsv(const LabelMatrix& matrix);
// Inverse of ExportMatrixCsv. Row and column order follow first appearance.
LabelMatrix ImportMatrixCsv(std::string_view csv,
                            std::vector<std::string> categories);

}  // namespace spanlab

#endif  // SPANLAB_ENGINE_H_
