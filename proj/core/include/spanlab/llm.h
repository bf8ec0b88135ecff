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

// LLM assistance: prompt rendering, a chat-completion client interface with
// an HTTP implementation and a deterministic mock, an append-only audit log,
// and strict parsers that turn responses into reviewable suggestions.

#ifndef SPANLAB_LLM_H_
#define SPANLAB_LLM_H_

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "spanlab/error.h"
#include "spanlab/lfspec.h"

namespace spanlab {

enum class PromptKind { kSampleAnalysis, kSpanExpansion, kLfRecommendation };
std::string_view ToString(PromptKind kind);
PromptKind PromptKindFromString(std::string_view s);

inline constexpr std::string_view kPromptTemplateVersion = "v1";

// A sample shown to the model, tagged with its instance key.
struct PromptSample {
  std::string key;
  std::string text;
  std::optional<std::string> target;

  bool operator==(const PromptSample&) const = default;
};

struct PromptRequest {
  PromptKind kind = PromptKind::kSampleAnalysis;
  std::string rendered_text;
  // Hex SHA-256 of the canonical inputs (kind, template version, task,
  // samples, span sets, LFs).
  std::string context_digest;

  bool operator==(const PromptRequest&) const = default;
};

class MissingExamplesError : public Error {
 public:
  explicit MissingExamplesError(const std::string& span_set)
      : Error("MissingExamples",
              "span set '" + span_set + "' has no example spans"),
        span_set_(span_set) {}
  const std::string& span_set() const { return span_set_; }

 private:
  std::string span_set_;
};

class MalformedResponseError : public Error {
 public:
  MalformedResponseError(const std::string& reason, std::string raw)
      : Error("MalformedResponse", reason), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

// Raw template text for `kind`, with {{slot}} placeholders.
std::string_view PromptTemplate(PromptKind kind);

// Throws Error("EmptySamples") and, for span expansion, MissingExamplesError.
PromptRequest RenderPrompt(PromptKind kind, const TaskDefinition& task,
                           const std::vector<PromptSample>& samples,
                           const std::vector<SpanSet>& span_sets,
                           const std::vector<LabelingFunction>& lfs);

std::string Sha256Hex(std::string_view data);

class TimeoutError : public Error {
 public:
  explicit TimeoutError(const std::string& message)
      : Error("Timeout", message) {}
};

class HttpError : public Error {
 public:
  HttpError(int status, const std::string& body)
      : Error("HttpError", "HTTP " + std::to_string(status) + ": " + body),
        status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class AuthError : public Error {
 public:
  explicit AuthError(const std::string& message)
      : Error("AuthError", message) {}
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // One chat-completion round trip; returns the assistant message content.
  virtual std::string Complete(const PromptRequest& request) = 0;
};

struct LlmClientConfig {
  // Base URL of an OpenAI-compatible API, e.g. "https://host/v1". Requests go
  // to <endpoint>/chat/completions.
  std::string endpoint;
  std::string model;
  // Name of the environment variable holding the API key. Empty sends no
  // Authorization header.
  std::string api_key_env;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
};

class HttpChatClient : public ChatClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpChatClient(LlmClientConfig config, Sleeper sleeper = {});

  // Retries connection failures, 429 and 5xx with exponential backoff.
  // 401/403 raise AuthError, other statuses HttpError.
  std::string Complete(const PromptRequest& request) override;

 private:
  LlmClientConfig config_;
  Sleeper sleeper_;
};

class MockChatClient : public ChatClient {
 public:
  using Responder = std::function<std::string(const PromptRequest&)>;

  explicit MockChatClient(Responder responder);
  // Returns the fixture for the request kind verbatim.
  static MockChatClient FromFixtures(std::map<PromptKind, std::string> fixtures);

  std::string Complete(const PromptRequest& request) override;
  std::size_t calls() const { return calls_; }

 private:
  Responder responder_;
  std::size_t calls_ = 0;
};

struct AuditEntry {
  std::string digest;
  PromptKind kind = PromptKind::kSampleAnalysis;
  std::string request;
  std::string response;
  std::string timestamp;

  bool operator==(const AuditEntry&) const = default;
};

// Append-only JSONL log. Safe for concurrent appends.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path) : path_(std::move(path)) {}

  void Append(const AuditEntry& entry);
  std::vector<AuditEntry> ReadAll() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
};

std::string UtcTimestamp();

// client.Complete plus an audit entry when `audit` is non-null.
std::string CompleteWithAudit(ChatClient& client, const PromptRequest& request,
                              AuditLog* audit);

enum class SuggestionStatus { kPending, kAccepted, kRejected };
std::string_view ToString(SuggestionStatus status);
SuggestionStatus SuggestionStatusFromString(std::string_view s);

// A response entry that was discarded, with the reason.
struct ParseIssue {
  std::size_t index = 0;
  std::string code;
  std::string message;

  bool operator==(const ParseIssue&) const = default;
};

struct LabelRecommendation {
  std::string instance_key;
  std::string label;
  std::string rationale;

  bool operator==(const LabelRecommendation&) const = default;
};

struct SpanSuggestion {
  std::string span_set_name;
  std::string phrase;
  std::string source_instance;

  bool operator==(const SpanSuggestion&) const = default;
};

struct LfSuggestion {
  std::string lf_json;  // canonical when parseable, else the entry as given
  ValidationReport validation;
  SuggestionStatus status = SuggestionStatus::kPending;
  std::optional<std::string> replaces;  // id of the LF to replace

  bool operator==(const LfSuggestion& o) const {
    return lf_json == o.lf_json && validation.violations == o.validation.violations &&
           status == o.status && replaces == o.replaces;
  }
};

template <typename T>
struct ParseResult {
  std::vector<T> items;
  std::vector<ParseIssue> dropped;
};

// {"recommendations": [{"id", "label", "rationale"}]}
ParseResult<LabelRecommendation> ParseSampleAnalysis(
    std::string_view raw, const TaskDefinition& task,
    const std::vector<PromptSample>& samples);

// {"spans": [{"span_set", "phrase", "source_id"?}]}. Phrases must occur
// token-aligned (case-insensitively) in the named sample, or in some sample
// when source_id is absent. Phrases already in the span set, or repeated, are
// dropped without an issue.
ParseResult<SpanSuggestion> ParseSpanExpansion(
    std::string_view raw, const std::vector<SpanSet>& span_sets,
    const std::vector<PromptSample>& samples);

// {"labeling_functions": [lf | {"lf": lf, "replaces": id}]}. Invalid entries
// come back rejected with their report; valid ones pending.
std::vector<LfSuggestion> ParseLfRecommendation(
    std::string_view raw, const TaskDefinition& task,
    const std::vector<SpanSet>& span_sets,
    const std::vector<LabelingFunction>& existing_lfs = {});

// A parsed suggestion awaiting review.
struct Suggestion {
  std::string id;
  SuggestionStatus status = SuggestionStatus::kPending;
  std::variant<LabelRecommendation, SpanSuggestion, LfSuggestion> payload;

  bool operator==(const Suggestion&) const = default;
};

std::string_view SuggestionKindName(const Suggestion& suggestion);
nlohmann::json SuggestionToJson(const Suggestion& suggestion);
Suggestion SuggestionFromJson(const nlohmann::json& j);

}  // namespace spanlab

#endif  // SPANLAB_LLM_H_
