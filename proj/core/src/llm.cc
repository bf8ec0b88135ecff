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

#include "spanlab/llm.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "spanlab/corpus.h"
#include "spanlab/internal/prompt_templates.h"

namespace spanlab {
namespace {

using nlohmann::json;

std::string SafeDump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string JoinOrNone(const std::vector<std::string>& items,
                       std::string_view sep) {
  if (items.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string OneLine(std::string_view text) {
  std::string out(text);
  std::replace_if(out.begin(), out.end(),
                  [](char c) { return c == '\n' || c == '\r'; }, ' ');
  return out;
}

std::string RenderSpanSets(const std::vector<SpanSet>& span_sets) {
  std::vector<std::string> lines;
  for (const SpanSet& set : span_sets) {
    std::vector<std::string> phrases;
    for (const Span& s : set.spans) phrases.push_back(OneLine(s.phrase));
    lines.push_back("- " + set.name + ": " + JoinOrNone(phrases, " | "));
  }
  return JoinOrNone(lines, "\n");
}

std::string RenderLfs(const std::vector<LabelingFunction>& lfs) {
  std::vector<std::string> lines;
  for (const LabelingFunction& lf : lfs) lines.push_back(SafeDump(LfToJson(lf)));
  return JoinOrNone(lines, "\n");
}

std::string RenderSamples(const std::vector<PromptSample>& samples) {
  std::vector<std::string> lines;
  for (const PromptSample& s : samples) {
    std::string line = "[" + s.key + "] ";
    if (s.target) line += "(target: " + *s.target + ") ";
    line += OneLine(s.text);
    lines.push_back(std::move(line));
  }
  return JoinOrNone(lines, "\n");
}

// Single pass: substituted values are never rescanned for placeholders.
std::string Substitute(std::string_view tpl,
                       const std::map<std::string, std::string>& slots) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const std::size_t open = tpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    const std::size_t close = tpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw Error("TemplateError", "unterminated placeholder");
    }
    const std::string name(tpl.substr(open + 2, close - open - 2));
    auto it = slots.find(name);
    if (it == slots.end()) {
      throw Error("TemplateError", "unknown placeholder '" + name + "'");
    }
    out.append(tpl.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

std::string StripCodeFence(std::string_view raw) {
  auto is_space = [](char c) {
    return c == ' ' || c == '\n' || c == '\r' || c == '\t';
  };
  while (!raw.empty() && is_space(raw.front())) raw.remove_prefix(1);
  while (!raw.empty() && is_space(raw.back())) raw.remove_suffix(1);
  if (raw.size() >= 6 && raw.substr(0, 3) == "```" &&
      raw.substr(raw.size() - 3) == "```") {
    const std::size_t nl = raw.find('\n');
    if (nl != std::string_view::npos && nl < raw.size() - 3) {
      return std::string(raw.substr(nl + 1, raw.size() - 3 - nl - 1));
    }
  }
  return std::string(raw);
}

const json& ResponseArray(std::string_view raw, const std::string& field,
                          json& holder) {
  holder = json::parse(StripCodeFence(raw), nullptr, false);
  if (holder.is_discarded()) {
    throw MalformedResponseError("response is not valid JSON", std::string(raw));
  }
  if (!holder.is_object()) {
    throw MalformedResponseError("response is not a JSON object",
                                 std::string(raw));
  }
  auto it = holder.find(field);
  if (it == holder.end() || !it->is_array()) {
    throw MalformedResponseError("response lacks a \"" + field + "\" array",
                                 std::string(raw));
  }
  return *it;
}

const std::string* StringField(const json& entry, const char* name) {
  auto it = entry.find(name);
  if (it == entry.end() || !it->is_string()) return nullptr;
  return it->get_ptr<const std::string*>();
}

// Byte range of the first token-aligned occurrence of `needle` in `tokens`.
std::optional<std::pair<std::size_t, std::size_t>> FindPhrase(
    const std::vector<Token>& tokens, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > tokens.size()) return std::nullopt;
  for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < needle.size() && match; ++k) {
      match = tokens[i + k].norm == needle[k];
    }
    if (match) {
      return std::make_pair(tokens[i].start, tokens[i + needle.size() - 1].end);
    }
  }
  return std::nullopt;
}

struct ParsedEndpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedEndpoint ParseEndpoint(const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw Error("InvalidConfig", "LLM endpoint must start with http:// or https://");
  }
  const std::size_t slash = endpoint.find('/', scheme + 3);
  ParsedEndpoint p;
  p.origin = endpoint.substr(0, slash);
  std::string base = slash == std::string::npos ? "" : endpoint.substr(slash);
  while (!base.empty() && base.back() == '/') base.pop_back();
  p.path = base + "/chat/completions";
  return p;
}

}  // namespace

std::string_view ToString(PromptKind kind) {
  switch (kind) {
    case PromptKind::kSampleAnalysis:
      return "sample_analysis";
    case PromptKind::kSpanExpansion:
      return "span_expansion";
    case PromptKind::kLfRecommendation:
      return "lf_recommendation";
  }
  return "sample_analysis";
}

PromptKind PromptKindFromString(std::string_view s) {
  if (s == "sample_analysis") return PromptKind::kSampleAnalysis;
  if (s == "span_expansion") return PromptKind::kSpanExpansion;
  if (s == "lf_recommendation") return PromptKind::kLfRecommendation;
  throw Error("UnknownPromptKind", "unknown prompt kind '" + std::string(s) + "'");
}

std::string_view PromptTemplate(PromptKind kind) {
  switch (kind) {
    case PromptKind::kSampleAnalysis:
      return internal::kSampleAnalysisTemplate;
    case PromptKind::kSpanExpansion:
      return internal::kSpanExpansionTemplate;
    case PromptKind::kLfRecommendation:
      return internal::kLfRecommendationTemplate;
  }
  return internal::kSampleAnalysisTemplate;
}

std::string Sha256Hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("CryptoError", "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

PromptRequest RenderPrompt(PromptKind kind, const TaskDefinition& task,
                           const std::vector<PromptSample>& samples,
                           const std::vector<SpanSet>& span_sets,
                           const std::vector<LabelingFunction>& lfs) {
  if (samples.empty()) {
    throw Error("EmptySamples", "a prompt needs at least one sample");
  }
  if (kind == PromptKind::kSpanExpansion) {
    for (const SpanSet& set : span_sets) {
      if (set.spans.empty()) throw MissingExamplesError(set.name);
    }
  }
  std::vector<std::string> targets;
  for (const TargetSpec& t : task.targets) targets.push_back(t.name);

  std::map<std::string, std::string> slots = {
      {"task_type", std::string(ToString(task.type))},
      {"targets", JoinOrNone(targets, ", ")},
      {"categories", JoinOrNone(task.label_categories, ", ")},
      {"span_sets", RenderSpanSets(span_sets)},
      {"lfs", RenderLfs(lfs)},
      {"samples", RenderSamples(samples)},
      {"lf_schema", SafeDump(LfJsonSchema())},
  };

  json inputs = json::object();
  inputs["kind"] = ToString(kind);
  inputs["template_version"] = kPromptTemplateVersion;
  inputs["task"] = TaskToJson(task);
  inputs["samples"] = json::array();
  for (const PromptSample& s : samples) {
    inputs["samples"].push_back(
        {{"key", s.key}, {"text", s.text}, {"target", s.target ? json(*s.target) : json()}});
  }
  inputs["span_sets"] = json::array();
  for (const SpanSet& set : span_sets) inputs["span_sets"].push_back(SpanSetToJson(set));
  inputs["lfs"] = json::array();
  for (const LabelingFunction& lf : lfs) inputs["lfs"].push_back(LfToJson(lf));

  PromptRequest request;
  request.kind = kind;
  request.rendered_text = Substitute(PromptTemplate(kind), slots);
  request.context_digest = Sha256Hex(SafeDump(inputs));
  return request;
}

HttpChatClient::HttpChatClient(LlmClientConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string HttpChatClient::Complete(const PromptRequest& request) {
  const ParsedEndpoint endpoint = ParseEndpoint(config_.endpoint);
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw AuthError("environment variable " + config_.api_key_env +
                      " holds no API key");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const json body = {
      {"model", config_.model},
      {"messages", json::array({{{"role", "user"}, {"content", request.rendered_text}}})},
      {"temperature", 0}};
  const std::string payload = SafeDump(body);

  httplib::Client client(endpoint.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
      config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  std::string last_failure;
  bool last_was_timeout = false;
  int last_status = 0;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(config_.initial_backoff * (1 << (attempt - 1)));
    auto res = client.Post(endpoint.path, headers, payload, "application/json");
    if (!res) {
      const httplib::Error err = res.error();
      last_was_timeout =
          err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      last_status = 0;
      last_failure = httplib::to_string(err);
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("LLM endpoint rejected the credential (HTTP " +
                      std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
      last_was_timeout = false;
      last_status = res->status;
      last_failure = res->body;
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw HttpError(res->status, res->body);
    }
    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_object() && reply.contains("choices") &&
        reply["choices"].is_array() && !reply["choices"].empty()) {
      const json& choice = reply["choices"][0];
      if (choice.is_object() && choice.contains("message") &&
          choice["message"].is_object() && choice["message"].contains("content") &&
          choice["message"]["content"].is_string()) {
        return choice["message"]["content"].get<std::string>();
      }
    }
    throw MalformedResponseError("unexpected chat-completion payload", res->body);
  }
  if (last_status != 0) throw HttpError(last_status, last_failure);
  if (last_was_timeout) throw TimeoutError("LLM request timed out: " + last_failure);
  throw Error("ConnectionError", "LLM request failed: " + last_failure);
}

MockChatClient::MockChatClient(Responder responder)
    : responder_(std::move(responder)) {}

MockChatClient MockChatClient::FromFixtures(
    std::map<PromptKind, std::string> fixtures) {
  return MockChatClient([fixtures = std::move(fixtures)](const PromptRequest& r) {
    auto it = fixtures.find(r.kind);
    if (it == fixtures.end()) {
      throw Error("MissingFixture", "no mock fixture for " +
                                        std::string(ToString(r.kind)));
    }
    return it->second;
  });
}

std::string MockChatClient::Complete(const PromptRequest& request) {
  ++calls_;
  return responder_(request);
}

void AuditLog::Append(const AuditEntry& entry) {
  const json line = {{"digest", entry.digest},
                     {"kind", ToString(entry.kind)},
                     {"request", entry.request},
                     {"response", entry.response},
                     {"timestamp", entry.timestamp}};
  std::lock_guard<std::mutex> lock(mu_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error("IoError", "cannot append to " + path_.string());
  out << SafeDump(line) << '\n';
}

std::vector<AuditEntry> AuditLog::ReadAll() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<AuditEntry> entries;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      entries.push_back({j.at("digest").get<std::string>(),
                         PromptKindFromString(j.at("kind").get<std::string>()),
                         j.at("request").get<std::string>(),
                         j.at("response").get<std::string>(),
                         j.at("timestamp").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return entries;
}

std::string UtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string CompleteWithAudit(ChatClient& client, const PromptRequest& request,
                              AuditLog* audit) {
  std::string response = client.Complete(request);
  if (audit != nullptr) {
    audit->Append({request.context_digest, request.kind, request.rendered_text,
                   response, UtcTimestamp()});
  }
  return response;
}

std::string_view ToString(SuggestionStatus status) {
  switch (status) {
    case SuggestionStatus::kPending:
      return "pending";
    case SuggestionStatus::kAccepted:
      return "accepted";
    case SuggestionStatus::kRejected:
      return "rejected";
  }
  return "pending";
}

SuggestionStatus SuggestionStatusFromString(std::string_view s) {
  if (s == "pending") return SuggestionStatus::kPending;
  if (s == "accepted") return SuggestionStatus::kAccepted;
  if (s == "rejected") return SuggestionStatus::kRejected;
  throw SchemaError("/status", "unknown suggestion status '" + std::string(s) + "'");
}

ParseResult<LabelRecommendation> ParseSampleAnalysis(
    std::string_view raw, const TaskDefinition& task,
    const std::vector<PromptSample>& samples) {
  json holder;
  const json& entries = ResponseArray(raw, "recommendations", holder);
  std::set<std::string> keys;
  for (const PromptSample& s : samples) keys.insert(s.key);

  ParseResult<LabelRecommendation> result;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& e = entries[i];
    const std::string* id = e.is_object() ? StringField(e, "id") : nullptr;
    const std::string* label = e.is_object() ? StringField(e, "label") : nullptr;
    if (id == nullptr || label == nullptr) {
      result.dropped.push_back({i, "InvalidEntry", "entry needs string id and label"});
      continue;
    }
    if (!keys.count(*id)) {
      result.dropped.push_back({i, "UnknownInstance", "unknown sample id '" + *id + "'"});
      continue;
    }
    if (task.CategoryIndex(*label) < 0) {
      result.dropped.push_back({i, "UnknownCategory", "label '" + *label +
                                                          "' is not a task category"});
      continue;
    }
    const std::string* rationale = StringField(e, "rationale");
    result.items.push_back({*id, *label, rationale ? *rationale : ""});
  }
  return result;
}

ParseResult<SpanSuggestion> ParseSpanExpansion(
    std::string_view raw, const std::vector<SpanSet>& span_sets,
    const std::vector<PromptSample>& samples) {
  json holder;
  const json& entries = ResponseArray(raw, "spans", holder);
  std::vector<std::vector<Token>> sample_tokens;
  for (const PromptSample& s : samples) sample_tokens.push_back(Tokenize(s.text));

  ParseResult<SpanSuggestion> result;
  std::set<std::pair<std::string, std::vector<std::string>>> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& e = entries[i];
    const std::string* set_name = e.is_object() ? StringField(e, "span_set") : nullptr;
    const std::string* phrase = e.is_object() ? StringField(e, "phrase") : nullptr;
    if (set_name == nullptr || phrase == nullptr) {
      result.dropped.push_back({i, "InvalidEntry", "entry needs string span_set and phrase"});
      continue;
    }
    auto set_it = std::find_if(span_sets.begin(), span_sets.end(),
                               [&](const SpanSet& s) { return s.name == *set_name; });
    if (set_it == span_sets.end()) {
      result.dropped.push_back({i, "UnknownSpanSet", "unknown span set '" + *set_name + "'"});
      continue;
    }
    const std::vector<std::string> norms = NormTokens(*phrase);
    if (norms.empty()) {
      result.dropped.push_back({i, "EmptyPhrase", "phrase has no tokens"});
      continue;
    }
    const std::string* source = StringField(e, "source_id");
    std::optional<std::size_t> found_in;
    std::pair<std::size_t, std::size_t> range;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (source != nullptr && samples[s].key != *source) continue;
      if (auto r = FindPhrase(sample_tokens[s], norms)) {
        found_in = s;
        range = *r;
        break;
      }
    }
    if (!found_in) {
      result.dropped.push_back({i, "NotInSource", "phrase '" + *phrase +
                                                      "' does not occur in the sample text"});
      continue;
    }
    if (set_it->Contains(*phrase) || !seen.insert({*set_name, norms}).second) continue;
    const std::string& text = samples[*found_in].text;
    result.items.push_back({*set_name, text.substr(range.first, range.second - range.first),
                            samples[*found_in].key});
  }
  return result;
}

std::vector<LfSuggestion> ParseLfRecommendation(
    std::string_view raw, const TaskDefinition& task,
    const std::vector<SpanSet>& span_sets,
    const std::vector<LabelingFunction>& existing_lfs) {
  json holder;
  const json& entries = ResponseArray(raw, "labeling_functions", holder);
  std::vector<LfSuggestion> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& e = entries[i];
    const std::string base = "/labeling_functions/" + std::to_string(i);
    LfSuggestion suggestion;
    const json* lf_json = &e;
    std::string lf_path = base;
    bool envelope_ok = true;
    if (e.is_object() && e.contains("lf")) {
      lf_json = &e["lf"];
      lf_path = base + "/lf";
      for (const auto& [key, value] : e.items()) {
        if (key == "lf") continue;
        if (key == "replaces" && value.is_string()) {
          suggestion.replaces = value.get<std::string>();
        } else {
          suggestion.validation.violations.push_back(
              {"SchemaError", base + "/" + key,
               key == "replaces" ? "expected string" : "unknown field"});
          envelope_ok = false;
        }
      }
    }
    suggestion.lf_json = SafeDump(*lf_json);
    if (!envelope_ok) {
      suggestion.status = SuggestionStatus::kRejected;
      out.push_back(std::move(suggestion));
      continue;
    }
    LabelingFunction lf;
    try {
      lf = LfFromJson(*lf_json, lf_path);
    } catch (const SchemaError& err) {
      suggestion.validation.violations.push_back({"SchemaError", err.path(), err.reason()});
      suggestion.status = SuggestionStatus::kRejected;
      out.push_back(std::move(suggestion));
      continue;
    } catch (const json::exception& err) {
      suggestion.validation.violations.push_back({"SchemaError", lf_path, err.what()});
      suggestion.status = SuggestionStatus::kRejected;
      out.push_back(std::move(suggestion));
      continue;
    }
    suggestion.lf_json = SerializeLf(lf);
    suggestion.validation = ValidateLf(lf, span_sets, task);
    auto existing = [&](const std::string& id) {
      return std::any_of(existing_lfs.begin(), existing_lfs.end(),
                         [&](const LabelingFunction& l) { return l.id == id; });
    };
    if (suggestion.replaces) {
      if (!existing(*suggestion.replaces)) {
        suggestion.validation.violations.push_back(
            {"UnknownLf", base + "/replaces",
             "no labeling function with id '" + *suggestion.replaces + "'"});
      }
    } else if (existing(lf.id)) {
      suggestion.validation.violations.push_back(
          {"DuplicateLfId", lf_path + "/id",
           "a labeling function with id '" + lf.id + "' already exists"});
    }
    suggestion.status = suggestion.validation.ok() ? SuggestionStatus::kPending
                                                   : SuggestionStatus::kRejected;
    out.push_back(std::move(suggestion));
  }
  return out;
}

std::string_view SuggestionKindName(const Suggestion& suggestion) {
  switch (suggestion.payload.index()) {
    case 0:
      return "label";
    case 1:
      return "span";
    default:
      return "lf";
  }
}

json SuggestionToJson(const Suggestion& suggestion) {
  json j = {{"id", suggestion.id},
            {"status", ToString(suggestion.status)},
            {"kind", SuggestionKindName(suggestion)}};
  if (const auto* rec = std::get_if<LabelRecommendation>(&suggestion.payload)) {
    j["instance"] = rec->instance_key;
    j["label"] = rec->label;
    j["rationale"] = rec->rationale;
  } else if (const auto* span = std::get_if<SpanSuggestion>(&suggestion.payload)) {
    j["span_set"] = span->span_set_name;
    j["phrase"] = span->phrase;
    j["source_instance"] = span->source_instance;
  } else {
    const auto& lf = std::get<LfSuggestion>(suggestion.payload);
    j["lf_json"] = lf.lf_json;
    j["validation"] = json::array();
    for (const Violation& v : lf.validation.violations) {
      j["validation"].push_back({{"code", v.code}, {"path", v.path}, {"message", v.message}});
    }
    j["replaces"] = lf.replaces ? json(*lf.replaces) : json();
  }
  return j;
}

Suggestion SuggestionFromJson(const json& j) {
  try {
    Suggestion s;
    s.id = j.at("id").get<std::string>();
    s.status = SuggestionStatusFromString(j.at("status").get<std::string>());
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "label") {
      s.payload = LabelRecommendation{j.at("instance").get<std::string>(),
                                      j.at("label").get<std::string>(),
                                      j.at("rationale").get<std::string>()};
    } else if (kind == "span") {
      s.payload = SpanSuggestion{j.at("span_set").get<std::string>(),
                                 j.at("phrase").get<std::string>(),
                                 j.at("source_instance").get<std::string>()};
    } else if (kind == "lf") {
      LfSuggestion lf;
      lf.lf_json = j.at("lf_json").get<std::string>();
      for (const json& v : j.at("validation")) {
        lf.validation.violations.push_back({v.at("code").get<std::string>(),
                                            v.at("path").get<std::string>(),
                                            v.at("message").get<std::string>()});
      }
      if (j.contains("replaces") && !j["replaces"].is_null()) {
        lf.replaces = j["replaces"].get<std::string>();
      }
      lf.status = s.status;
      s.payload = std::move(lf);
    } else {
      throw SchemaError("/kind", "unknown suggestion kind '" + kind + "'");
    }
    return s;
  } catch (const json::exception& e) {
    throw SchemaError("", std::string("suggestion: ") + e.what());
  }
}

}  // namespace spanlab
