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

#include "spanlab/server.h"

#include <algorithm>
#include <condition_variable>
#include <map>
#include <mutex>
#include <semaphore>
#include <thread>

#include "httplib.h"

namespace spanlab {
namespace {

using nlohmann::json;

class ConflictError : public Error {
 public:
  ConflictError(std::int64_t expected, std::int64_t current)
      : Error("Conflict", "revision " + std::to_string(expected) +
                              " is stale; current revision is " +
                              std::to_string(current)),
        current_(current) {}
  std::int64_t current() const { return current_; }

 private:
  std::int64_t current_;
};

json ErrorBody(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

json ViolationsToJson(const ValidationReport& report) {
  json out = json::array();
  for (const Violation& v : report.violations) {
    out.push_back({{"code", v.code}, {"path", v.path}, {"message", v.message}});
  }
  return out;
}

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace),
                  "application/json");
}

json ParseBody(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw Error("BadRequest", "request body must be a JSON object");
  }
  return body;
}

std::optional<std::int64_t> ExpectedRevision(const httplib::Request& req,
                                             const json& body) {
  if (body.contains("revision") && !body["revision"].is_null()) {
    if (!body["revision"].is_number_integer()) {
      throw Error("BadRequest", "revision must be an integer");
    }
    return body["revision"].get<std::int64_t>();
  }
  if (req.has_param("revision")) {
    try {
      return std::stoll(req.get_param_value("revision"));
    } catch (const std::exception&) {
      throw Error("BadRequest", "revision must be an integer");
    }
  }
  return std::nullopt;
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler Wrap(std::function<json(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      json body = fn(req, res);
      if (res.status == -1 || res.status == 0) res.status = 200;
      Reply(res, res.status, body);
    } catch (const ValidationFailedError& e) {
      json body = ErrorBody(e.code(), e.what());
      body["error"]["violations"] = ViolationsToJson(e.report());
      Reply(res, HttpStatusFor(e.code()), body);
    } catch (const MalformedResponseError& e) {
      json body = ErrorBody(e.code(), e.what());
      body["error"]["raw"] = e.raw();
      Reply(res, HttpStatusFor(e.code()), body);
    } catch (const ConflictError& e) {
      json body = ErrorBody(e.code(), e.what());
      body["error"]["current_revision"] = e.current();
      Reply(res, HttpStatusFor(e.code()), body);
    } catch (const SchemaError& e) {
      json body = ErrorBody(e.code(), e.what());
      body["error"]["path"] = e.path();
      Reply(res, HttpStatusFor(e.code()), body);
    } catch (const Error& e) {
      Reply(res, HttpStatusFor(e.code()), ErrorBody(e.code(), e.what()));
    } catch (const json::exception& e) {
      Reply(res, 400, ErrorBody("BadRequest", e.what()));
    } catch (const std::exception& e) {
      Reply(res, 500, ErrorBody("Internal", e.what()));
    }
  };
}

json ProbsObject(const std::vector<std::string>& categories,
                 const std::vector<double>& probs) {
  json out = json::object();
  for (std::size_t k = 0; k < categories.size() && k < probs.size(); ++k) {
    out[categories[k]] = probs[k];
  }
  return out;
}

json OverrideJson(const Override& ov) {
  return {{"label", ov.label},
          {"source", ToString(ov.source)},
          {"timestamp", ov.timestamp}};
}

json InstanceSummary(const Project& p, std::size_t i,
                     const std::vector<std::string>& labels) {
  const Instance& inst = p.instances()[i];
  const std::string key = inst.key.ToString();
  const bool overridden = p.overrides.count(key) > 0;
  return {{"key", key},
          {"doc_id", inst.key.doc_id},
          {"target", inst.key.target_name ? json(*inst.key.target_name) : json()},
          {"text", p.corpus->documents()[inst.doc_index].text},
          {"label", labels[i]},
          {"source", overridden ? "override" : (p.consensus ? "model" : "none")}};
}

json InstanceDetail(const Project& p, const std::string& key) {
  const auto idx = p.index->Find(key);
  if (!idx) throw UnknownInstanceError(key);
  const Instance& inst = p.instances()[*idx];
  const Document& doc = p.corpus->documents()[inst.doc_index];
  json j = InstanceSummary(p, *idx, CurrentLabels(p));
  j["tokens"] = json::array();
  for (const Token& t : doc.tokens) j["tokens"].push_back({t.start, t.end});
  j["occurrences"] = json::array();
  for (const TargetOccurrence& o : inst.occurrences) {
    j["occurrences"].push_back({{"target", o.target_name},
                                {"alias", o.alias_matched},
                                {"first", o.token_range.first},
                                {"last", o.token_range.last}});
  }
  j["tagged_spans"] = json::array();
  for (const TaggedSpan& t : TagSpans(doc, p.span_sets)) {
    j["tagged_spans"].push_back({{"span_set", t.span_set_name},
                                 {"first", t.token_range.first},
                                 {"last", t.token_range.last},
                                 {"text", t.matched_text}});
  }
  j["labeled_spans"] = json::array();
  j["votes"] = json::object();
  for (const LabelingFunction& lf : p.lfs) {
    const LfRunner runner(lf, p.span_sets, p.task, p.config.engine);
    for (const LabeledSpan& s : runner.LabelSpans(doc)) {
      j["labeled_spans"].push_back({{"lf_id", lf.id},
                                    {"label", s.label},
                                    {"first", s.token_range.first},
                                    {"last", s.token_range.last},
                                    {"creation_index", s.rule_ref.creation_index}});
    }
    j["votes"][lf.id] = runner.Label(inst, doc);
  }
  j["consensus"] = nullptr;
  if (p.consensus) {
    if (auto c = p.consensus->IndexOf(key)) {
      j["consensus"] = {{"label", p.consensus->hard[*c]},
                        {"model_label", p.consensus->model_hard[*c]},
                        {"probs", ProbsObject(p.consensus->categories, p.consensus->probs[*c])}};
    }
  }
  auto ov = p.overrides.find(key);
  j["override"] = ov == p.overrides.end() ? json() : OverrideJson(ov->second);
  j["model_probs"] = *idx < p.model_probs.size()
                         ? ProbsObject(p.task.label_categories, p.model_probs[*idx])
                         : json();
  j["annotations"] = json::array();
  if (auto a = p.annotations.find(key); a != p.annotations.end()) {
    for (const ManualSpan& s : a->second) {
      j["annotations"].push_back({{"first", s.token_range.first},
                                  {"last", s.token_range.last},
                                  {"text", s.text},
                                  {"span_set", s.span_set ? json(*s.span_set) : json()}});
    }
  }
  const auto gold = p.corpus->GoldFor(inst.key);
  j["gold"] = gold ? json(*gold) : json();
  j["stale"] = p.stale;
  return j;
}

std::vector<std::string> StringList(const json& body, const char* field) {
  std::vector<std::string> out;
  if (!body.contains(field)) return out;
  if (!body[field].is_array()) throw Error("BadRequest", std::string(field) + " must be an array");
  for (const json& v : body[field]) {
    if (!v.is_string()) throw Error("BadRequest", std::string(field) + " must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

int HttpStatusFor(const std::string& code) {
  static const std::map<std::string, int> kStatus = {
      {"BadRequest", 400},        {"SchemaError", 400},
      {"ParseError", 400},        {"InvalidArgument", 400},
      {"UnknownCategory", 400},   {"UnknownStrategy", 400},
      {"UnknownPromptKind", 400}, {"EmptySamples", 400},
      {"MissingExamples", 400},   {"NotFound", 404},
      {"UnknownInstance", 404},   {"Conflict", 409},
      {"StaleConsensus", 409},    {"SpanSetInUse", 409},
      {"InvalidSuggestion", 409}, {"DuplicateId", 409},
      {"NoLabelingFunctions", 409}, {"ValidationFailed", 422},
      {"MalformedResponse", 502}, {"HttpError", 502},
      {"Timeout", 504},           {"ConnectionError", 502},
      {"AuthError", 502},         {"LlmUnavailable", 503},
  };
  auto it = kStatus.find(code);
  return it == kStatus.end() ? 500 : it->second;
}

std::pair<std::string, int> ParseBindAddress(const std::string& address) {
  const std::size_t colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw Error("InvalidArgument", "bind address must look like HOST:PORT");
  }
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(address.substr(colon + 1), &used);
    if (used != address.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw Error("InvalidArgument", "invalid port in '" + address + "'");
  }
  if (port < 0 || port > 65535) throw Error("InvalidArgument", "port out of range");
  return {address.substr(0, colon), port};
}

struct Server::Impl {
  struct Job {
    std::string status = "queued";
    json error;
    std::int64_t revision = -1;
  };

  explicit Impl(Project project, ServerOptions opts)
      : options(std::move(opts)),
        current(std::make_shared<const Project>(std::move(project))),
        llm_slots(static_cast<std::ptrdiff_t>(
            std::clamp<std::size_t>(options.llm_concurrency, 1, 64))) {}

  ServerOptions options;
  httplib::Server http;
  mutable std::mutex snap_mu;
  std::shared_ptr<const Project> current;
  std::mutex writer_mu;
  std::mutex jobs_mu;
  std::condition_variable jobs_cv;
  std::map<std::string, Job> jobs;
  std::vector<std::thread> job_threads;
  std::size_t active_jobs = 0;
  int next_job = 1;
  std::counting_semaphore<64> llm_slots;
  std::thread runner;
  bool bound = false;

  std::shared_ptr<const Project> Snapshot() const {
    std::lock_guard<std::mutex> lock(snap_mu);
    return current;
  }

  void Publish(std::shared_ptr<const Project> next) {
    std::lock_guard<std::mutex> lock(snap_mu);
    current = std::move(next);
  }

  void Persist(const Project& p) {
    if (!options.project_dir.empty()) SaveProject(p, options.project_dir);
  }

  // Runs `fn` on a private copy under the writer lock; publishes on success.
  json Mutate(const httplib::Request& req, const json& body,
              const std::function<json(Project&)>& fn, bool bump_check = true) {
    std::lock_guard<std::mutex> lock(writer_mu);
    auto base = Snapshot();
    if (bump_check) {
      if (auto expected = ExpectedRevision(req, body); expected && *expected != base->revision) {
        throw ConflictError(*expected, base->revision);
      }
    }
    auto next = std::make_shared<Project>(*base);
    json result = fn(*next);
    Persist(*next);
    result["revision"] = next->revision;
    Publish(std::move(next));
    return result;
  }

  json SubmitAssignLabels(const httplib::Request& req, const json& body) {
    const auto snap = Snapshot();
    if (auto expected = ExpectedRevision(req, body); expected && *expected != snap->revision) {
      throw ConflictError(*expected, snap->revision);
    }
    std::string id;
    {
      std::lock_guard<std::mutex> lock(jobs_mu);
      id = "j" + std::to_string(next_job++);
      jobs[id] = Job{};
      ++active_jobs;
      job_threads.emplace_back([this, id] { RunAssignJob(id); });
    }
    return {{"job_id", id}, {"status", "queued"}};
  }

  void SetJob(const std::string& id, const std::function<void(Job&)>& fn) {
    std::lock_guard<std::mutex> lock(jobs_mu);
    fn(jobs[id]);
  }

  void RunAssignJob(const std::string& id) {
    try {
      std::lock_guard<std::mutex> lock(writer_mu);
      SetJob(id, [](Job& j) { j.status = "running"; });
      auto next = std::make_shared<Project>(*Snapshot());
      AssignLabels(*next);
      Persist(*next);
      const std::int64_t revision = next->revision;
      Publish(std::move(next));
      SetJob(id, [&](Job& j) {
        j.status = "succeeded";
        j.revision = revision;
      });
    } catch (const Error& e) {
      SetJob(id, [&](Job& j) {
        j.status = "failed";
        j.error = {{"code", e.code()}, {"message", e.what()}};
      });
    } catch (const std::exception& e) {
      SetJob(id, [&](Job& j) {
        j.status = "failed";
        j.error = {{"code", "Internal"}, {"message", e.what()}};
      });
    }
    std::lock_guard<std::mutex> lock(jobs_mu);
    --active_jobs;
    jobs_cv.notify_all();
  }

  json RunLlm(PromptKind kind, const json& body) {
    if (!options.llm) {
      throw Error("LlmUnavailable", "no LLM endpoint is configured");
    }
    auto snap = Snapshot();
    std::vector<std::string> keys = StringList(body, "instances");
    if (keys.empty() && body.contains("strategy")) {
      const std::string strategy = body["strategy"].get<std::string>();
      auto it = snap->sampler_reports.find(strategy);
      if (it == snap->sampler_reports.end()) {
        throw NotFoundError("sampler report '" + strategy + "'");
      }
      keys = it->second.selected;
    }
    const std::size_t limit = body.value("limit", std::size_t{20});
    if (keys.size() > limit) keys.resize(limit);
    const LlmPromptPlan plan = PlanLlmPrompt(*snap, kind, keys);

    std::string raw;
    llm_slots.acquire();
    try {
      raw = options.llm->Complete(plan.request);
    } catch (...) {
      llm_slots.release();
      throw;
    }
    llm_slots.release();

    std::lock_guard<std::mutex> lock(writer_mu);
    auto next = std::make_shared<Project>(*Snapshot());
    LlmIngestResult ingest;
    try {
      ingest = IngestLlmResponse(*next, plan, raw);
    } catch (const MalformedResponseError&) {
      // Keep the audit entry for the failed exchange.
      Persist(*next);
      Publish(std::move(next));
      throw;
    }
    json suggestions = json::array();
    for (const std::string& id : ingest.suggestion_ids) {
      suggestions.push_back(SuggestionToJson(*next->FindSuggestion(id)));
    }
    json dropped = json::array();
    for (const ParseIssue& d : ingest.dropped) {
      dropped.push_back({{"index", d.index}, {"code", d.code}, {"message", d.message}});
    }
    Persist(*next);
    const std::int64_t revision = next->revision;
    Publish(std::move(next));
    return {{"digest", plan.request.context_digest},
            {"suggestions", suggestions},
            {"dropped", dropped},
            {"revision", revision}};
  }

  void Routes();
};

void Server::Impl::Routes() {
  http.Get("/project", Wrap([this](const httplib::Request&, httplib::Response&) {
    auto p = Snapshot();
    std::size_t pending = 0;
    for (const Suggestion& s : p->suggestions) {
      if (s.status == SuggestionStatus::kPending) ++pending;
    }
    return json{{"id", p->config.id},
                {"revision", p->revision},
                {"stale", p->stale},
                {"task", TaskToJson(p->task)},
                {"config", ProjectConfigToJson(p->config)},
                {"documents", p->corpus->size()},
                {"instances", p->instances().size()},
                {"labeling_functions", p->lfs.size()},
                {"span_sets", p->span_sets.size()},
                {"overrides", p->overrides.size()},
                {"pending_suggestions", pending},
                {"has_consensus", p->consensus.has_value()},
                {"has_projection", p->projection.has_value()},
                {"llm_available", options.llm != nullptr}};
  }));

  // Labeling functions.
  http.Get("/lfs", Wrap([this](const httplib::Request&, httplib::Response&) {
    auto p = Snapshot();
    json lfs = json::array();
    for (const LabelingFunction& lf : p->lfs) lfs.push_back(LfToJson(lf));
    return json{{"labeling_functions", lfs}, {"revision", p->revision}};
  }));
  http.Get(R"(/lfs/([^/]+))", Wrap([this](const httplib::Request& req, httplib::Response&) {
    auto p = Snapshot();
    const LabelingFunction* lf = p->FindLf(req.matches[1].str());
    if (lf == nullptr) throw NotFoundError("labeling function '" + req.matches[1].str() + "'");
    return json{{"lf", LfToJson(*lf)}, {"revision", p->revision}};
  }));
  http.Post("/lfs/validate", Wrap([this](const httplib::Request& req, httplib::Response&) {
    const json body = ParseBody(req);
    auto p = Snapshot();
    try {
      const LabelingFunction lf = LfFromJson(body.at("lf"), "/lf");
      const ValidationReport report = ValidateLf(lf, p->span_sets, p->task);
      return json{{"ok", report.ok()}, {"violations", ViolationsToJson(report)}};
    } catch (const SchemaError& e) {
      return json{{"ok", false},
                  {"violations", json::array({{{"code", "SchemaError"},
                                               {"path", e.path()},
                                               {"message", e.reason()}}})}};
    }
  }));
  http.Post("/lfs", Wrap([this](const httplib::Request& req, httplib::Response& res) {
    const json body = ParseBody(req);
    json out = Mutate(req, body, [&](Project& p) {
      const LabelingFunction lf = LfFromJson(body.at("lf"), "/lf");
      if (p.FindLf(lf.id)) {
        throw Error("Conflict", "labeling function '" + lf.id + "' already exists");
      }
      PutLf(p, lf);
      return json{{"lf", LfToJson(lf)}};
    });
    res.status = 201;
    return out;
  }));
  http.Patch(R"(/lfs/([^/]+))", Wrap([this](const httplib::Request& req, httplib::Response&) {
    const json body = ParseBody(req);
    const std::string id = req.matches[1].str();
    return Mutate(req, body, [&](Project& p) {
      if (!p.FindLf(id)) throw NotFoundError("labeling function '" + id + "'");
      const LabelingFunction lf = LfFromJson(body.at("lf"), "/lf");
      if (lf.id != id) throw Error("InvalidArgument", "body id differs from path id");
      PutLf(p, lf);
      return json{{"lf", LfToJson(lf)}};
    });
  }));
  http.Delete(R"(/lfs/([^/]+))", Wrap([this](const httplib::Request& req, httplib::Response&) {
    const json body = ParseBody(req);
    const std::string id = req.matches[1].str();
    return Mutate(req, body, [&](Project& p) {
      DeleteLf(p, id);
      return json{{"deleted", id}};
    });
  }));

  // Span sets.
  http.Get("/spansets", Wrap([this](const httplib::Request&, httplib::Response&) {
    auto p = Snapshot();
    json sets = json::array();
    for (const SpanSet& s : p->span_sets) sets.push_back(SpanSetToJson(s));
    return json{{"span_sets", sets}, {"revision", p->revision}};
  }));
  http.Get(R"(/spansets/([^/]+))", Wrap([this](const httplib::Request& req, httplib::Response&) {
    auto p = Snapshot();
    const SpanSet* s = p->FindSpanSet(req.matches[1].str());
    if (s == nullptr) throw NotFoundError("span set '" + req.matches[1].str() + "'");
    return json{{"span_set", SpanSetToJson(*s)}, {"revision", p->revision}};
  }));
  http.Post("/spansets", Wrap([this](const httplib::Request& req, httplib::Response& res) {
    const json body = ParseBody(req);
    json out = Mutate(req, body, [&](Project& p) {
      const SpanSet set = SpanSetFromJson(body.at("span_set"), "/span_set");
      if (p.FindSpanSet(set.name)) {
        throw Error("Conflict", "span set '" + set.name + "' already exists");
      }
      PutSpanSet(p, set);
      return json{{"span_set", SpanSetToJson(set)}};
    });
    res.status = 201;
    return out;
  }));
  http.Patch(R"(/spansets/([^/]+))", Wrap([this](const httplib::Request& req, httplib::Response&) {
    const json body = ParseBody(req);
    const std::string name = req.matches[1].str();
    return Mutate(req, body, [&](Project& p) {
      if (!p.FindSpanSet(name)) throw NotFoundError("span set '" + name + "'");
      const SpanSet set = SpanSetFromJson(body.at("span_set"), "/span_set");
      if (set.name != name) throw Error("InvalidArgument", "body name differs from path name");
      PutSpanSet(p, set);
      return json{{"span_set", SpanSetToJson(set)}};
    });
  }));
  http.Delete(R"(/spansets/([^/]+))", Wrap([this](const httplib::Request& req, httplib::Response&) {
    const json body = ParseBody(req);
    const std::string name = req.matches[1].str();
    return Mutate(req, body, [&](Project& p) {
      DeleteSpanSet(p, name);
      return json{{"deleted", name}};
    });
  }));

  // Assign labels as a background job.
  http.Post("/assign-labels", Wrap([this](const httplib::Request& req, httplib::Response& res) {
    const json body = ParseBody(req);
    json out = SubmitAssignLabels(req, body);
    res.status = 202;
    return out;
  }));
  http.Get(R"(/jobs/([^/]+))", Wrap([this](const httplib::Request& req, httplib::Response&) {
    std::lock_guard<std::mutex> lock(jobs_mu);
    auto it = jobs.find(req.matches[1].str());
    if (it == jobs.end()) throw NotFoundError("job '" + req.matches[1].str() + "'");
    json j = {{"job_id", it->first}, {"status", it->second.status}};
    if (!it->second.error.is_null()) j["error"] = it->second.error;
    if (it->second.revision >= 0) j["revision"] = it->second.revision;
    return j;
  }));

  // Instances.
  http.Get("/instances", Wrap([this](const httplib::Request& req, httplib::Response&) {
    auto p = Snapshot();
    std::size_t page = 1;
    std::size_t size = options.default_page_size;
    try {
      if (req.has_param("page")) page = std::stoul(req.get_param_value("page"));
      if (req.has_param("page_size")) size = std::stoul(req.get_param_value("page_size"));
    } catch (const std::exception&) {
      throw Error("BadRequest", "page and page_size must be positive integers");
    }
    if (page == 0 || size == 0) throw Error("BadRequest", "page and page_size start at 1");
    const std::vector<std::string> labels = CurrentLabels(*p);
    json items = json::array();
    const std::size_t begin = (page - 1) * size;
    for (std::size_t i = begin; i < p->instances().size() && i < begin + size; ++i) {
      items.push_back(InstanceSummary(*p, i, labels));
    }
    return json{{"page", page},
                {"page_size", size},
                {"total", p->instances().size()},
                {"instances", items},
                {"revision", p->revision}};
  }));
  http.Patch(R"(/instances/(.+)/label)", Wrap([this](const httplib::Request& req, httplib::Response&) {
    const json body = ParseBody(req);
    const std::string key = req.matches[1].str();
    if (!body.contains("label")) throw Error("BadRequest", "body needs a label (string or null)");
    return Mutate(req, body, [&](Project& p) {
      std::optional<std::string> label;
      if (!body["label"].is_null()) label = body["label"].get<std::string>();
      SetLabelOverride(p, key, label);
      const auto idx = p.index->Find(key);
      return json{{"instance", key}, {"label", CurrentLabels(p)[*idx]}};
    });
  }));
  http.Patch(R"(/instances/(.+)/spans)", Wrap([this](const httplib::Request& req, httplib::Response&) {
    const json body = ParseBody(req);
    const std::string key = req.matches[1].str();
    return Mutate(req, body, [&](Project& p) {
      std::vector<SpanRequest> spans;
      for (const json& s : body.at("spans")) {
        SpanRequest r;
        r.start = s.at("start").get<std::size_t>();
        r.end = s.at("end").get<std::size_t>();
        if (s.contains("span_set") && !s["span_set"].is_null()) {
          r.span_set = s["span_set"].get<std::string>();
        }
        spans.push_back(std::move(r));
      }
      PutAnnotation(p, key, spans, body.value("add_to_span_sets", false));
      return json{{"instance", InstanceDetail(p, key)}};
    });
  }));
  http.Get(R"(/instances/(.+))", Wrap([this](const httplib::Request& req, httplib::Response&) {
    auto p = Snapshot();
    json j = InstanceDetail(*p, req.matches[1].str());
    j["revision"] = p->revision;
    return j;
  }));

  // Sampling, projection, metrics, consensus export.
  http.Post("/sample", Wrap([this](const httplib::Request& req, httplib::Response&) {
    const json body = ParseBody(req);
    const SamplerStrategy strategy =
        SamplerStrategyFromString(body.at("strategy").get<std::string>());
    const double fraction = body.value("fraction", kDefaultSampleFraction);
    return Mutate(req, body, [&](Project& p) {
      return json{{"report", SamplerReportToJson(RunSampler(p, strategy, fraction))}};
    }, false);
  }));
  http.Get("/samples", Wrap([this](const httplib::Request&, httplib::Response&) {
    auto p = Snapshot();
    json reports = json::object();
    for (const auto& [name, r] : p->sampler_reports) reports[name] = SamplerReportToJson(r);
    return json{{"reports", reports}, {"revision", p->revision}};
  }));
  http.Get("/projection", Wrap([this](const httplib::Request&, httplib::Response&) {
    auto p = Snapshot();
    json out = {{"available", p->projection.has_value()},
                {"stale", p->stale},
                {"points", json::array()},
                {"explained_variance", json::array({0.0, 0.0})},
                {"revision", p->revision}};
    if (!p->projection) return out;
    const std::vector<std::string> labels = CurrentLabels(*p);
    for (std::size_t i = 0; i < p->projection->coords.size(); ++i) {
      out["points"].push_back({{"instance", p->instances()[i].key.ToString()},
                               {"x", p->projection->coords[i][0]},
                               {"y", p->projection->coords[i][1]},
                               {"label", labels[i]}});
    }
    out["explained_variance"] = p->projection->explained_variance;
    return out;
  }));
  http.Get("/metrics", Wrap([this](const httplib::Request&, httplib::Response&) {
    auto p = Snapshot();
    json history = json::array();
    for (const MetricsSnapshot& m : p->metrics) history.push_back(MetricsToJson(m));
    return json{{"current", MetricsToJson(Evaluate(*p))},
                {"history", history},
                {"revision", p->revision}};
  }));
  http.Get("/consensus", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(ExportConsensus(*Snapshot()), "application/x-ndjson");
  });

  // LLM assistance and suggestion review.
  const std::vector<std::pair<std::string, PromptKind>> llm_routes = {
      {"/llm/analyze", PromptKind::kSampleAnalysis},
      {"/llm/expand", PromptKind::kSpanExpansion},
      {"/llm/recommend", PromptKind::kLfRecommendation}};
  for (const auto& [path, kind] : llm_routes) {
    http.Post(path, Wrap([this, kind = kind](const httplib::Request& req, httplib::Response&) {
      return RunLlm(kind, ParseBody(req));
    }));
  }
  http.Get("/suggestions", Wrap([this](const httplib::Request& req, httplib::Response&) {
    auto p = Snapshot();
    const std::string status = req.has_param("status") ? req.get_param_value("status") : "";
    json list = json::array();
    for (const Suggestion& s : p->suggestions) {
      if (!status.empty() && ToString(s.status) != status) continue;
      list.push_back(SuggestionToJson(s));
    }
    return json{{"suggestions", list}, {"revision", p->revision}};
  }));
  http.Post(R"(/suggestions/([^/]+)/(accept|reject))",
            Wrap([this](const httplib::Request& req, httplib::Response&) {
              const json body = ParseBody(req);
              const std::string id = req.matches[1].str();
              const bool accept = req.matches[2].str() == "accept";
              return Mutate(req, body, [&](Project& p) {
                if (accept) {
                  AcceptSuggestion(p, id);
                } else {
                  RejectSuggestion(p, id);
                }
                return json{{"suggestion", SuggestionToJson(*p.FindSuggestion(id))}};
              });
            }));
}

Server::Server(Project project, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(project), std::move(options))) {
  // httplib's default adds SO_REUSEPORT, which lets a second server share the
  // port instead of failing to bind.
  impl_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes),
               sizeof(yes));
  });
  impl_->Routes();
}

Server::~Server() {
  Stop();
  WaitForJobs();
  std::vector<std::thread> threads;
  {
    std::lock_guard<std::mutex> lock(impl_->jobs_mu);
    threads.swap(impl_->job_threads);
  }
  for (std::thread& t : threads) t.join();
}

int Server::Bind(const std::string& host, int port) {
  int bound = -1;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
  } else if (impl_->http.bind_to_port(host, port)) {
    bound = port;
  }
  if (bound < 0) throw BindError(host + ":" + std::to_string(port));
  impl_->bound = true;
  return bound;
}

void Server::Run() {
  if (!impl_->bound) throw Error("InvalidArgument", "Bind() before Run()");
  impl_->http.listen_after_bind();
}

void Server::Start() {
  if (!impl_->bound) throw Error("InvalidArgument", "Bind() before Start()");
  impl_->runner = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void Server::Stop() {
  impl_->http.stop();
  if (impl_->runner.joinable()) impl_->runner.join();
}

std::shared_ptr<const Project> Server::snapshot() const { return impl_->Snapshot(); }

void Server::WaitForJobs() {
  std::unique_lock<std::mutex> lock(impl_->jobs_mu);
  impl_->jobs_cv.wait(lock, [this] { return impl_->active_jobs == 0; });
}

}  // namespace spanlab
