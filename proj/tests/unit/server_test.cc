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

#include <atomic>
#include <thread>

#include <gtest/gtest.h>

#include "httplib.h"
#include "support/fixtures.h"

namespace spanlab {
namespace {

using nlohmann::json;

// Returns canned answers per prompt kind; throws `failure` when set.
class ScriptedLlm : public ChatClient {
 public:
  std::string Complete(const PromptRequest& request) override {
    ++calls;
    if (failure == "timeout") throw TimeoutError("scripted");
    if (failure == "malformed") return "not json";
    switch (request.kind) {
      case PromptKind::kSampleAnalysis:
        return R"({"recommendations":[{"id":"d1::Smith","label":"Favor","rationale":"r"}]})";
      case PromptKind::kSpanExpansion:
        return R"({"spans":[{"span_set":"support","phrase":"agree"}]})";
      case PromptKind::kLfRecommendation:
        return R"({"labeling_functions":[]})";
    }
    return "";
  }
  std::atomic<int> calls{0};
  std::string failure;
};

class ServerTest : public ::testing::Test {
 protected:
  void StartWith(Project p, std::shared_ptr<ChatClient> llm = nullptr,
                 std::filesystem::path dir = {}) {
    ServerOptions options;
    options.llm = std::move(llm);
    options.project_dir = std::move(dir);
    options.default_page_size = 2;
    server_ = std::make_unique<Server>(std::move(p), options);
    port_ = server_->Bind("127.0.0.1", 0);
    server_->Start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    client_.reset();
    server_.reset();
  }

  struct Reply {
    int status = 0;
    json body;
  };

  Reply Send(const std::string& method, const std::string& path,
             const json& body = nullptr) {
    const std::string payload = body.is_null() ? "" : body.dump();
    httplib::Result r;
    if (method == "GET") {
      r = client_->Get(path);
    } else if (method == "POST") {
      r = client_->Post(path, payload, "application/json");
    } else if (method == "PATCH") {
      r = client_->Patch(path, payload, "application/json");
    } else {
      r = client_->Delete(path, payload, "application/json");
    }
    if (!r) return {-1, nullptr};
    json parsed = json::parse(r->body, nullptr, false);
    return {r->status, parsed.is_discarded() ? json(r->body) : parsed};
  }

  std::int64_t Revision() { return Send("GET", "/project").body["revision"]; }

  json RunAssignJob() {
    const Reply submitted = Send("POST", "/assign-labels");
    EXPECT_EQ(submitted.status, 202);
    server_->WaitForJobs();
    return Send("GET", "/jobs/" + submitted.body["job_id"].get<std::string>()).body;
  }

  std::unique_ptr<Server> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

TEST_F(ServerTest, ProjectSummary) {
  StartWith(testing::StanceProject());
  const Reply r = Send("GET", "/project");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["documents"], 1);
  EXPECT_EQ(r.body["instances"], 1);
  EXPECT_EQ(r.body["labeling_functions"], 1);
  EXPECT_EQ(r.body["stale"], true);
  EXPECT_EQ(r.body["has_consensus"], false);
  EXPECT_EQ(r.body["llm_available"], false);
  EXPECT_EQ(r.body["revision"], server_->snapshot()->revision);
}

TEST_F(ServerTest, LfCrud) {
  StartWith(testing::StanceProject());
  const json lf = LfToJson(testing::StanceLf());
  EXPECT_EQ(Send("GET", "/lfs").body["labeling_functions"].size(), 1u);
  EXPECT_EQ(Send("GET", "/lfs/" + lf["id"].get<std::string>()).body["lf"], lf);
  EXPECT_EQ(Send("GET", "/lfs/nope").status, 404);

  // Duplicate id.
  Reply r = Send("POST", "/lfs", {{"lf", lf}});
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body["error"]["code"], "Conflict");

  json copy = lf;
  copy["id"] = "copy";
  r = Send("POST", "/lfs", {{"lf", copy}});
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["lf"]["id"], "copy");
  EXPECT_EQ(r.body["revision"], server_->snapshot()->revision);

  copy["rules"].erase(1);
  r = Send("PATCH", "/lfs/copy", {{"lf", copy}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(server_->snapshot()->FindLf("copy")->rules.size(), 1u);
  EXPECT_EQ(Send("PATCH", "/lfs/other", {{"lf", copy}}).status, 404);
  EXPECT_EQ(Send("PATCH", "/lfs/" + lf["id"].get<std::string>(), {{"lf", copy}}).status, 400);

  r = Send("DELETE", "/lfs/copy");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["deleted"], "copy");
  EXPECT_EQ(Send("DELETE", "/lfs/copy").status, 404);
}

TEST_F(ServerTest, LfValidationAndErrors) {
  StartWith(testing::StanceProject());
  json bad = LfToJson(testing::StanceLf());
  bad["id"] = "bad";
  bad["span_sets"].push_back("missing");
  Reply r = Send("POST", "/lfs/validate", {{"lf", bad}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["ok"], false);
  EXPECT_FALSE(r.body["violations"].empty());

  r = Send("POST", "/lfs/validate", {{"lf", {{"id", 3}}}});
  EXPECT_EQ(r.body["ok"], false);
  EXPECT_EQ(r.body["violations"][0]["code"], "SchemaError");

  const std::int64_t before = Revision();
  r = Send("POST", "/lfs", {{"lf", bad}});
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["error"]["code"], "ValidationFailed");
  EXPECT_FALSE(r.body["error"]["violations"].empty());
  EXPECT_EQ(Revision(), before);

  r = Send("POST", "/lfs", {{"lf", {{"id", 3}}}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"]["code"], "SchemaError");

  auto raw = client_->Post("/lfs", "{not json", "application/json");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->status, 400);
  EXPECT_EQ(json::parse(raw->body)["error"]["code"], "BadRequest");
}

TEST_F(ServerTest, SpanSetCrud) {
  StartWith(testing::StanceProject());
  EXPECT_EQ(Send("GET", "/spansets").body["span_sets"].size(), 2u);
  EXPECT_EQ(Send("GET", "/spansets/negation").body["span_set"]["name"], "negation");
  EXPECT_EQ(Send("GET", "/spansets/nope").status, 404);

  SpanSet extra;
  extra.name = "extra";
  extra.spans.push_back({"maybe", SpanProvenance::kUser});
  Reply r = Send("POST", "/spansets", {{"span_set", SpanSetToJson(extra)}});
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(Send("POST", "/spansets", {{"span_set", SpanSetToJson(extra)}}).status, 409);

  extra.spans.push_back({"perhaps", SpanProvenance::kUser});
  r = Send("PATCH", "/spansets/extra", {{"span_set", SpanSetToJson(extra)}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(server_->snapshot()->FindSpanSet("extra")->spans.size(), 2u);

  // Referenced by the stance LF.
  r = Send("DELETE", "/spansets/support");
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body["error"]["code"], "SpanSetInUse");
  EXPECT_EQ(Send("DELETE", "/spansets/extra").status, 200);
  EXPECT_EQ(Send("DELETE", "/spansets/extra").status, 404);
}

TEST_F(ServerTest, StaleRevisionIsRejected) {
  StartWith(testing::StanceProject());
  const std::int64_t rev = Revision();
  Reply r = Send("PATCH", "/instances/d1::Smith/label", {{"label", "Favor"}, {"revision", rev}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["revision"], rev + 1);
  r = Send("PATCH", "/instances/d1::Smith/label", {{"label", "Against"}, {"revision", rev}});
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body["error"]["code"], "Conflict");
  EXPECT_EQ(r.body["error"]["current_revision"], rev + 1);
  EXPECT_EQ(Send("DELETE", "/lfs/stance?revision=" + std::to_string(rev)).status, 409);
  EXPECT_EQ(Send("POST", "/assign-labels", {{"revision", rev}}).status, 409);
  EXPECT_EQ(Send("PATCH", "/instances/d1::Smith/label", {{"label", "Favor"}, {"revision", "x"}}).status,
            400);
}

TEST_F(ServerTest, ConcurrentConflictingPatchesExactlyOneWins) {
  StartWith(testing::StanceProject());
  const std::int64_t rev = Revision();
  constexpr int kClients = 8;
  std::atomic<int> ok{0}, conflict{0}, other{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kClients; ++t) {
    threads.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port_);
      const json body = {{"label", t % 2 ? "Favor" : "Against"}, {"revision", rev}};
      auto r = c.Patch("/instances/d1::Smith/label", body.dump(), "application/json");
      if (r && r->status == 200) {
        ++ok;
      } else if (r && r->status == 409) {
        ++conflict;
      } else {
        ++other;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok, 1);
  EXPECT_EQ(conflict, kClients - 1);
  EXPECT_EQ(other, 0);
  EXPECT_EQ(Revision(), rev + 1);
}

TEST_F(ServerTest, AssignLabelsJobAndWorkedExample) {
  StartWith(testing::StanceProject());
  EXPECT_EQ(Send("GET", "/jobs/j999").status, 404);
  const json job = RunAssignJob();
  EXPECT_EQ(job["status"], "succeeded");
  EXPECT_EQ(job["revision"], server_->snapshot()->revision);

  Reply r = Send("GET", "/instances/d1::Smith");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["label"], "Against");
  EXPECT_EQ(r.body["source"], "model");
  EXPECT_EQ(r.body["votes"]["stance"], "Against");
  EXPECT_EQ(r.body["consensus"]["label"], "Against");
  EXPECT_EQ(r.body["stale"], false);
  EXPECT_FALSE(r.body["tagged_spans"].empty());
  EXPECT_EQ(r.body["occurrences"][0]["target"], "Smith");

  // Same inputs through the library path give the same export.
  Project local = testing::StanceProject();
  AssignLabels(local);
  auto raw = client_->Get("/consensus");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->body, ExportConsensus(local));

  // Idempotent: a second run with unchanged inputs exports the same bytes.
  EXPECT_EQ(RunAssignJob()["status"], "succeeded");
  EXPECT_EQ(client_->Get("/consensus")->body, raw->body);
}

TEST_F(ServerTest, AssignLabelsFailureIsReportedOnTheJob) {
  Project p = testing::StanceProject();
  DeleteLf(p, "stance");
  StartWith(std::move(p));
  const std::int64_t rev = Revision();
  const json job = RunAssignJob();
  EXPECT_EQ(job["status"], "failed");
  EXPECT_EQ(job["error"]["code"], "NoLabelingFunctions");
  EXPECT_EQ(Revision(), rev);
}

TEST_F(ServerTest, InstancesPagingAndOverrides) {
  std::vector<Document> docs;
  for (int i = 0; i < 5; ++i) {
    docs.push_back(MakeDocument("d" + std::to_string(i), "I trust Smith."));
  }
  Project p = CreateProject(testing::StanceTask(), Corpus(docs, {}));
  for (const SpanSet& s : testing::StanceSpanSets()) PutSpanSet(p, s);
  PutLf(p, testing::StanceLf());
  StartWith(std::move(p));

  Reply r = Send("GET", "/instances");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["total"], 5);
  EXPECT_EQ(r.body["page_size"], 2);
  ASSERT_EQ(r.body["instances"].size(), 2u);
  EXPECT_EQ(r.body["instances"][0]["label"], kAbstain);
  EXPECT_EQ(r.body["instances"][0]["source"], "none");
  r = Send("GET", "/instances?page=3&page_size=2");
  ASSERT_EQ(r.body["instances"].size(), 1u);
  EXPECT_EQ(r.body["instances"][0]["key"], "d4::Smith");
  EXPECT_TRUE(Send("GET", "/instances?page=9").body["instances"].empty());
  EXPECT_EQ(Send("GET", "/instances?page=0").status, 400);
  EXPECT_EQ(Send("GET", "/instances?page=x").status, 400);

  r = Send("PATCH", "/instances/d2::Smith/label", {{"label", "Against"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["label"], "Against");
  r = Send("GET", "/instances/d2::Smith");
  EXPECT_EQ(r.body["label"], "Against");
  EXPECT_EQ(r.body["source"], "override");
  EXPECT_EQ(r.body["override"]["source"], "human");

  EXPECT_EQ(RunAssignJob()["status"], "succeeded");
  r = Send("GET", "/instances/d2::Smith");
  EXPECT_EQ(r.body["label"], "Against");
  EXPECT_EQ(r.body["consensus"]["model_label"], "Favor");
  EXPECT_EQ(Send("GET", "/instances/d1::Smith").body["label"], "Favor");

  r = Send("PATCH", "/instances/d2::Smith/label", {{"label", nullptr}});
  EXPECT_EQ(r.body["label"], "Favor");
  EXPECT_EQ(Send("PATCH", "/instances/d2::Smith/label", {{"label", "Maybe"}}).status, 400);
  EXPECT_EQ(Send("PATCH", "/instances/nope/label", {{"label", "Favor"}}).status, 404);
  EXPECT_EQ(Send("PATCH", "/instances/d2::Smith/label", json::object()).status, 400);
  EXPECT_EQ(Send("GET", "/instances/nope").status, 404);
}

TEST_F(ServerTest, SpanAnnotations) {
  StartWith(testing::StanceProject());
  // "agree with" sits at bytes 9..19 of the stance sentence.
  const std::string sentence = testing::kStanceSentence;
  const std::size_t start = sentence.find("agree");
  Reply r = Send("PATCH", "/instances/d1::Smith/spans",
                 {{"spans", {{{"start", start + 1}, {"end", start + 8}, {"span_set", "support"}}}},
                  {"add_to_span_sets", true}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  ASSERT_EQ(r.body["instance"]["annotations"].size(), 1u);
  EXPECT_EQ(r.body["instance"]["annotations"][0]["text"], "agree with");
  r = Send("PATCH", "/instances/d1::Smith/spans",
           {{"spans", {{{"start", 0}, {"end", 0}}}}});
  EXPECT_EQ(r.status, 400);
}

TEST_F(ServerTest, ProjectionBeforeAndAfterAssign) {
  StartWith(testing::StanceProject());
  Reply r = Send("GET", "/projection");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["available"], false);
  EXPECT_TRUE(r.body["points"].empty());
}

TEST_F(ServerTest, SamplingAndMetrics) {
  std::vector<Document> docs;
  std::vector<GoldLabel> gold;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "d" + std::to_string(i);
    docs.push_back(MakeDocument(id, i < 5 ? "I trust Smith." : "Smith spoke."));
    gold.push_back({{id, "Smith"}, "Favor"});
  }
  Project p = CreateProject(testing::StanceTask(), Corpus(docs, gold));
  for (const SpanSet& s : testing::StanceSpanSets()) PutSpanSet(p, s);
  PutLf(p, testing::StanceLf());
  StartWith(std::move(p));

  Reply r = Send("POST", "/sample", {{"strategy", "margin"}});
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body["error"]["code"], "StaleConsensus");
  EXPECT_EQ(Send("POST", "/sample", {{"strategy", "coin_flip"}}).status, 400);
  EXPECT_EQ(Send("POST", "/sample", {{"strategy", "vote_entropy"}, {"fraction", 2.0}}).status, 400);

  EXPECT_EQ(RunAssignJob()["status"], "succeeded");
  r = Send("POST", "/sample", {{"strategy", "abstain"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["report"]["selected"].size(), 5u);
  r = Send("POST", "/sample", {{"strategy", "vote_entropy"}, {"fraction", 0.1}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["report"]["selected"].size(), 1u);
  EXPECT_EQ(Send("GET", "/samples").body["reports"].size(), 2u);

  r = Send("GET", "/metrics");
  ASSERT_EQ(r.status, 200);
  EXPECT_DOUBLE_EQ(r.body["current"]["accuracy"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(r.body["current"]["coverage"].get<double>(), 0.5);
  EXPECT_EQ(r.body["history"].size(), 1u);

  r = Send("GET", "/projection");
  EXPECT_EQ(r.body["available"], true);
  EXPECT_EQ(r.body["points"].size(), 10u);
}

TEST_F(ServerTest, LlmUnavailable) {
  StartWith(testing::StanceProject());
  const Reply r = Send("POST", "/llm/analyze", {{"instances", {"d1::Smith"}}});
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(r.body["error"]["code"], "LlmUnavailable");
}

TEST_F(ServerTest, LlmSuggestionLifecycle) {
  auto llm = std::make_shared<ScriptedLlm>();
  StartWith(testing::StanceProject(), llm);
  Reply r = Send("POST", "/llm/expand", {{"instances", {"d1::Smith"}}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  ASSERT_EQ(r.body["suggestions"].size(), 1u);
  EXPECT_EQ(r.body["digest"].get<std::string>().size(), 64u);
  const std::string span_id = r.body["suggestions"][0]["id"];

  r = Send("POST", "/llm/analyze", {{"instances", {"d1::Smith"}}});
  ASSERT_EQ(r.status, 200);
  const std::string label_id = r.body["suggestions"][0]["id"];
  EXPECT_EQ(Send("GET", "/suggestions?status=pending").body["suggestions"].size(), 2u);

  // Nothing changes until a suggestion is accepted.
  EXPECT_EQ(server_->snapshot()->FindSpanSet("support")->spans.size(),
            testing::StanceSpanSets()[1].spans.size());
  r = Send("POST", "/suggestions/" + span_id + "/accept");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["suggestion"]["status"], "accepted");
  EXPECT_EQ(server_->snapshot()->FindSpanSet("support")->spans.size(),
            testing::StanceSpanSets()[1].spans.size() + 1);
  EXPECT_EQ(Send("POST", "/suggestions/" + span_id + "/accept").status, 409);

  r = Send("POST", "/suggestions/" + label_id + "/reject");
  EXPECT_EQ(r.body["suggestion"]["status"], "rejected");
  EXPECT_TRUE(server_->snapshot()->overrides.empty());
  EXPECT_EQ(Send("POST", "/suggestions/s999/accept").status, 404);

  // Sample report as the source of instances.
  EXPECT_EQ(Send("POST", "/llm/analyze", {{"strategy", "abstain"}}).status, 404);
  EXPECT_EQ(Send("POST", "/llm/analyze", json::object()).status, 400);
  EXPECT_EQ(Send("POST", "/llm/recommend", {{"instances", {"d1::Smith"}}}).status, 200);
}

TEST_F(ServerTest, LlmFailuresMapToGatewayErrors) {
  auto llm = std::make_shared<ScriptedLlm>();
  StartWith(testing::StanceProject(), llm);
  llm->failure = "malformed";
  Reply r = Send("POST", "/llm/analyze", {{"instances", {"d1::Smith"}}});
  EXPECT_EQ(r.status, 502);
  EXPECT_EQ(r.body["error"]["code"], "MalformedResponse");
  EXPECT_EQ(r.body["error"]["raw"], "not json");
  // The failed exchange is still audited.
  EXPECT_EQ(server_->snapshot()->audit.size(), 1u);

  llm->failure = "timeout";
  r = Send("POST", "/llm/analyze", {{"instances", {"d1::Smith"}}});
  EXPECT_EQ(r.status, 504);
  EXPECT_EQ(r.body["error"]["code"], "Timeout");
}

TEST_F(ServerTest, MutationsArePersisted) {
  testing::TempDir dir("server");
  const auto project_dir = dir.path() / "p";
  SaveProject(testing::StanceProject(), project_dir);
  StartWith(LoadProject(project_dir), nullptr, project_dir);
  ASSERT_EQ(Send("PATCH", "/instances/d1::Smith/label", {{"label", "Favor"}}).status, 200);
  EXPECT_EQ(RunAssignJob()["status"], "succeeded");
  const Project loaded = LoadProject(project_dir);
  EXPECT_EQ(loaded.revision, server_->snapshot()->revision);
  EXPECT_EQ(loaded.overrides.at("d1::Smith").label, "Favor");
  EXPECT_EQ(ExportConsensus(loaded), ExportConsensus(*server_->snapshot()));
}

TEST(ServerBindTest, AddressParsingAndBindErrors) {
  EXPECT_EQ(ParseBindAddress("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_EQ(ParseBindAddress("::1:9"), (std::pair<std::string, int>{"::1", 9}));
  for (const char* bad : {"localhost", ":80", "host:", "host:x", "host:70000", "host:80x"}) {
    EXPECT_THROW(ParseBindAddress(bad), Error) << bad;
  }
  Server a(testing::StanceProject());
  const int port = a.Bind("127.0.0.1", 0);
  Server b(testing::StanceProject());
  EXPECT_THROW(b.Bind("127.0.0.1", port), BindError);
  Server c(testing::StanceProject());
  EXPECT_THROW(c.Start(), Error);
}

TEST(ServerStatusTest, ErrorCodeMapping) {
  EXPECT_EQ(HttpStatusFor("SchemaError"), 400);
  EXPECT_EQ(HttpStatusFor("NotFound"), 404);
  EXPECT_EQ(HttpStatusFor("Conflict"), 409);
  EXPECT_EQ(HttpStatusFor("ValidationFailed"), 422);
  EXPECT_EQ(HttpStatusFor("HttpError"), 502);
  EXPECT_EQ(HttpStatusFor("LlmUnavailable"), 503);
  EXPECT_EQ(HttpStatusFor("Timeout"), 504);
  EXPECT_EQ(HttpStatusFor("SomethingElse"), 500);
}

}  // namespace
}  // namespace spanlab
