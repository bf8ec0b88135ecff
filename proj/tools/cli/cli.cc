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

#include "cli/cli.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "spanlab/server.h"
#include "spanlab/simulation.h"

namespace spanlab::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Globals {
  std::string project;
  std::optional<std::uint64_t> seed;
  std::string format;  // empty: per-command default (CSV for simulate)
  std::string out;
};

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ReadJsonFile(const std::string& path) {
  json j = json::parse(ReadFile(path), nullptr, false);
  if (j.is_discarded()) throw SchemaError("", path + " is not valid JSON");
  return j;
}

std::string Dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

void Emit(const Globals& g, const std::string& text, std::ostream& out) {
  if (g.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(g.out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("IoError", "cannot write '" + g.out + "'");
  f << text;
}

const std::string& RequireProject(const Globals& g) {
  if (g.project.empty()) throw Error("InvalidArgument", "--project is required");
  return g.project;
}

json ViolationsJson(const ValidationReport& report) {
  json out = json::array();
  for (const Violation& v : report.violations) {
    out.push_back({{"code", v.code}, {"path", v.path}, {"message", v.message}});
  }
  return out;
}

std::string MetricsCsv(const MetricsSnapshot& m) {
  char acc[32] = "";
  if (m.accuracy) std::snprintf(acc, sizeof(acc), "%.6f", *m.accuracy);
  char line[256];
  std::snprintf(line, sizeof(line), "%lld,%s,%.6f,%.6f,%zu,%zu,%zu\n",
                static_cast<long long>(m.revision), acc, m.coverage,
                m.conflict_rate, m.lf_count, m.override_count, m.instance_count);
  return std::string("revision,accuracy,coverage,conflict_rate,lf_count,"
                     "override_count,instance_count\n") + line;
}

int Ingest(const Globals& g, const std::string& data, const std::string& task_path,
           const std::string& bundle_path, const std::string& config_path,
           bool force, std::ostream& out) {
  const fs::path dir = RequireProject(g);
  if (fs::exists(dir / "project.json") && !force) {
    throw Error("AlreadyExists", dir.string() + " already holds a project");
  }
  std::optional<LfBundle> bundle;
  if (!bundle_path.empty()) bundle = BundleFromJson(ReadJsonFile(bundle_path));
  TaskDefinition task;
  if (!task_path.empty()) {
    task = TaskFromJson(ReadJsonFile(task_path));
  } else if (bundle && bundle->task) {
    task = *bundle->task;
  } else {
    throw Error("InvalidArgument", "--task is required unless the bundle holds one");
  }
  ProjectConfig config;
  if (!config_path.empty()) config = ProjectConfigFromJson(ReadJsonFile(config_path));
  if (g.seed) config.seed = *g.seed;
  if (config.id == ProjectConfig{}.id) config.id = dir.filename().string();

  Project p = CreateProject(std::move(task), LoadDataset(data), config);
  if (bundle) {
    for (const SpanSet& s : bundle->span_sets) PutSpanSet(p, s);
    for (const LabelingFunction& lf : bundle->lfs) PutLf(p, lf);
  }
  SaveProject(p, dir);
  Emit(g,
       Dump({{"project", dir.string()},
             {"documents", p.corpus->size()},
             {"instances", p.instances().size()},
             {"span_sets", p.span_sets.size()},
             {"labeling_functions", p.lfs.size()},
             {"revision", p.revision}}) + "\n",
       out);
  return kExitOk;
}

int ValidateLfCmd(const Globals& g, const std::string& path, std::ostream& out) {
  const LabelingFunction lf = ParseLf(ReadFile(path));
  ValidationReport report;
  if (!g.project.empty()) {
    const Project p = LoadProject(g.project);
    report = ValidateLf(lf, p.span_sets, p.task);
  }
  if (!report.ok()) throw ValidationFailedError(report);
  Emit(g, Dump({{"ok", true}, {"id", lf.id}, {"violations", json::array()}}) + "\n", out);
  return kExitOk;
}

int Label(const Globals& g, std::ostream& out) {
  Project p = LoadProject(RequireProject(g));
  if (g.seed) p.config.seed = *g.seed;
  AssignLabels(p);
  SaveProject(p, g.project);
  Emit(g, g.format == "csv" ? ConsensusCsv(p) : ExportConsensus(p), out);
  return kExitOk;
}

int Sample(const Globals& g, const std::string& strategy, double fraction,
           std::ostream& out) {
  Project p = LoadProject(RequireProject(g));
  const SamplerReport report = RunSampler(p, SamplerStrategyFromString(strategy), fraction);
  SaveProject(p, g.project);
  if (g.format == "csv") {
    std::string csv = "instance,score\n";
    for (const std::string& key : report.selected) {
      char score[64];
      std::snprintf(score, sizeof(score), "%.17g", report.scores.at(key));
      csv += key + "," + score + "\n";
    }
    Emit(g, csv, out);
  } else {
    Emit(g, Dump(SamplerReportToJson(report)) + "\n", out);
  }
  return kExitOk;
}

int Eval(const Globals& g, std::ostream& out) {
  const Project p = LoadProject(RequireProject(g));
  const MetricsSnapshot m = Evaluate(p);
  Emit(g, g.format == "csv" ? MetricsCsv(m) : Dump(MetricsToJson(m)) + "\n", out);
  return kExitOk;
}

std::string RowsOutput(const Globals& g,
                       const std::vector<std::pair<std::string, std::vector<SimulationRow>>>& runs) {
  if (g.format == "json") {
    json all = json::array();
    for (const auto& [name, rows] : runs) {
      for (const SimulationRow& r : rows) {
        json row = {{"iteration", r.iteration},  {"accuracy", r.accuracy},
                    {"coverage", r.coverage},    {"conflict_rate", r.conflict_rate},
                    {"overrides", r.overrides},  {"lf_count", r.lf_count}};
        if (!name.empty()) row["config"] = name;
        all.push_back(std::move(row));
      }
    }
    return Dump(all) + "\n";
  }
  std::string csv;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::string part = SimulationCsv(runs[i].second, runs[i].first);
    if (i > 0) part.erase(0, part.find('\n') + 1);  // one header
    csv += part;
  }
  return csv;
}

int Simulate(const Globals& g, const std::string& policy_path, std::size_t synthetic,
             const std::string& arm, int iterations, std::size_t reviews,
             std::ostream& out) {
  std::vector<std::pair<std::string, std::vector<SimulationRow>>> runs;
  if (synthetic > 0) {
    const SyntheticScenario scenario =
        MakeSyntheticScenario(synthetic, g.seed.value_or(42), iterations);
    std::vector<AblationArm> arms;
    for (AblationArm a : {AblationArm::kDp, AblationArm::kDpAl, AblationArm::kDpAlLlm}) {
      if (arm == "all" || arm == ToString(a)) arms.push_back(a);
    }
    if (arms.empty()) throw Error("InvalidArgument", "unknown arm '" + arm + "'");
    ProjectConfig config;
    config.seed = g.seed.value_or(42);
    for (AblationArm a : arms) {
      MockChatClient mock(LexiconResponder(scenario.lexicon));
      SimulationResult result = RunSimulation(
          ScenarioProject(scenario, config),
          AblationPolicy(scenario, a, iterations, reviews), &mock);
      runs.emplace_back(arms.size() > 1 ? std::string(ToString(a)) : "",
                        std::move(result.rows));
    }
  } else {
    if (policy_path.empty()) {
      throw Error("InvalidArgument", "simulate needs --policy or --synthetic");
    }
    Project p = LoadProject(RequireProject(g));
    if (g.seed) p.config.seed = *g.seed;
    const SimulationPolicy policy = SimulationPolicyFromJson(ReadJsonFile(policy_path));
    runs.emplace_back("", RunSimulation(std::move(p), policy).rows);
  }
  Emit(g, RowsOutput(g, runs), out);
  return kExitOk;
}

int Serve(const Globals& g, const std::string& bind, const std::string& endpoint,
          const std::string& model, const std::string& key_env, std::ostream& out) {
  Project p = LoadProject(RequireProject(g));
  LlmClientConfig llm = p.config.llm;
  if (!endpoint.empty()) llm.endpoint = endpoint;
  if (!model.empty()) llm.model = model;
  if (!key_env.empty()) llm.api_key_env = key_env;
  ServerOptions options;
  options.project_dir = g.project;
  if (!llm.endpoint.empty()) options.llm = std::make_shared<HttpChatClient>(llm);
  const auto [host, port] = ParseBindAddress(bind);
  Server server(std::move(p), std::move(options));
  const int bound = server.Bind(host, port);
  out << Dump({{"listening", host + ":" + std::to_string(bound)}}) << std::endl;
  server.Run();
  return kExitOk;
}

void PrintError(const Error& e, std::ostream& err) {
  json body = {{"error", {{"code", e.code()}, {"message", e.what()}}}};
  if (const auto* v = dynamic_cast<const ValidationFailedError*>(&e)) {
    body["error"]["violations"] = ViolationsJson(v->report());
  }
  if (const auto* s = dynamic_cast<const SchemaError*>(&e)) {
    body["error"]["path"] = s->path();
  }
  err << Dump(body) << "\n";
}

}  // namespace

std::string ConsensusCsv(const Project& p) {
  if (!p.consensus) throw StaleConsensusError("run label first");
  const ConsensusState& c = *p.consensus;
  std::string csv = "instance,label,source";
  for (const std::string& cat : c.categories) csv += ",p_" + cat;
  csv += "\n";
  for (std::size_t i = 0; i < c.instance_keys.size(); ++i) {
    const std::string key = c.instance_keys[i].ToString();
    csv += key + "," + c.hard[i] + "," + (c.overrides.count(key) ? "override" : "model");
    for (double v : c.probs[i]) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      csv += buf;
    }
    csv += "\n";
  }
  return csv;
}

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"spanlab: weak-supervision text labeling workbench", "spanlab"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--project", g.project, "Project directory");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--format", g.format, "Output format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--out", g.out, "Write results to this file instead of stdout");

  std::string data, task, bundle, config;
  bool force = false;
  auto* ingest = app.add_subcommand("ingest", "Create a project from a dataset");
  ingest->add_option("--data", data, "JSONL or CSV dataset")->required();
  ingest->add_option("--task", task, "Task definition JSON");
  ingest->add_option("--lfs", bundle, "Bundle of span sets and labeling functions");
  ingest->add_option("--config", config, "Project configuration JSON");
  ingest->add_flag("--force", force, "Overwrite an existing project");

  std::string lf_path;
  auto* validate = app.add_subcommand("validate-lf", "Check a labeling function file");
  validate->add_option("file", lf_path, "Labeling function JSON")->required();

  auto* label = app.add_subcommand("label", "Run assign-labels and export the consensus");

  std::string strategy;
  double fraction = kDefaultSampleFraction;
  auto* sample = app.add_subcommand("sample", "Run an active-learning sampler");
  sample->add_option("--strategy", strategy, "margin, vote_entropy or abstain")->required();
  sample->add_option("--fraction", fraction, "Fraction of instances to select");

  auto* eval = app.add_subcommand("eval", "Evaluate the current labels against gold");

  std::string policy, arm = "all";
  std::size_t synthetic = 0;
  int iterations = 5;
  std::size_t reviews = 20;
  auto* simulate = app.add_subcommand("simulate", "Run the scripted annotator loop");
  auto* policy_opt =
      simulate->add_option("--policy", policy, "Simulation policy JSON (uses --project)");
  simulate->add_option("--synthetic", synthetic,
                       "Run the ablation on a synthetic corpus of N documents")
      ->excludes(policy_opt);
  simulate->add_option("--arm", arm, "dp, dp_al, dp_al_llm or all")
      ->check(CLI::IsMember({"dp", "dp_al", "dp_al_llm", "all"}));
  simulate->add_option("--iterations", iterations, "Iterations for --synthetic")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--reviews", reviews, "Reviews per iteration for --synthetic");

  std::string bind = "127.0.0.1:8080", endpoint, model, key_env;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--bind", bind, "HOST:PORT");
  serve->add_option("--llm-endpoint", endpoint, "OpenAI-compatible base URL");
  serve->add_option("--llm-model", model, "Model name");
  serve->add_option("--llm-key-env", key_env, "Environment variable holding the API key");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) return Ingest(g, data, task, bundle, config, force, out);
    if (*validate) return ValidateLfCmd(g, lf_path, out);
    if (*label) return Label(g, out);
    if (*sample) return Sample(g, strategy, fraction, out);
    if (*eval) return Eval(g, out);
    if (*simulate) return Simulate(g, policy, synthetic, arm, iterations, reviews, out);
    if (*serve) return Serve(g, bind, endpoint, model, key_env, out);
  } catch (const Error& e) {
    PrintError(e, err);
    return kExitError;
  } catch (const std::exception& e) {
    PrintError(Error("Internal", e.what()), err);
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace spanlab::cli
