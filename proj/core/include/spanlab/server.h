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

// HTTP JSON API over a project: copy-on-write snapshots for readers, one
// writer at a time, revision-checked mutations and background assign-labels
// jobs.

#ifndef SPANLAB_SERVER_H_
#define SPANLAB_SERVER_H_

#include <filesystem>
#include <memory>
#include <string>

#include "spanlab/error.h"
#include "spanlab/llm.h"
#include "spanlab/project.h"

namespace spanlab {

struct ServerOptions {
  // Saved after every mutation when non-empty.
  std::filesystem::path project_dir;
  // Null disables the /llm endpoints (503).
  std::shared_ptr<ChatClient> llm;
  std::size_t llm_concurrency = 4;
  std::size_t default_page_size = 50;
};

class BindError : public Error {
 public:
  explicit BindError(const std::string& address)
      : Error("BindError", "cannot bind to " + address) {}
};

// HTTP status used for an error code in JSON error bodies.
int HttpStatusFor(const std::string& error_code);

class Server {
 public:
  Server(Project project, ServerOptions options = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Port 0 picks a free port. Returns the bound port.
  int Bind(const std::string& host, int port);
  // Serves until Stop(). Requires Bind().
  void Run();
  // Run() on a background thread.
  void Start();
  void Stop();

  std::shared_ptr<const Project> snapshot() const;
  // Blocks until all submitted jobs have finished.
  void WaitForJobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// "host:port" -> pair; throws Error("InvalidArgument").
std::pair<std::string, int> ParseBindAddress(const std::string& address);

}  // namespace spanlab

#endif  // SPANLAB_SERVER_H_
