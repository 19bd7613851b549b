#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "climsom/error.hpp"
#include "climsom/llm.hpp"
#include "climsom/project.hpp"

namespace climsom {

struct ServiceOptions {
  bool stub_llm = false;
  LlmSettings llm = LlmSettings::from_env();
  // Where PUT /project {"action": "save"} writes without an explicit path.
  std::optional<std::filesystem::path> project_path;
  std::size_t cache_entries = 64;
};

// JSON-over-HTTP API over one project. Analysis requests read consistent
// snapshots; edits and training completion are serialized.
class Service {
 public:
  explicit Service(ProjectState state, ServiceOptions options = {});
  ~Service();
  Service(Service const&) = delete;
  Service& operator=(Service const&) = delete;

  // Blocks until stop(). Returns false when the address cannot be bound.
  bool listen(std::string const& host, int port);
  // Binds to an ephemeral port and returns it (-1 on failure); follow with
  // listen_after_bind().
  int bind_to_any_port(std::string const& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

  // Current project state, for tests and the CLI.
  ProjectState snapshot() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// HTTP status for an engine error kind.
int http_status(ErrorKind kind);
char const* error_code(ErrorKind kind);

}  // namespace climsom
