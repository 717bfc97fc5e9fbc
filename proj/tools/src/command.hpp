#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace srvfgan::cli {

enum class FieldKind { Param, Flag, Input, Output };

/// One flag of a subcommand as recorded in a run manifest.
struct Field {
  std::string flag;
  FieldKind kind = FieldKind::Param;
  std::function<nlohmann::json()> value;
  CLI::Option* option = nullptr;
};

struct Artifact {
  std::string flag;
  std::filesystem::path path;
  /// False for diagnostics that legitimately differ between runs.
  bool reproducible = true;
};

struct Context {
  unsigned threads = 1;
  std::ostream& log;
};

struct Outcome {
  std::vector<Artifact> outputs;
  nlohmann::json summary = nlohmann::json::object();
  /// Exit code for commands that report a verdict rather than throw.
  int exit_code = 0;
};

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description);

  template <typename T>
  CLI::Option* param(const std::string& flag, T& var, const std::string& description) {
    CLI::Option* opt = app_->add_option(flag, var, description);
    fields_.push_back({flag, FieldKind::Param, [&var] { return nlohmann::json(var); }, opt});
    return opt;
  }
  CLI::Option* flag(const std::string& flag, bool& var, const std::string& description);
  /// Existing file; recorded as an absolute path with its checksum.
  CLI::Option* input(const std::string& flag, std::string& var, const std::string& description);
  /// Recorded as an absolute path; replay redirects it.
  CLI::Option* output(const std::string& flag, std::string& var, const std::string& description);

  CLI::App* app() const noexcept { return app_; }
  const std::string& name() const noexcept { return app_->get_name(); }
  const std::vector<Field>& fields() const noexcept { return fields_; }

  /// Whether a manifest is written after a successful run.
  bool writes_manifest = true;
  std::function<Outcome(const Context&)> run;
  /// Keeps the option storage alive.
  std::shared_ptr<void> state;

 private:
  CLI::App* app_;
  std::vector<Field> fields_;
};

using CommandList = std::vector<std::unique_ptr<Command>>;

/// Registers every pipeline subcommand on `app`.
void add_pipeline_commands(CLI::App& app, CommandList& commands);

/// Manifest helpers.
struct FileDigest {
  std::uintmax_t bytes = 0;
  std::string sha256;
};
FileDigest digest_file(const std::filesystem::path& path);
std::string absolute_string(const std::string& path);

}  // namespace srvfgan::cli
