#include "srvfgan_cli/cli.hpp"

#include "command.hpp"

#include "srvfgan/error.hpp"
#include "srvfgan/version.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

namespace srvfgan::cli {

using nlohmann::json;

Command::Command(CLI::App& parent, const std::string& name, const std::string& description)
    : app_(parent.add_subcommand(name, description)) {}

CLI::Option* Command::flag(const std::string& flag, bool& var, const std::string& description) {
  CLI::Option* opt = app_->add_flag(flag, var, description);
  fields_.push_back({flag, FieldKind::Flag, [&var] { return json(var); }, opt});
  return opt;
}

CLI::Option* Command::input(const std::string& flag, std::string& var, const std::string& description) {
  CLI::Option* opt = app_->add_option(flag, var, description)->check(CLI::ExistingFile);
  fields_.push_back({flag, FieldKind::Input, [&var] { return json(absolute_string(var)); }, opt});
  return opt;
}

CLI::Option* Command::output(const std::string& flag, std::string& var, const std::string& description) {
  CLI::Option* opt = app_->add_option(flag, var, description);
  fields_.push_back({flag, FieldKind::Output, [&var] { return json(absolute_string(var)); }, opt});
  return opt;
}

std::string absolute_string(const std::string& path) {
  if (path.empty()) return path;
  return std::filesystem::absolute(path).lexically_normal().string();
}

FileDigest digest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::IoError, "SHA-256 unavailable");
  }
  FileDigest d;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = in.gcount();
    if (n <= 0) break;
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(n));
    d.bytes += static_cast<std::uintmax_t>(n);
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    d.sha256 += kHex[md[i] >> 4];
    d.sha256 += kHex[md[i] & 15];
  }
  return d;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json digest_json(const std::string& flag, const std::filesystem::path& path) {
  const FileDigest d = digest_file(path);
  return {{"flag", flag}, {"path", absolute_string(path.string())}, {"bytes", d.bytes}, {"sha256", d.sha256}};
}

json build_manifest(const Command& cmd, const Outcome& outcome, unsigned threads, const std::string& started,
                    double seconds) {
  json config = json::object();
  json inputs = json::array();
  json output_flags = json::array();
  for (const auto& f : cmd.fields()) {
    config[f.flag] = f.value();
    if (f.kind == FieldKind::Output) output_flags.push_back(f.flag);
    if (f.kind == FieldKind::Input && f.option->count() > 0) inputs.push_back(digest_json(f.flag, config[f.flag]));
  }
  json outputs = json::array();
  for (const auto& a : outcome.outputs) {
    json entry = digest_json(a.flag, a.path);
    entry["reproducible"] = a.reproducible;
    outputs.push_back(std::move(entry));
  }
  json m;
  m["format"] = "srvfgan-manifest/1";
  m["tool"] = "srvfgan";
  m["version"] = kVersion;
  m["command"] = cmd.name();
  m["config"] = std::move(config);
  m["output_flags"] = std::move(output_flags);
  m["seed"] = m["config"].contains("--seed") ? m["config"]["--seed"] : json(nullptr);
  m["threads"] = threads;
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  m["summary"] = outcome.summary;
  m["started_utc"] = started;
  m["wall_seconds"] = seconds;
  return m;
}

/// Turns a manifest config back into subcommand arguments.
std::vector<std::string> config_arguments(const json& config, const std::map<std::string, std::string>& redirect) {
  std::vector<std::string> args;
  for (const auto& [flag, value] : config.items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
      continue;
    }
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
      if (text.empty()) continue;
      if (const auto it = redirect.find(flag); it != redirect.end()) text = it->second;
    } else if (value.is_array()) {
      for (const auto& v : value) text += (text.empty() ? "" : ",") + v.dump();
    } else {
      text = value.dump();
    }
    args.push_back(flag);
    args.push_back(text);
  }
  return args;
}

struct ReplayState {
  std::string manifest;
  std::string into;
};

/// Re-runs a manifest's command with outputs redirected into a directory and
/// compares every reproducible artifact with the recorded SHA-256.
Outcome replay(const ReplayState& s, unsigned threads, std::ostream& out, std::ostream& log) {
  std::ifstream in(s.manifest);
  if (!in) throw Error(Errc::IoError, "cannot read '" + s.manifest + "'");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, "'" + s.manifest + "': " + e.what());
  }
  if (m.value("format", "") != "srvfgan-manifest/1") {
    throw Error(Errc::SchemaError, "'" + s.manifest + "' is not a srvfgan run manifest");
  }
  for (const auto& input : m.at("inputs")) {
    const auto path = input.at("path").get<std::string>();
    const FileDigest d = digest_file(path);
    if (d.sha256 != input.at("sha256").get<std::string>() || d.bytes != input.at("bytes").get<std::uintmax_t>()) {
      throw Error(Errc::SchemaError, "input " + path + " changed since the manifest was written");
    }
  }
  const std::filesystem::path into =
      s.into.empty() ? std::filesystem::path(s.manifest).replace_extension("").string() + ".replay" : s.into;
  std::filesystem::create_directories(into);

  std::map<std::string, std::string> redirect;
  const json& config = m.at("config");
  for (const auto& flag_json : m.at("output_flags")) {
    const auto flag = flag_json.get<std::string>();
    const auto original = config.at(flag).get<std::string>();
    if (!original.empty()) redirect[flag] = (into / std::filesystem::path(original).filename()).string();
  }
  std::vector<std::string> args{"--threads", std::to_string(threads), "--manifest",
                                (into / "replay.manifest.json").string(), m.at("command").get<std::string>()};
  for (auto& a : config_arguments(config, redirect)) args.push_back(std::move(a));
  log << "replaying " << m.at("command").get<std::string>() << " into " << into.string() << "\n";
  const int rc = run(args, out, log);
  if (rc != kExitOk) throw Error(Errc::SchemaError, "replayed command exited with " + std::to_string(rc));

  Outcome o;
  std::size_t compared = 0, mismatched = 0;
  for (const auto& entry : m.at("outputs")) {
    if (!entry.value("reproducible", true)) continue;
    const auto original = std::filesystem::path(entry.at("path").get<std::string>());
    // Multi-file outputs share the flag's prefix, so the file name is kept.
    const auto replayed = into / original.filename();
    ++compared;
    const bool exists = std::filesystem::exists(replayed);
    const FileDigest d = exists ? digest_file(replayed) : FileDigest{};
    const bool same = exists && d.sha256 == entry.at("sha256").get<std::string>() &&
                      d.bytes == entry.at("bytes").get<std::uintmax_t>();
    if (!same) ++mismatched;
    log << (same ? "identical  " : "DIFFERENT  ") << replayed.string() << "\n";
  }
  o.summary = {{"compared", compared}, {"mismatched", mismatched}};
  o.exit_code = mismatched == 0 ? kExitOk : kExitData;
  return o;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Elastic SRVF motion modelling, MotionGAN training and geometric evaluation", "srvfgan"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 1;
  std::string manifest_path;
  app.add_option("--threads", threads, "Worker threads for parallel stages")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
  app.add_option("--manifest", manifest_path, "Run manifest path (default: <first output>.manifest.json)");

  CommandList commands;
  add_pipeline_commands(app, commands);

  ReplayState replay_state;
  CLI::App* replay_app =
      app.add_subcommand("replay", "Re-run a manifest's command and verify its artifacts byte for byte");
  replay_app->add_option("--manifest", replay_state.manifest, "Run manifest")->required()->check(CLI::ExistingFile);
  replay_app->add_option("--into", replay_state.into, "Directory for the replayed artifacts");

  std::vector<const char*> argv{"srvfgan"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (replay_app->parsed()) {
      const Outcome o = replay(replay_state, threads, out, err);
      return o.exit_code;
    }
    for (const auto& cmd : commands) {
      if (!cmd->app()->parsed()) continue;
      const std::string started = utc_now();
      const auto t0 = std::chrono::steady_clock::now();
      const Outcome o = cmd->run(Context{threads, err});
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (cmd->writes_manifest && !o.outputs.empty()) {
        const json m = build_manifest(*cmd, o, threads, started, seconds);
        const std::filesystem::path path =
            manifest_path.empty() ? std::filesystem::path(o.outputs.front().path.string() + ".manifest.json")
                                  : std::filesystem::path(manifest_path);
        std::ofstream mf(path, std::ios::binary | std::ios::trunc);
        mf << m.dump(2) << '\n';
        if (!mf) throw Error(Errc::IoError, "cannot write manifest '" + path.string() + "'");
        err << "manifest " << path.string() << "\n";
      }
      return o.exit_code;
    }
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? kExitNumerical : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace srvfgan::cli
