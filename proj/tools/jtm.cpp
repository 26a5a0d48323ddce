#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "jtm/cli/commands.hpp"

namespace {

std::string quoted(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch == '\n' ? ' ' : ch);
  }
  return out;
}

int fail(std::string_view kind, const std::string& message, int code) {
  std::cerr << "error: kind=" << kind << " message=\"" << quoted(message) << "\"\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Job title mapping pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  for (const auto& [name, fn] : jtm::cli::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config_path, "JSON run config; defaults apply when omitted");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("config", e.what(), 2);
  }
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const auto config = config_path.empty() ? jtm::cli::resolve_config(jtm::cli::Json::object())
                                            : jtm::cli::load_config(config_path);
    const auto result = jtm::cli::run(name, config);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& p : result.written) std::cout << p.string() << "\n";
    return 0;
  } catch (const jtm::Error& e) {
    return fail(jtm::error_kind_name(e.kind()), e.what(), jtm::exit_code_for(e.kind()));
  } catch (const nlohmann::json::exception& e) {
    return fail("format", e.what(), 3);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("data", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 4);
  }
}
