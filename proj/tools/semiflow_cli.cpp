// semiflow funnel|select|markov|reproduce|verify [--config FILE] [--out DIR] [--seed N] [--timing]
//
// Exit status: 0 when every check passes, 1 when a check fails (the report is
// still written), 2 on configuration or I/O errors.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "semiflow/semiflow.hpp"

namespace {

using Command = std::function<semiflow::RunReport(const semiflow::ExperimentConfig&, const std::filesystem::path&)>;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiflow and Markov selection experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool timing = false;

  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"funnel", {"Generate integral funnels for the configured initial states", semiflow::cmd_funnel}},
      {"select", {"Run the semiflow selection and check the semigroup identity", semiflow::cmd_select}},
      {"markov", {"Markov selection suite on controlled chains", semiflow::cmd_markov}},
      {"reproduce", {"Heaviside worked example: threshold, closed forms, ordering contrast", semiflow::cmd_reproduce}},
      {"verify", {"Shift/splice closure, cocycle identity and semigroup checks", semiflow::cmd_verify}},
  };
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_flag("--timing", timing, "Add wall time to the printed report");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    semiflow::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = semiflow::load_config(config_path);
    if (seed) cfg.seed = *seed;
    semiflow::validate(cfg);

    const auto t0 = std::chrono::steady_clock::now();
    auto report = commands.at(name).second(cfg, out_dir);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (const auto& c : report.checks) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " defect=" << semiflow::io::format_double(c.defect)
                << " tol=" << semiflow::io::format_double(c.tol);
      if (!c.pass && !c.witness.empty()) std::cout << " (" << c.witness << ")";
      std::cout << "\n";
    }
    if (timing) std::cout << "wall_seconds " << report.wall_seconds << "\n";
    std::cout << "report " << (std::filesystem::path(out_dir) / (name + "_report.json")).string() << "\n";
    return report.pass() ? 0 : 1;
  } catch (const semiflow::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
  } catch (const semiflow::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
  } catch (const semiflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
  }
  return 2;
}
