#include <CLI11.hpp>

#include "lexisafe/cli.hpp"
#include "lexisafe/errors.hpp"

int main(int argc, char** argv) {
  lexisafe::CliOptions opt;
  CLI::App app{"Offline lexicographic safe RL: data generation, training, evaluation and reporting"};
  app.add_option("command", opt.command, "gen-data | train | eval | sweep | ablate | report")->required();
  app.add_option("--config", opt.config, "run configuration file")->required();
  app.add_option("--out", opt.out, "output directory")->required();
  app.add_flag("--force", opt.force, "write into a non-empty output directory");
  app.add_option("--jobs", opt.jobs, "worker threads for sweep and ablate")->check(CLI::PositiveNumber);
  app.add_option("--policy", opt.policy, "policy checkpoint for eval");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(lexisafe::ExitCode::config_error);
  }
  return lexisafe::run_command(opt);
}
