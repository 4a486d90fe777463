#include <iostream>

#include "CLI11.hpp"
#include "otlab/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"otlab: optimal transport experiments"};
  app.set_version_flag("--version", otlab::version);
  app.require_subcommand(1);

  otlab::cli::Invocation inv;
  std::uint64_t seed = 0;
  int threads = 1;
  const std::pair<const char*, const char*> commands[] = {
      {"solve-ot", "solve one transport problem and write plan, potentials and map"},
      {"verify-5g", "run a five-gradients batch and write one report per instance"},
      {"jko", "run the minimizing-movement scheme, optionally against the reference PDE"},
      {"mollify-study", "track the solution as the cost is mollified with shrinking epsilon"},
      {"ctransform", "apply the c-transform to a potential stored as a field CSV"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", inv.config, "config file (JSON)")->required();
    sub->add_option("--out", inv.out, "output directory (created if missing)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->callback([&inv, sub, name = std::string(name), &seed, &threads] {
      inv.command = name;
      if (sub->count("--seed")) inv.seed = seed;
      if (sub->count("--threads")) inv.threads = threads;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : otlab::cli::config_error;
  }
  return otlab::cli::run(inv, std::cerr);
}
