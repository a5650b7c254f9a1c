#include <CLI11.hpp>

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "ntwist/cli.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  unsigned threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key=value run configuration")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "output directory (overrides config and environment)");
  sub->add_option("--threads", c.threads, "worker threads for independent paths");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariant circles of conformally symplectic maps"};
  app.require_subcommand(1);
  Common common;
  const char* names[] = {"continue", "breakdown", "rotnum-sweep", "twist-surface", "verify"};
  const char* help[] = {"continue a non-twist circle in eps", "continue to breakdown and extrapolate eps_c",
                        "rotation number along a parameter sweep", "continuation paths over a grid of a-twists",
                        "run the invariant checks"};
  for (int i = 0; i < 5; ++i) add_common(app.add_subcommand(names[i], help[i]), common);
  CLI11_PARSE(app, argc, argv);

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    ntwist::cli::RunConfig cfg = ntwist::cli::load_config(common.config);
    if (common.threads > 0) cfg.threads = common.threads;
    if (cmd == "verify") return ntwist::cli::cmd_verify(cfg, std::cout);
    const std::filesystem::path out = ntwist::cli::resolve_out_dir(cfg, common.out);
    if (cmd == "continue") return ntwist::cli::cmd_continue(cfg, out, std::cout);
    if (cmd == "breakdown") return ntwist::cli::cmd_breakdown(cfg, out, std::cout);
    if (cmd == "rotnum-sweep") return ntwist::cli::cmd_rotnum_sweep(cfg, out, std::cout);
    return ntwist::cli::cmd_twist_surface(cfg, out, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
