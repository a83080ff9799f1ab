#include <CLI11.hpp>
#include <cstdint>
#include <optional>
#include <string>

#include "tsln/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"two-stage small area estimation pipeline"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
  };
  std::map<std::string, Args> args;
  for (const char* name : {"simulate", "fit", "summarize", "experiment"}) {
    auto* sub = app.add_subcommand(name);
    auto& a = args[name];
    sub->add_option("--config", a.config, "JSON config file")->required();
    sub->add_option("--out", a.out, "output directory");
    sub->add_option("--seed", a.seed, "seed override");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : tsln::pipeline::kExitConfig;
  }

  std::string cmd = app.get_subcommands().front()->get_name();
  const Args& a = args[cmd];
  return tsln::pipeline::run_command(cmd, a.config, a.out, a.seed);
}
