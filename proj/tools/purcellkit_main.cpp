#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "purcellkit/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "purcellkit: microring cavity-QED design, simulation and "
      "measurement-analysis toolkit"};
  app.require_subcommand(1);

  purcellkit::CliOptions opt;
  std::uint64_t seed_value = 0;

  struct SubDesc {
    const char* name;
    const char* help;
  };
  const SubDesc subs[] = {
      {"design", "efficiency breakdown for one emitter-ring design point"},
      {"sweep", "grid sweeps, coupling-Q optimization and preset ranking"},
      {"calibrate",
       "spectral Purcell extraction from a free-space/waveguide spectrum pair"},
      {"fit", "comb, g2 or thickness-series fits of measured data"},
      {"verify",
       "compare the master-equation oracle against the rate-equation map"},
      {"synthesize", "generate the two detection-channel spectra for a design"},
  };
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", opt.config_path,
                    "run configuration file (.toml or .json)")
        ->required();
    sub->add_option("--out", opt.out_dir, "output directory")
        ->default_str(".");
    sub->add_option("--seed", seed_value,
                    "overrides the seed given in the config");
    sub->add_flag("--plot", opt.plot, "also write SVG plots");
    sub->callback([&opt, name = std::string(s.name)] { opt.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const CLI::App* active = app.get_subcommands().front();
  if (active->count("--seed") > 0) opt.seed = seed_value;

  return purcellkit::run_command(opt, std::cout, std::cerr);
}
