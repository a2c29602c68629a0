#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "oseen/cli.hpp"
#include "oseen/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "oseen-stab: oblique boundary feedback for the linearized channel "
      "flow — spectra, feedback design, simulation, and verification"};
  std::string command, config_path, out_dir;
  app.add_option("command", command, "spectrum|design|simulate|verify|sweep")
      ->required()
      ->check(CLI::IsMember(
          {"spectrum", "design", "simulate", "verify", "sweep"}));
  app.add_option("--config", config_path, "path to a key = value config file")
      ->required();
  app.add_option("--out", out_dir,
                 "output directory (overrides the config's output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::cerr << "ConfigError: cannot open config file '" << config_path
                << "'\n";
      return 2;
    }
    std::ostringstream buf;
    buf << in.rdbuf();

    oseen::RunConfig cfg = oseen::parse_config(buf.str());
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    return oseen::run_command(command, cfg);
  } catch (const oseen::error& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
