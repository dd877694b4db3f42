#include <CLI11.hpp>

#include <iostream>

#include "dirac_darboux/cli.hpp"

namespace dd = dirac_darboux;
namespace ddc = dirac_darboux::cli;

int main(int argc, char** argv) {
  CLI::App app{"Exactly solvable Dirac Hamiltonians via Darboux transformations"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";
  auto* build = app.add_subcommand("build", "Write potentials.csv, bound_states.csv and model.json");
  build->add_option("config", config, "Model config (JSON)")->required();
  build->add_option("--out", out_dir, "Output directory");

  bool as_json = false;
  auto* verify = app.add_subcommand("verify", "Run the verification suite");
  verify->add_option("config", config, "Model config (JSON)")->required();
  verify->add_flag("--json", as_json, "Print the report as JSON");

  std::string energies;
  std::string out_file;
  auto* scatter = app.add_subcommand("scatter", "Reflection and transmission at the given energies");
  scatter->add_option("config", config, "Model config (JSON)")->required();
  scatter->add_option("--energies", energies, "Comma-separated energies")->required();
  scatter->add_option("--out", out_file, "Output CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const ddc::ModelConfig cfg = ddc::load_config(config);
    if (*scatter) {
      const std::vector<double> es = ddc::parse_energies(energies);
      const ddc::BuiltModel m = ddc::build_model(cfg);
      const std::string csv = ddc::scatter_csv(ddc::cmd_scatter(m, es));
      if (out_file.empty()) {
        std::cout << csv;
      } else {
        ddc::atomic_write(out_file, csv);
      }
      return 0;
    }
    const ddc::BuiltModel m = ddc::build_model(cfg);
    for (const auto& w : m.warnings) std::cerr << "warning: " << w << '\n';
    if (*build) {
      ddc::cmd_build(m, out_dir);
      return 0;
    }
    const ddc::Report r = ddc::cmd_verify(m);
    if (as_json) {
      std::cout << ddc::report_json(r).dump(2) << '\n';
    } else {
      std::cout << ddc::report_text(r);
    }
    return r.passed() ? 0 : 1;
  } catch (const dd::Error& e) {
    std::cerr << "error (" << dd::kind_name(e.kind()) << "): " << e.what() << '\n';
    return ddc::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
