#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "doa_rmt/doa_rmt.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

doa::OutputFormat format_for(const std::filesystem::path& p) {
  return p.extension() == ".json" ? doa::OutputFormat::json : doa::OutputFormat::csv;
}

std::string x_label(const doa::ExperimentConfig& cfg) {
  return cfg.sweep ? doa::to_string(cfg.sweep->axis) : "N";
}

void report_flags(const doa::SweepResult& r) {
  if (r.failed_points)
    std::cerr << "warning: " << r.failed_points << " of " << r.points << " points rejected every trial\n";
}

int cmd_theory(const std::string& config_path, const std::string& out) {
  const auto cfg = doa::load_config(config_path);
  doa::json doc;
  if (cfg.sweep) {
    doc = doa::json::array();
    for (double v : cfg.sweep->values) {
      auto item = doa::theory_report(cfg, doa::SweepPoint{cfg.sweep->axis, v});
      item["sweep_value"] = v;
      doc.push_back(item);
    }
  } else {
    doc = doa::theory_report(cfg);
  }
  const std::string text = doc.dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else doa::harness::write_file(out, text);
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, std::size_t trials, std::uint64_t seed, const std::string& out) {
  auto cfg = doa::load_config(config_path);
  if (trials < 1) throw doa::ConfigError("--trials must be >= 1");
  cfg.trials = trials;
  cfg.master_seed = seed;
  cfg.sweep.reset();
  const auto r = doa::run_sweep(cfg);
  doa::emit_outputs(r, format_for(out), out, x_label(cfg));
  report_flags(r);
  return r.failed_points == r.points ? kExitNumerical : kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out, const std::string& plotdata) {
  const auto cfg = doa::load_config(config_path);
  const auto r = doa::run_sweep(cfg);
  doa::emit_outputs(r, format_for(out), out, x_label(cfg));
  if (!plotdata.empty()) doa::emit_outputs(r, doa::OutputFormat::plotdata, plotdata, x_label(cfg));
  report_flags(r);
  return r.failed_points == r.points ? kExitNumerical : kExitOk;
}

int cmd_crb(const std::string& config_path) {
  const auto cfg = doa::load_config(config_path);
  const auto s = cfg.resolve();
  const auto bound = doa::crb(s);
  doa::json doc;
  doc["N"] = s.N;
  doc["K"] = s.K;
  doc["theta_true"] = s.thetas;
  doc["crb"] = bound;
  std::cout << doc.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-array direction-of-arrival estimation with random matrix corrections"};
  app.require_subcommand(1);

  std::string config_path, out, plotdata;
  std::size_t trials = 0;
  std::uint64_t seed = 0;

  auto* theory = app.add_subcommand("theory", "Deterministic limits, bias factors and thresholds");
  theory->add_option("--config", config_path, "JSON config")->required();
  theory->add_option("--out", out, "Output JSON file (stdout if omitted)");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo run at a single scenario");
  simulate->add_option("--config", config_path, "JSON config")->required();
  simulate->add_option("--trials", trials, "Number of trials")->required();
  simulate->add_option("--seed", seed, "Master seed")->required();
  simulate->add_option("--out", out, "Output CSV (or .json) file")->required();

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo run over the configured sweep");
  sweep->add_option("--config", config_path, "JSON config")->required();
  sweep->add_option("--out", out, "Output CSV (or .json) file")->required();
  sweep->add_option("--plotdata", plotdata, "Directory for per-method plot tables");

  auto* crb = app.add_subcommand("crb", "Cramer-Rao bound per source");
  crb->add_option("--config", config_path, "JSON config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*theory) return cmd_theory(config_path, out);
    if (*simulate) return cmd_simulate(config_path, trials, seed, out);
    if (*sweep) return cmd_sweep(config_path, out, plotdata);
    if (*crb) return cmd_crb(config_path);
  } catch (const doa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const doa::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const doa::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
