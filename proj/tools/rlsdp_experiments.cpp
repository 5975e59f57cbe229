// Sweep harness: sweep-dpp, mae-table, sweep-mixture.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rlsdp/experiments.hpp"

namespace ex = rlsdp::experiments;

namespace {

struct Overrides {
  std::string spec_path;
  std::string out = "out";
  std::optional<std::size_t> replicates;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::vector<std::string> methods;
  std::vector<double> fractions;
  std::vector<double> ratios;
  std::vector<std::string> settings;

  void attach(CLI::App* cmd) {
    cmd->add_option("--spec", spec_path, "JSON sweep spec")->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--replicates", replicates);
    cmd->add_option("--seed", seed);
    cmd->add_option("--workers", workers, "worker threads (0 = all cores)");
    cmd->add_option("--methods", methods, "SWA, HMC, Binomial");
    cmd->add_option("--fractions", fractions, "training fractions in (0, 1)");
    cmd->add_option("--ratios", ratios, "agree ratios for the mixture sweep");
    cmd->add_option("--set", settings, "inference key=value, e.g. hmc.n_samples=300");
  }

  ex::SweepSpec spec() const {
    auto s = spec_path.empty() ? ex::SweepSpec{} : ex::load_spec(spec_path);
    if (replicates) s.replicates = *replicates;
    if (seed) s.seed = *seed;
    if (workers) s.workers = *workers;
    if (!methods.empty()) {
      s.methods.clear();
      for (const auto& m : methods) s.methods.push_back(rlsdp::method_from_string(m));
    }
    if (!fractions.empty()) s.fractions = fractions;
    if (!ratios.empty()) s.ratios = ratios;
    for (const auto& kv : settings) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw rlsdp::Error(rlsdp::Errc::invalid_argument, "--set expects key=value");
      s.inference[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    s.validate();
    s.inference_settings();
    return s;
  }
};

void log_progress(const std::string& what, const std::vector<ex::RunRecord>& runs) {
  std::size_t failed = 0;
  for (const auto& r : runs) failed += r.status != "ok";
  std::cerr << what << ": " << runs.size() << " runs, " << failed << " failed\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated sweeps for the dialogue inference pipeline"};
  app.require_subcommand(1);
  Overrides dpp, mae, mix;
  dpp.attach(app.add_subcommand("sweep-dpp", "accuracy and posterior std against data per participant"));
  mae.attach(app.add_subcommand("mae-table", "SWA vs HMC confidence MAE and runtime by DPP bin"));
  mix.attach(app.add_subcommand("sweep-mixture", "accuracy against the agreement/pair-choice mix"));
  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("sweep-dpp")) {
      const auto spec = dpp.spec();
      const auto runs = ex::run_dpp_sweep(spec);
      ex::write_runs(dpp.out, runs);
      ex::write_summary(dpp.out, ex::summarize(runs));
      ex::write_manifest(dpp.out, spec, "sweep-dpp");
      log_progress("sweep-dpp", runs);
    } else if (app.got_subcommand("mae-table")) {
      auto spec = mae.spec();
      spec.methods = {rlsdp::Method::SWA, rlsdp::Method::HMC};
      const auto runs = ex::run_dpp_sweep(spec);
      ex::write_runs(mae.out, runs);
      ex::write_summary(mae.out, ex::summarize(runs));
      ex::write_mae_table(mae.out, ex::mae_table(runs));
      ex::write_manifest(mae.out, spec, "mae-table");
      log_progress("mae-table", runs);
    } else {
      const auto spec = mix.spec();
      const auto runs = ex::run_mixture_sweep(spec);
      ex::write_runs(mix.out, runs, "agree_ratio");
      ex::write_summary(mix.out, ex::summarize(runs), "agree_ratio");
      ex::write_manifest(mix.out, spec, "sweep-mixture");
      log_progress("sweep-mixture", runs);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
