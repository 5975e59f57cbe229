#pragma once

// Sweeps over simulated populations: accuracy and posterior spread against
// data per participant (DPP), SWA/HMC agreement of confidence by DPP bin, and
// validation accuracy against the agreement/pair-choice mix.
//
// Outputs are deterministic given the spec; wall-clock timings go to their
// own file so raw.csv and summary.csv compare byte for byte across reruns.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "rlsdp/aggregation.hpp"
#include "rlsdp/config.hpp"
#include "rlsdp/engine.hpp"
#include "rlsdp/error.hpp"
#include "rlsdp/inference.hpp"
#include "rlsdp/io.hpp"
#include "rlsdp/pipeline.hpp"
#include "rlsdp/simulator.hpp"

namespace rlsdp::experiments {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

struct PopulationSpec {
  std::size_t n = 110;
  std::size_t m = 136;
  std::size_t rank = 3;
  double logit_scale = 2.0;
  double bias_std = 2.5;
  std::uint64_t seed = 1;
};

/// Fifty fractions evenly spaced over [0.05, 0.95].
inline std::vector<double> default_fractions() {
  std::vector<double> f(50);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = 0.05 + 0.9 * static_cast<double>(k) / 49.0;
  return f;
}

struct SweepSpec {
  PopulationSpec population;
  std::size_t exercises_per_participant = 27;  ///< vote pool per participant before splitting
  double agree_ratio = 0.5;
  double holdout_fraction = 0.2;  ///< share of each participant's agreements held out
  std::vector<double> fractions = default_fractions();
  std::vector<Method> methods{Method::SWA, Method::HMC, Method::Binomial};
  std::size_t replicates = 3;
  std::uint64_t seed = 1;
  std::size_t workers = 0;  ///< 0 uses the hardware thread count
  /// Config-file keys ("tau", "hmc.n_samples", ...); bias_prior_std defaults
  /// to the population's bias std.
  KeyValues inference;
  // Mixture sweep.
  std::vector<double> ratios{0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95};
  std::size_t mixture_budget = 15;  ///< training exercises per participant
  std::size_t mixture_holdout = 3;  ///< held-out agreements per participant

  void validate() const {
    if (fractions.empty()) throw Error(Errc::invalid_argument, "fractions must not be empty");
    for (double f : fractions) {
      if (!(f > 0.0 && f < 1.0)) throw Error(Errc::invalid_argument, "fractions must lie strictly inside (0, 1)");
    }
    if (replicates < 1) throw Error(Errc::invalid_argument, "replicates must be >= 1");
    if (methods.empty()) throw Error(Errc::invalid_argument, "methods must not be empty");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
      throw Error(Errc::invalid_argument, "holdout_fraction must lie strictly inside (0, 1)");
    }
    for (double r : ratios) {
      if (!(r >= 0.0 && r <= 1.0)) throw Error(Errc::invalid_argument, "ratios must lie in [0, 1]");
    }
    ScheduleConfig{exercises_per_participant, agree_ratio}.validate();
  }

  InferenceSettings inference_settings() const {
    InferenceSettings s;
    s.bias_prior_std = population.bias_std;
    apply_key_values(s, inference);
    return s;
  }
};

// ---------------------------------------------------------------- spec json

inline json to_json(const SweepSpec& s) {
  json methods = json::array();
  for (auto m : s.methods) methods.push_back(to_string(m));
  return {{"population",
           {{"n", s.population.n},
            {"m", s.population.m},
            {"rank", s.population.rank},
            {"logit_scale", s.population.logit_scale},
            {"bias_std", s.population.bias_std},
            {"seed", s.population.seed}}},
          {"exercises_per_participant", s.exercises_per_participant},
          {"agree_ratio", s.agree_ratio},
          {"holdout_fraction", s.holdout_fraction},
          {"fractions", s.fractions},
          {"methods", methods},
          {"replicates", s.replicates},
          {"seed", s.seed},
          {"workers", s.workers},
          {"inference", s.inference},
          {"ratios", s.ratios},
          {"mixture_budget", s.mixture_budget},
          {"mixture_holdout", s.mixture_holdout}};
}

/// Missing keys keep their defaults; unknown keys are an error.
inline SweepSpec spec_from_json(const json& j) {
  static const std::vector<std::string> known{
      "population", "exercises_per_participant", "agree_ratio", "holdout_fraction", "fractions",
      "methods", "replicates", "seed", "workers", "inference", "ratios", "mixture_budget",
      "mixture_holdout"};
  SweepSpec s;
  try {
    for (const auto& [key, _] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw Error(Errc::invalid_argument, "unknown spec key '" + key + "'");
      }
    }
    if (j.contains("population")) {
      const auto& p = j["population"];
      s.population.n = p.value("n", s.population.n);
      s.population.m = p.value("m", s.population.m);
      s.population.rank = p.value("rank", s.population.rank);
      s.population.logit_scale = p.value("logit_scale", s.population.logit_scale);
      s.population.bias_std = p.value("bias_std", s.population.bias_std);
      s.population.seed = p.value("seed", s.population.seed);
    }
    s.exercises_per_participant = j.value("exercises_per_participant", s.exercises_per_participant);
    s.agree_ratio = j.value("agree_ratio", s.agree_ratio);
    s.holdout_fraction = j.value("holdout_fraction", s.holdout_fraction);
    s.fractions = j.value("fractions", s.fractions);
    if (j.contains("methods")) {
      s.methods.clear();
      for (const auto& m : j["methods"]) s.methods.push_back(method_from_string(m.get<std::string>()));
    }
    s.replicates = j.value("replicates", s.replicates);
    s.seed = j.value("seed", s.seed);
    s.workers = j.value("workers", s.workers);
    if (j.contains("inference")) {
      for (const auto& [key, value] : j["inference"].items()) {
        s.inference[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
    s.ratios = j.value("ratios", s.ratios);
    s.mixture_budget = j.value("mixture_budget", s.mixture_budget);
    s.mixture_holdout = j.value("mixture_holdout", s.mixture_holdout);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("sweep spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline SweepSpec load_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::io, "cannot read spec " + path.string());
  try {
    return spec_from_json(json::parse(is));
  } catch (const json::parse_error& e) {
    throw Error(Errc::invalid_argument, std::string("sweep spec: ") + e.what());
  }
}

// ---------------------------------------------------------------- data

inline SyntheticPopulation make_population(const PopulationSpec& p) {
  return generate_population(p.n, p.m, p.rank, p.logit_scale, p.seed, p.bias_std);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return detail::splitmix64(detail::splitmix64(base ^ detail::splitmix64(a + 1)) ^ (b + 0x51ed));
}

/// Holds out round(fraction x agreements) agreement events of every
/// participant; returns {pool, holdout} with the pool in arrival order.
inline std::pair<Dataset, Dataset> split_holdout(const Dataset& data, double fraction,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> agreements(data.n_participants);
  for (std::size_t k = 0; k < data.events.size(); ++k) {
    if (data.events[k].is_agreement()) agreements[data.events[k].participant].push_back(k);
  }
  std::vector<char> held(data.events.size(), 0);
  for (auto& idx : agreements) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < take; ++k) held[idx[k]] = 1;
  }
  Dataset pool(data.n_participants, data.n_responses);
  Dataset holdout(data.n_participants, data.n_responses);
  for (std::size_t k = 0; k < data.events.size(); ++k) {
    (held[k] ? holdout : pool).events.push_back(data.events[k]);
  }
  return {pool, holdout};
}

/// Training subsets are prefixes of one shuffled order, so a larger fraction
/// always contains the smaller ones.
inline Dataset take_fraction(const Dataset& pool, const std::vector<std::size_t>& order,
                             double fraction) {
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
  Dataset out(pool.n_participants, pool.n_responses);
  out.events.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.events.push_back(pool.events[order[k]]);
  return out;
}

/// Votes of one replicate: the full pool and its agreement holdout.
struct ReplicateData {
  Dataset pool;
  Dataset holdout;
  std::vector<std::size_t> order;
};

inline ReplicateData replicate_data(const SweepSpec& spec, const SyntheticPopulation& pop,
                                    std::size_t replicate) {
  ScheduleConfig sc;
  sc.exercises_per_participant = spec.exercises_per_participant;
  sc.agree_ratio = spec.agree_ratio;
  sc.seed = derive_seed(spec.seed, replicate, 1);
  const auto assignments = schedule_exercises(pop, round_robin_owners(pop.n_responses(), pop.n_participants()), sc);
  const auto votes = simulate_votes(pop, assignments, derive_seed(spec.seed, replicate, 2));
  auto [pool, holdout] = split_holdout(votes, spec.holdout_fraction, derive_seed(spec.seed, replicate, 3));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(spec.seed, replicate, 4));
  std::shuffle(order.begin(), order.end(), rng);
  return {std::move(pool), std::move(holdout), std::move(order)};
}

// ---------------------------------------------------------------- runs

struct RunRecord {
  Method method = Method::SWA;
  double fraction = 0.0;  ///< split fraction, or agree ratio in the mixture sweep
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_holdout = 0;
  double dpp = 0.0;
  double accuracy = std::nan("");
  AgreementEstimate estimate;
  double wall_clock_seconds = 0.0;
  double acceptance_rate = 1.0;
  std::string status = "ok";

  double std_mean() const { return estimate.std_agreement.size() ? estimate.std_agreement.mean() : std::nan(""); }
  double std_min() const { return estimate.std_agreement.size() ? estimate.std_agreement.minCoeff() : std::nan(""); }
  double std_max() const { return estimate.std_agreement.size() ? estimate.std_agreement.maxCoeff() : std::nan(""); }
};

inline RunRecord run_one(const Dataset& train, const Dataset& holdout, Method method,
                         const InferenceSettings& base, std::uint64_t seed) {
  RunRecord r;
  r.method = method;
  r.seed = seed;
  r.n_train = train.size();
  r.n_holdout = holdout.size();
  r.dpp = train.n_participants ? static_cast<double>(train.size()) / static_cast<double>(train.n_participants) : 0.0;
  auto settings = base;
  seed_configs(settings, seed);
  try {
    const auto outcome = run_inference(train, method, settings);
    r.estimate = outcome.estimate;
    r.wall_clock_seconds = outcome.wall_clock_seconds;
    r.acceptance_rate = outcome.acceptance_rate;
    r.accuracy = holdout_accuracy(outcome, holdout);
  } catch (const std::exception& e) {
    r.status = e.what();
  }
  return r;
}

/// Runs `n` jobs on a pool of worker threads; results land at their job index.
template <typename Job>
void parallel_for(std::size_t n, std::size_t workers, Job job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t k = next++; k < n; k = next++) job(k);
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
}

inline bool provenance_less(const RunRecord& a, const RunRecord& b) {
  return std::make_tuple(static_cast<int>(a.method), a.fraction, a.replicate) <
         std::make_tuple(static_cast<int>(b.method), b.fraction, b.replicate);
}

/// One run per method x fraction x replicate.
inline std::vector<RunRecord> run_dpp_sweep(const SweepSpec& spec) {
  spec.validate();
  const auto pop = make_population(spec.population);
  const auto settings = spec.inference_settings();
  std::vector<ReplicateData> reps;
  for (std::size_t r = 0; r < spec.replicates; ++r) reps.push_back(replicate_data(spec, pop, r));

  struct Job { std::size_t method, fraction, replicate; };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < spec.replicates; ++r)
    for (std::size_t f = 0; f < spec.fractions.size(); ++f)
      for (std::size_t m = 0; m < spec.methods.size(); ++m) jobs.push_back({m, f, r});

  std::vector<RunRecord> out(jobs.size());
  parallel_for(jobs.size(), spec.workers, [&](std::size_t k) {
    const auto& job = jobs[k];
    const auto& rep = reps[job.replicate];
    const double fraction = spec.fractions[job.fraction];
    const auto train = take_fraction(rep.pool, rep.order, fraction);
    const auto method = spec.methods[job.method];
    auto rec = run_one(train, rep.holdout, method, settings,
                       derive_seed(spec.seed, job.replicate, 100 + job.fraction));
    rec.fraction = fraction;
    rec.replicate = job.replicate;
    out[k] = std::move(rec);
  });
  std::sort(out.begin(), out.end(), provenance_less);
  return out;
}

/// SWA accuracy against the agreement share at a fixed exercise budget.
inline std::vector<RunRecord> run_mixture_sweep(const SweepSpec& spec) {
  spec.validate();
  const auto pop = make_population(spec.population);
  const auto settings = spec.inference_settings();
  const auto owners = round_robin_owners(pop.n_responses(), pop.n_participants());
  const std::size_t budget = spec.mixture_budget;
  const std::size_t held = spec.mixture_holdout;

  struct Job { std::size_t ratio, replicate; };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < spec.replicates; ++r)
    for (std::size_t k = 0; k < spec.ratios.size(); ++k) jobs.push_back({k, r});

  std::vector<RunRecord> out(jobs.size());
  parallel_for(jobs.size(), spec.workers, [&](std::size_t k) {
    const auto& job = jobs[k];
    const double ratio = spec.ratios[job.ratio];
    // One schedule carries the training budget plus the held-out agreements.
    const auto train_agree = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(budget)));
    ScheduleConfig sc;
    sc.exercises_per_participant = budget + held;
    sc.agree_ratio = static_cast<double>(train_agree + held) / static_cast<double>(budget + held);
    sc.seed = derive_seed(spec.seed, job.replicate, 1);
    const auto votes = simulate_votes(pop, schedule_exercises(pop, owners, sc),
                                      derive_seed(spec.seed, job.replicate, 2));
    const double share = train_agree + held > 0
                             ? static_cast<double>(held) / static_cast<double>(train_agree + held)
                             : 0.0;
    auto [train, holdout] = split_holdout(votes, share, derive_seed(spec.seed, job.replicate, 3));
    auto rec = run_one(train, holdout, Method::SWA, settings,
                       derive_seed(spec.seed, job.replicate, 200 + job.ratio));
    rec.fraction = ratio;
    rec.replicate = job.replicate;
    out[k] = std::move(rec);
  });
  std::sort(out.begin(), out.end(), provenance_less);
  return out;
}

// ---------------------------------------------------------------- summaries

struct Band {
  std::size_t count = 0;
  double mean = std::nan("");
  double min = std::nan("");
  double q1 = std::nan("");
  double median = std::nan("");
  double q3 = std::nan("");
  double max = std::nan("");
};

/// Quartiles by linear interpolation between order statistics. NaNs are skipped.
inline Band band_of(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  Band b;
  b.count = v.size();
  if (v.empty()) return b;
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  b.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  b.min = v.front();
  b.max = v.back();
  b.q1 = quantile(0.25);
  b.median = quantile(0.5);
  b.q3 = quantile(0.75);
  return b;
}

struct SummaryRow {
  Method method = Method::SWA;
  double fraction = 0.0;
  double dpp = 0.0;  ///< mean over replicates
  Band accuracy;
  Band std_mean;
};

/// One row per method x fraction, in provenance order.
inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& runs) {
  std::map<std::pair<int, double>, std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) groups[{static_cast<int>(r.method), r.fraction}].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    SummaryRow row;
    row.method = static_cast<Method>(key.first);
    row.fraction = key.second;
    std::vector<double> acc, sd, dpp;
    for (const auto* r : members) {
      acc.push_back(r->accuracy);
      sd.push_back(r->std_mean());
      dpp.push_back(r->dpp);
    }
    row.dpp = band_of(dpp).mean;
    row.accuracy = band_of(acc);
    row.std_mean = band_of(sd);
    out.push_back(row);
  }
  return out;
}

struct MaeBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n_pairs = 0;
  double swa_runtime = std::nan("");
  double hmc_runtime = std::nan("");
  double mae = std::nan("");
};

/// Pairs SWA and HMC runs on the same split, bins them by DPP in width-2.5
/// bins over [2.5, 22.5), and averages runtimes and the MAE of their stds.
inline std::vector<MaeBin> mae_table(const std::vector<RunRecord>& runs) {
  std::map<std::pair<double, std::size_t>, std::pair<const RunRecord*, const RunRecord*>> pairs;
  for (const auto& r : runs) {
    if (r.status != "ok") continue;
    auto& slot = pairs[{r.fraction, r.replicate}];
    if (r.method == Method::SWA) slot.first = &r;
    if (r.method == Method::HMC) slot.second = &r;
  }
  std::vector<MaeBin> bins;
  for (int k = 0; k < 8; ++k) bins.push_back({2.5 + 2.5 * k, 5.0 + 2.5 * k});
  std::vector<std::vector<double>> swa_t(bins.size()), hmc_t(bins.size()), mae(bins.size());
  for (const auto& [key, p] : pairs) {
    if (!p.first || !p.second) continue;
    const double dpp = p.first->dpp;
    if (dpp < 2.5 || dpp >= 22.5) continue;
    const auto k = static_cast<std::size_t>(std::floor((dpp - 2.5) / 2.5));
    swa_t[k].push_back(p.first->wall_clock_seconds);
    hmc_t[k].push_back(p.second->wall_clock_seconds);
    mae[k].push_back(mae_between(p.first->estimate, p.second->estimate));
  }
  for (std::size_t k = 0; k < bins.size(); ++k) {
    bins[k].n_pairs = mae[k].size();
    bins[k].swa_runtime = band_of(swa_t[k]).mean;
    bins[k].hmc_runtime = band_of(hmc_t[k]).mean;
    bins[k].mae = band_of(mae[k]).mean;
  }
  return bins;
}

// ---------------------------------------------------------------- csv output

namespace detail {

inline std::string num(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream ss;
  ss << std::setprecision(10) << x;
  return ss.str();
}

inline std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::ofstream open_csv(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw Error(Errc::io, "cannot write " + p.string());
  return os;
}

}  // namespace detail

/// raw.csv (one row per run), responses.csv (per-response estimates) and
/// timings.csv (wall clock and acceptance, not reproducible by nature).
inline void write_runs(const std::filesystem::path& dir, const std::vector<RunRecord>& runs,
                       const char* fraction_name = "fraction") {
  using detail::num;
  std::filesystem::create_directories(dir);
  auto raw = detail::open_csv(dir / "raw.csv");
  raw << "method," << fraction_name << ",replicate,seed,n_train,n_holdout,dpp,accuracy,std_mean,std_min,std_max,status\n";
  auto resp = detail::open_csv(dir / "responses.csv");
  resp << "method," << fraction_name << ",replicate,response_id,mean_agreement,std_agreement\n";
  auto times = detail::open_csv(dir / "timings.csv");
  times << "method," << fraction_name << ",replicate,wall_clock_seconds,acceptance_rate\n";
  for (const auto& r : runs) {
    const auto head = std::string(to_string(r.method)) + "," + num(r.fraction) + "," + std::to_string(r.replicate);
    raw << head << ',' << r.seed << ',' << r.n_train << ',' << r.n_holdout << ',' << num(r.dpp) << ','
        << num(r.accuracy) << ',' << num(r.std_mean()) << ',' << num(r.std_min()) << ','
        << num(r.std_max()) << ',' << detail::csv_text(r.status) << '\n';
    for (Eigen::Index j = 0; j < r.estimate.std_agreement.size(); ++j) {
      resp << head << ',' << j << ',' << num(r.estimate.mean_agreement(j)) << ','
           << num(r.estimate.std_agreement(j)) << '\n';
    }
    times << head << ',' << num(r.wall_clock_seconds) << ',' << num(r.acceptance_rate) << '\n';
  }
}

inline void write_summary(const std::filesystem::path& dir, const std::vector<SummaryRow>& rows,
                          const char* fraction_name = "fraction") {
  using detail::num;
  auto os = detail::open_csv(dir / "summary.csv");
  os << "method," << fraction_name << ",dpp,metric,count,mean,min,q1,median,q3,max\n";
  for (const auto& r : rows) {
    for (const auto& [metric, b] : {std::pair{"accuracy", r.accuracy}, std::pair{"std_mean", r.std_mean}}) {
      os << to_string(r.method) << ',' << num(r.fraction) << ',' << num(r.dpp) << ',' << metric << ','
         << b.count << ',' << num(b.mean) << ',' << num(b.min) << ',' << num(b.q1) << ','
         << num(b.median) << ',' << num(b.q3) << ',' << num(b.max) << '\n';
    }
  }
}

inline void write_mae_table(const std::filesystem::path& dir, const std::vector<MaeBin>& bins) {
  using detail::num;
  auto os = detail::open_csv(dir / "mae_table.csv");
  os << "dpp_lo,dpp_hi,n_pairs,swa_runtime_seconds,hmc_runtime_seconds,mae\n";
  for (const auto& b : bins) {
    os << num(b.lo) << ',' << num(b.hi) << ',' << b.n_pairs << ',' << num(b.swa_runtime) << ','
       << num(b.hmc_runtime) << ',' << num(b.mae) << '\n';
  }
}

inline void write_manifest(const std::filesystem::path& dir, const SweepSpec& spec,
                           const std::string& command) {
  json seeds = json::array();
  for (std::size_t r = 0; r < spec.replicates; ++r) {
    seeds.push_back({{"replicate", r},
                     {"schedule", derive_seed(spec.seed, r, 1)},
                     {"votes", derive_seed(spec.seed, r, 2)},
                     {"holdout", derive_seed(spec.seed, r, 3)},
                     {"split_order", derive_seed(spec.seed, r, 4)}});
  }
  json manifest = {{"command", command},
                   {"version", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                 "." + std::to_string(EIGEN_MINOR_VERSION)},
                   {"spec", to_json(spec)},
                   {"seeds", seeds}};
  auto os = detail::open_csv(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
}

}  // namespace rlsdp::experiments
