// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "rlsdp/server.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "rlsdp/experiments.hpp"

using namespace rlsdp;
namespace ex = rlsdp::experiments;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Verdict()>& check) {
  Verdict v;
  const auto start = Clock::now();
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  if (!v.pass) ++failures;
  std::cout << (v.pass ? "PASS" : "FAIL") << "  " << name << ": " << v.detail
            << fmt(" [%.1f s]", seconds_since(start)) << std::endl;
}

// ---------------------------------------------------------------- core checks

Verdict gradient_check() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> dim(2, 10), count(1, 200);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = dim(rng), m = dim(rng);
    const auto M = oracle::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m), rng);
    const Eigen::VectorXd b = oracle::random_matrix(static_cast<Eigen::Index>(n), 1, rng);
    const auto events = oracle::random_events(n, m, count(rng), rng);
    const auto g = log_likelihood_grad({M, b}, Dataset(n, m, events));
    const auto fd = oracle::finite_difference(M, b, events);
    const double num = std::sqrt((g.dM - fd.dM).squaredNorm() + (g.db - fd.db).squaredNorm());
    const double den = std::sqrt(fd.dM.squaredNorm() + fd.db.squaredNorm());
    worst = std::max(worst, num / den);
  }
  const double t = seconds_since(start);
  return {worst < 1e-5 && t < 5.0, fmt("max relative error %.2e over 20 instances (< 1e-5), %.2f s (< 5 s)", worst, t)};
}

Verdict projection_check() {
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> tau_dist(0.1, 3.0);
  double worst_2x2 = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Matrix2d M = oracle::random_matrix(2, 2, rng, 2.0);
    const double tau = tau_dist(rng);
    worst_2x2 = std::max(worst_2x2, (project_nuclear_ball(M, tau) - Eigen::MatrixXd(oracle::project_2x2(M, tau))).norm());
  }
  double worst_idem = 0.0, worst_excess = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto M = oracle::random_matrix(20, 20, rng, 2.0);
    const double tau = 5.0 + 20.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto P = project_nuclear_ball(M, tau);
    worst_idem = std::max(worst_idem, (project_nuclear_ball(P, tau) - P).norm());
    worst_excess = std::max(worst_excess, nuclear_norm(P) - tau);
  }
  const double t = seconds_since(start);
  const bool ok = worst_2x2 < 1e-8 && worst_idem < 1e-8 && worst_excess <= 1e-10 * 25.0 && t < 10.0;
  return {ok, fmt("2x2 max deviation %.2e (< 1e-8); 20x20 idempotence %.2e, max ||P||* - tau %.2e; %.2f s (< 10 s)",
                  worst_2x2, worst_idem, worst_excess, t)};
}

Verdict binomial_check() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> votes(0, 40);
  Dataset d(5, 40);
  for (std::size_t j = 0; j < 40; ++j) {
    const int a = votes(rng), r = votes(rng);
    for (int k = 0; k < a; ++k) d.events.push_back(ExerciseEvent::agreement(k % 5, j, true));
    for (int k = 0; k < r; ++k) d.events.push_back(ExerciseEvent::agreement(k % 5, j, false));
  }
  for (std::size_t k = 0; k < 10; ++k) d.events.push_back(ExerciseEvent::agreement(0, 0, true));
  const auto post = binomial_posterior(d);
  double worst = 0.0;
  for (std::size_t j = 0; j < 40; ++j) {
    double agree = 0.5, total = 1.0;
    for (const auto& e : d.events)
      if (e.first == j) {
        agree += e.agreed;
        total += 1.0;
      }
    worst = std::max(worst, std::abs(binomial_mean(post, j) - agree / total));
    worst = std::max(worst, std::abs(binomial_std(post, j) - oracle::beta_std(agree, total - agree)));
  }
  const BinomialPosterior example{Eigen::VectorXd::Constant(1, 10.5), Eigen::VectorXd::Constant(1, 5.5)};
  const double example_std = binomial_std(example, 0);
  worst = std::max(worst, std::abs(example_std - oracle::beta_std(10.5, 5.5)));
  return {worst <= 1e-12, fmt("max deviation from closed-form Beta moments %.1e (<= 1e-12); Beta(10.5,5.5) std %.10f",
                              worst, example_std)};
}

Verdict sampler_check() {
  const auto start = Clock::now();
  const Dataset d(1, 1, {ExerciseEvent::agreement(0, 0, true), ExerciseEvent::agreement(0, 0, true),
                         ExerciseEvent::agreement(0, 0, true), ExerciseEvent::agreement(0, 0, false)});
  const ModelConfig model{3.0, 1.0};
  HmcConfig cfg;
  cfg.step_size = 0.1;
  cfg.n_samples = 50000;
  cfg.n_burnin = 1000;
  cfg.seed = 404;
  const auto post = hmc_sample(d, UtilityState::zeros(1, 1), model, cfg);
  const double mean = posterior_summary(post).mean_agreement(0);
  const double truth = oracle::quadrature_agreement(3, 1, 3.0);
  const double t = seconds_since(start);
  return {std::abs(mean - truth) <= 0.02 && t < 120.0,
          fmt("HMC %.4f vs quadrature %.4f, |diff| %.4f (<= 0.02), acceptance %.2f, %.1f s (< 120 s)", mean, truth,
              std::abs(mean - truth), post.acceptance_rate, t)};
}

// ---------------------------------------------------------------- replica sweep

struct SweepResult {
  std::vector<ex::RunRecord> runs;
  std::vector<ex::SummaryRow> summary;
  double seconds = 0.0;
};

ex::SweepSpec replica_spec(std::size_t workers) {
  ex::SweepSpec spec;
  spec.fractions = {0.12, 0.18, 0.21, 0.31, 0.41, 0.51, 0.62, 0.68, 0.78, 0.93};
  spec.replicates = 3;
  spec.workers = workers;
  spec.inference = {{"hmc.n_samples", "25"}, {"hmc.n_burnin", "5"}};
  return spec;
}

std::vector<const ex::SummaryRow*> rows_of(const SweepResult& s, Method m) {
  std::vector<const ex::SummaryRow*> out;
  for (const auto& r : s.summary)
    if (r.method == m) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->dpp < b->dpp; });
  return out;
}

std::size_t nearest(const std::vector<const ex::SummaryRow*>& rows, double dpp) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (std::abs(rows[k]->dpp - dpp) < std::abs(rows[best]->dpp - dpp)) best = k;
  return best;
}

Verdict accuracy_curve_check(const SweepResult& s) {
  const auto swa = rows_of(s, Method::SWA);
  const auto hmc = rows_of(s, Method::HMC);
  const auto lo = nearest(swa, 5.0), hi = nearest(swa, 15.0);
  bool monotone = true;
  std::string curve;
  for (std::size_t k = lo; k <= hi; ++k) {
    if (k > lo && swa[k]->accuracy.mean < swa[k - 1]->accuracy.mean) monotone = false;
    curve += fmt("%s%.1f:%.3f", k > lo ? " " : "", swa[k]->dpp, swa[k]->accuracy.mean);
  }
  const double acc15 = swa[hi]->accuracy.mean;
  const double hmc15 = hmc[nearest(hmc, 15.0)]->accuracy.mean;
  const bool in_band = acc15 >= 0.70 && acc15 <= 0.80;
  const bool beats = acc15 >= hmc15;
  return {monotone && in_band && beats && s.seconds < 1800.0,
          fmt("SWA dpp:acc %s (non-decreasing: %s); at %.1f DPP SWA %.3f in [0.70, 0.80]: %s, HMC %.3f, SWA >= HMC: %s; "
              "sweep %.0f s (< 1800 s)",
              curve.c_str(), monotone ? "yes" : "no", swa[hi]->dpp, acc15, in_band ? "yes" : "no", hmc15,
              beats ? "yes" : "no", s.seconds)};
}

Verdict confidence_curve_check(const SweepResult& s) {
  const auto swa = rows_of(s, Method::SWA), hmc = rows_of(s, Method::HMC), bin = rows_of(s, Method::Binomial);
  bool below = true;
  double worst_gap = 1.0;
  for (std::size_t k = 0; k < bin.size(); ++k) {
    if (bin[k]->dpp < 5.0) continue;
    const double b = bin[k]->std_mean.mean;
    worst_gap = std::min({worst_gap, b - swa[k]->std_mean.mean, b - hmc[k]->std_mean.mean});
    below = below && swa[k]->std_mean.mean < b && hmc[k]->std_mean.mean < b;
  }
  const auto at15 = nearest(swa, 15.0);
  const double std15 = swa[at15]->std_mean.mean;
  return {below && std15 <= 0.03,
          fmt("model std below binomial at every DPP >= 5: %s (smallest gap %.4f); SWA std at %.1f DPP %.4f (<= 0.03); "
              "binomial there %.4f, HMC %.4f",
              below ? "yes" : "no", worst_gap, swa[at15]->dpp, std15, bin[at15]->std_mean.mean, hmc[at15]->std_mean.mean)};
}

Verdict swa_hmc_mae_check(const SweepResult& s) {
  const auto bins = ex::mae_table(s.runs);
  const ex::MaeBin* low = nullptr;
  const ex::MaeBin* mid = nullptr;
  bool high_ok = true;
  std::string high;
  for (const auto& b : bins) {
    if (b.lo == 2.5) low = &b;
    if (b.lo == 15.0) mid = &b;
    if (b.lo >= 15.0 && b.n_pairs > 0) {
      high_ok = high_ok && b.mae < 0.01;
      high += fmt("%s%.1f-%.1f:%.2e", high.empty() ? "" : " ", b.lo, b.hi, b.mae);
    }
  }
  if (!low || !mid || low->n_pairs == 0 || mid->n_pairs == 0) return {false, "a required DPP bin has no runs"};
  const bool falls = mid->mae < low->mae;
  return {falls && high_ok && !high.empty(),
          fmt("MAE bin 15-17.5 %.2e < bin 2.5-5 %.2e: %s; bins at DPP >= 15 %s (< 0.01): %s", mid->mae, low->mae,
              falls ? "yes" : "no", high.c_str(), high_ok ? "yes" : "no")};
}

// ---------------------------------------------------------------- runtime, mixture, protocol

Verdict runtime_check() {
  const auto spec = replica_spec(1);
  const auto pop = ex::make_population(spec.population);
  ScheduleConfig sc;
  sc.exercises_per_participant = spec.exercises_per_participant;
  sc.seed = 505;
  const auto data = simulate_votes(pop, schedule_exercises(pop, round_robin_owners(pop.n_responses(), pop.n_participants()), sc), 506);
  std::size_t agreements = 0;
  for (const auto& e : data.events) agreements += e.is_agreement();

  auto settings = InferenceSettings{};
  settings.bias_prior_std = spec.population.bias_std;
  seed_configs(settings, 507);
  const auto swa = run_inference(data, Method::SWA, settings);
  const auto hmc = run_inference(data, Method::HMC, settings);
  const double ratio = hmc.wall_clock_seconds / swa.wall_clock_seconds;
  return {swa.wall_clock_seconds < 10.0 && ratio >= 10.0,
          fmt("%zu agreement + %zu pair events; SWA %.2f s (< 10 s); HMC (%zu samples + %zu burn-in) %.2f s, "
              "acceptance %.2f; ratio %.1fx (>= 10x)",
              agreements, data.size() - agreements, swa.wall_clock_seconds, settings.hmc.n_samples,
              settings.hmc.n_burnin, hmc.wall_clock_seconds, hmc.acceptance_rate, ratio)};
}

Verdict mixture_check(std::size_t workers, const fs::path& out) {
  auto spec = replica_spec(workers);
  const auto runs = ex::run_mixture_sweep(spec);
  const auto rows = ex::summarize(runs);
  if (!out.empty()) {
    ex::write_runs(out / "mixture", runs, "agree_ratio");
    ex::write_summary(out / "mixture", rows, "agree_ratio");
  }
  std::size_t best = 0;
  std::string curve;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].accuracy.mean > rows[best].accuracy.mean) best = k;
    curve += fmt("%s%.2f:%.3f", k ? " " : "", rows[k].fraction, rows[k].accuracy.mean);
  }
  const double best_ratio = rows[best].fraction;
  const bool interior = best_ratio >= 0.35 && best_ratio <= 0.65 &&
                        rows.front().accuracy.mean <= rows[best].accuracy.mean &&
                        rows.back().accuracy.mean <= rows[best].accuracy.mean;
  return {interior, fmt("ratio:accuracy %s; best ratio %.2f (in [0.35, 0.65]: %s)", curve.c_str(), best_ratio,
                        interior ? "yes" : "no")};
}

Verdict protocol_check(const fs::path& scratch) {
  const std::size_t n = 100, per = 15;
  const auto log_path = scratch / "protocol_events.jsonl";
  fs::remove(log_path);
  EngineSettings settings;
  settings.port = 0;
  settings.ws_port = 0;
  settings.seed = 606;
  settings.event_log = log_path.string();
  settings.inference.bias_prior_std = 2.5;
  const auto pop = generate_population(n, n, 3, 2.0, 607, 2.5);
  std::mt19937_64 rng(608);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Service service(settings);
  httplib::Client c("127.0.0.1", service.start("127.0.0.1"));
  auto call = [&](const httplib::Result& r, int status) {
    if (!r || r->status != status) throw std::runtime_error("HTTP " + (r ? std::to_string(r->status) + " " + r->body : "no reply"));
    return json::parse(r->body);
  };
  auto post = [&](const std::string& path, const json& body, int status) {
    return call(c.Post(path, body.dump(), "application/json"), status);
  };

  std::vector<std::string> people;
  for (std::size_t i = 0; i < n; ++i) people.push_back(post("/participants", json::object(), 201)["participant"]);
  const auto start = Clock::now();
  const auto id = post("/cycles", {{"question", "What should we change first?"}}, 201)["cycle_id"].get<std::uint64_t>();
  const auto base = "/cycles/" + std::to_string(id);
  for (std::size_t i = 0; i < n; ++i)
    post(base + "/responses", {{"participant", people[i]}, {"text", "answer " + std::to_string(i)}}, 201);
  post(base + "/voting", json::object(), 200);
  for (std::size_t k = 0; k < per; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const auto exj = call(c.Get(base + "/exercise?participant=" + people[i]), 200);
      const auto row = static_cast<Eigen::Index>(i);
      json outcome;
      if (exj["kind"] == "agreement") {
        const auto j = exj["response"]["response_id"].get<Eigen::Index>();
        outcome = unit(rng) < sigmoid(pop.M_true(row, j) + pop.b_true(row));
      } else {
        const auto a = exj["responses"][0]["response_id"].get<Eigen::Index>();
        const auto b = exj["responses"][1]["response_id"].get<Eigen::Index>();
        outcome = unit(rng) < sigmoid(pop.M_true(row, a) - pop.M_true(row, b)) ? a : b;
      }
      post(base + "/votes", {{"participant", people[i]}, {"exercise_id", exj["exercise_id"]}, {"outcome", outcome}}, 201);
    }
  const auto result = post(base + "/close", {{"method", "SWA"}}, 200);
  const auto fetched = call(c.Get(base + "/results"), 200);
  const double elapsed = seconds_since(start);
  const auto live = c.Get("/state");
  if (!live || live->status != 200) throw std::runtime_error("GET /state failed");
  service.stop();

  const auto replayed = Engine::state_json(*Engine::replay(Engine::read_log_file(log_path))->snapshot()).dump();
  const bool same = replayed == live->body;
  const bool complete = fetched == result && result["rows"].size() == n && result["n_votes"] == n * per;
  return {elapsed < 120.0 && same && complete,
          fmt("%zu participants, %zu votes, SWA inference %.2f s; open-to-results %.1f s (< 120 s); "
              "replayed state byte-identical: %s (%zu bytes)",
              n, result["n_votes"].get<std::size_t>(), result["wall_clock_seconds"].get<double>(), elapsed,
              same ? "yes" : "no", replayed.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rlsdp acceptance run"};
  std::string out;
  std::size_t workers = 0;
  app.add_option("--out", out, "write sweep CSVs here");
  app.add_option("--workers", workers, "worker threads for sweeps (0 = all cores)");
  CLI11_PARSE(app, argc, argv);
  const fs::path out_dir = out;
  const auto scratch = out.empty() ? fs::temp_directory_path() / "rlsdp_acceptance" : out_dir;
  fs::create_directories(scratch);

  report("gradient correctness", gradient_check);
  report("projection correctness", projection_check);
  report("binomial baseline", binomial_check);
  report("sampler validity", sampler_check);

  SweepResult sweep;
  {
    const auto start = Clock::now();
    const auto spec = replica_spec(workers);
    sweep.runs = ex::run_dpp_sweep(spec);
    sweep.summary = ex::summarize(sweep.runs);
    sweep.seconds = seconds_since(start);
    if (!out.empty()) {
      ex::write_runs(out_dir / "dpp", sweep.runs);
      ex::write_summary(out_dir / "dpp", sweep.summary);
      ex::write_mae_table(out_dir / "dpp", ex::mae_table(sweep.runs));
      ex::write_manifest(out_dir / "dpp", spec, "acceptance");
    }
    std::size_t failed = 0;
    for (const auto& r : sweep.runs) failed += r.status != "ok";
    if (failed) std::cout << "note: " << failed << " sweep runs failed\n";
  }
  report("accuracy vs DPP", [&] { return accuracy_curve_check(sweep); });
  report("confidence vs DPP", [&] { return confidence_curve_check(sweep); });
  report("SWA/HMC MAE", [&] { return swa_hmc_mae_check(sweep); });
  report("runtime", runtime_check);
  report("mixture interior maximum", [&] { return mixture_check(workers, out_dir); });
  report("protocol end to end", [&] { return protocol_check(scratch); });

  std::cout << (failures ? fmt("%d criteria failed", failures) : std::string("all criteria passed")) << std::endl;
  return failures ? 1 : 0;
}
