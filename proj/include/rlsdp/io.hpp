#pragma once

// File formats: datasets as JSON Lines, matrices as CSV (one row per
// participant), posterior samples and populations as a directory of CSV
// files plus a JSON manifest.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rlsdp/error.hpp"
#include "rlsdp/inference.hpp"
#include "rlsdp/model.hpp"
#include "rlsdp/simulator.hpp"

namespace rlsdp::io {

using nlohmann::json;

inline json event_to_json(const ExerciseEvent& e) {
  if (e.is_agreement()) {
    return {{"kind", "agreement"},
            {"participant", e.participant},
            {"response", e.response()},
            {"agreed", e.agreed}};
  }
  return {{"kind", "pair_choice"},
          {"participant", e.participant},
          {"winner", e.winner()},
          {"loser", e.loser()}};
}

inline ExerciseEvent event_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "agreement") {
    return ExerciseEvent::agreement(j.at("participant").get<std::size_t>(),
                                    j.at("response").get<std::size_t>(), j.at("agreed").get<bool>());
  }
  if (kind == "pair_choice") {
    return ExerciseEvent::pair_choice(j.at("participant").get<std::size_t>(),
                                      j.at("winner").get<std::size_t>(),
                                      j.at("loser").get<std::size_t>());
  }
  throw Error(Errc::invalid_argument, "unknown event kind '" + kind + "'");
}

inline void write_events_jsonl(std::ostream& os, const Dataset& data) {
  for (const auto& e : data.events) os << event_to_json(e).dump() << '\n';
}

/// Reads one event per non-blank line. Shape is taken from the arguments, or
/// inferred from the largest indices when they are zero.
inline Dataset read_events_jsonl(std::istream& is, std::size_t n_participants = 0,
                                 std::size_t n_responses = 0) {
  Dataset data(n_participants, n_responses);
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_participant = 0;
  std::size_t max_response = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto e = event_from_json(json::parse(line));
      max_participant = std::max(max_participant, e.participant + 1);
      max_response = std::max(max_response, std::max(e.first, e.is_agreement() ? 0 : e.second) + 1);
      data.events.push_back(e);
    } catch (const json::exception& ex) {
      throw Error(Errc::invalid_argument,
                  "line " + std::to_string(line_no) + ": " + std::string(ex.what()));
    }
  }
  if (n_participants == 0) data.n_participants = max_participant;
  if (n_responses == 0) data.n_responses = max_response;
  data.validate();
  return data;
}

inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& M) {
  os << std::setprecision(17);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      if (c) os << ',';
      os << M(r, c);
    }
    os << '\n';
  }
}

inline Eigen::MatrixXd read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw Error(Errc::invalid_argument, "bad CSV cell '" + cell + "'");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(Errc::invalid_argument, "ragged CSV matrix");
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return M;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw Error(Errc::io, "cannot write " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw Error(Errc::io, "cannot read " + p.string());
  return is;
}

}  // namespace detail

inline void write_dataset_file(const std::filesystem::path& p, const Dataset& data) {
  auto os = detail::open_out(p);
  write_events_jsonl(os, data);
}

inline Dataset read_dataset_file(const std::filesystem::path& p, std::size_t n_participants = 0,
                                 std::size_t n_responses = 0) {
  auto is = detail::open_in(p);
  return read_events_jsonl(is, n_participants, n_responses);
}

/// sample_0000_M.csv, sample_0000_b.csv, ... plus manifest.json.
inline void export_samples(const std::filesystem::path& dir, const PosteriorSamples& samples) {
  std::filesystem::create_directories(dir);
  for (std::size_t s = 0; s < samples.samples.size(); ++s) {
    std::ostringstream stem;
    stem << "sample_" << std::setw(4) << std::setfill('0') << s;
    auto m_os = detail::open_out(dir / (stem.str() + "_M.csv"));
    write_matrix_csv(m_os, samples.samples[s].M);
    auto b_os = detail::open_out(dir / (stem.str() + "_b.csv"));
    write_matrix_csv(b_os, samples.samples[s].b);
  }
  json manifest = {{"method", to_string(samples.method_tag)},
                   {"wall_clock_seconds", samples.wall_clock_seconds},
                   {"n_samples", samples.samples.size()},
                   {"seed", samples.seed},
                   {"acceptance_rate", samples.acceptance_rate}};
  auto os = detail::open_out(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
}

inline PosteriorSamples import_samples(const std::filesystem::path& dir) {
  auto is = detail::open_in(dir / "manifest.json");
  const auto manifest = json::parse(is);
  PosteriorSamples out;
  out.method_tag = method_from_string(manifest.at("method").get<std::string>());
  out.wall_clock_seconds = manifest.at("wall_clock_seconds").get<double>();
  out.seed = manifest.at("seed").get<std::uint64_t>();
  out.acceptance_rate = manifest.value("acceptance_rate", 1.0);
  const auto n = manifest.at("n_samples").get<std::size_t>();
  for (std::size_t s = 0; s < n; ++s) {
    std::ostringstream stem;
    stem << "sample_" << std::setw(4) << std::setfill('0') << s;
    auto m_is = detail::open_in(dir / (stem.str() + "_M.csv"));
    auto b_is = detail::open_in(dir / (stem.str() + "_b.csv"));
    UtilityState st;
    st.M = read_matrix_csv(m_is);
    st.b = read_matrix_csv(b_is).col(0);
    out.samples.push_back(std::move(st));
  }
  return out;
}

/// manifest.json with (n, m, rank, logit_scale, seed) plus M_true.csv and b_true.csv.
inline void export_population(const std::filesystem::path& dir, const SyntheticPopulation& pop) {
  std::filesystem::create_directories(dir);
  json manifest = {{"n", pop.n_participants()},
                   {"m", pop.n_responses()},
                   {"rank", pop.rank},
                   {"logit_scale", pop.logit_scale},
                   {"bias_std", pop.bias_std},
                   {"seed", pop.seed}};
  auto os = detail::open_out(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
  auto m_os = detail::open_out(dir / "M_true.csv");
  write_matrix_csv(m_os, pop.M_true);
  auto b_os = detail::open_out(dir / "b_true.csv");
  write_matrix_csv(b_os, pop.b_true);
}

inline SyntheticPopulation import_population(const std::filesystem::path& dir) {
  auto is = detail::open_in(dir / "manifest.json");
  const auto manifest = json::parse(is);
  SyntheticPopulation pop;
  pop.rank = manifest.at("rank").get<std::size_t>();
  pop.logit_scale = manifest.at("logit_scale").get<double>();
  pop.bias_std = manifest.value("bias_std", 1.0);
  pop.seed = manifest.at("seed").get<std::uint64_t>();
  auto m_is = detail::open_in(dir / "M_true.csv");
  auto b_is = detail::open_in(dir / "b_true.csv");
  pop.M_true = read_matrix_csv(m_is);
  pop.b_true = read_matrix_csv(b_is).col(0);
  return pop;
}

}  // namespace rlsdp::io
