#pragma once

// Dialogue cycle state machine with an append-only event log.
//
// Every mutation is validated, turned into a log record, and applied by the
// same code that replays logs, so replay(log) rebuilds the live state exactly.
// Mutations are serialized by one writer lock; readers take an immutable
// snapshot without locking.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rlsdp/aggregation.hpp"
#include "rlsdp/config.hpp"
#include "rlsdp/error.hpp"
#include "rlsdp/inference.hpp"
#include "rlsdp/model.hpp"
#include "rlsdp/pipeline.hpp"
#include "rlsdp/simulator.hpp"

namespace rlsdp {

using nlohmann::json;

enum class Phase { QuestionOpen, Voting, Inferring, ResultsReady };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::QuestionOpen: return "QuestionOpen";
    case Phase::Voting: return "Voting";
    case Phase::Inferring: return "Inferring";
    case Phase::ResultsReady: return "ResultsReady";
  }
  return "unknown";
}

struct Response {
  std::size_t response_id = 0;
  std::size_t participant = 0;
  std::string text;
};

/// A prompt handed to a participant. `first`/`second` are response ids; `second`
/// is unused for agreements.
struct Exercise {
  std::uint64_t exercise_id = 0;
  std::size_t participant = 0;
  EventKind kind = EventKind::Agreement;
  std::size_t first = 0;
  std::size_t second = 0;
  bool answered = false;
};

struct ResultRow {
  std::size_t response_id = 0;
  std::string text;
  double mean_agreement = 0.0;
  double std_agreement = 0.0;
  std::size_t agree_votes = 0;
  std::size_t disagree_votes = 0;
  std::size_t pair_wins = 0;
  std::size_t pair_losses = 0;
};

struct CycleResult {
  std::vector<ResultRow> rows;  ///< sorted by descending mean_agreement
  Method method = Method::SWA;
  double wall_clock_seconds = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_participants = 0;
  std::size_t n_votes = 0;
};

struct DialogueCycle {
  std::uint64_t cycle_id = 0;
  std::string question;
  Phase phase = Phase::QuestionOpen;
  std::vector<Response> responses;
  std::vector<Exercise> exercises;  ///< indexed by exercise_id - 1
  std::vector<ExerciseEvent> votes;  ///< arrival order
  std::int64_t opened_at = 0;  ///< microseconds since the epoch
  std::int64_t closed_at = 0;
  std::optional<Method> pending_method;
  std::uint64_t inference_seed = 0;
  std::optional<CycleResult> result;
  std::string last_error;
};

/// Immutable view published after every mutation.
struct EngineSnapshot {
  std::uint64_t seq = 0;
  std::vector<std::string> participants;  ///< token by enrollment index
  std::vector<std::shared_ptr<const DialogueCycle>> cycles;

  std::shared_ptr<const DialogueCycle> find(std::uint64_t cycle_id) const {
    if (cycle_id == 0 || cycle_id > cycles.size()) return nullptr;
    return cycles[cycle_id - 1];
  }
};

struct LogRecord {
  std::uint64_t seq = 0;
  std::int64_t timestamp = 0;  ///< microseconds since the epoch
  std::string kind;
  json payload;
};

// ---------------------------------------------------------------- json codecs

inline json result_to_json(const CycleResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"response_id", row.response_id},
                    {"text", row.text},
                    {"mean_agreement", row.mean_agreement},
                    {"std_agreement", row.std_agreement},
                    {"agree_votes", row.agree_votes},
                    {"disagree_votes", row.disagree_votes},
                    {"pair_wins", row.pair_wins},
                    {"pair_losses", row.pair_losses}});
  }
  return {{"method", to_string(r.method)},
          {"wall_clock_seconds", r.wall_clock_seconds},
          {"seed", r.seed},
          {"n_participants", r.n_participants},
          {"n_votes", r.n_votes},
          {"rows", rows}};
}

inline CycleResult result_from_json(const json& j) {
  CycleResult r;
  r.method = method_from_string(j.at("method").get<std::string>());
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n_participants = j.at("n_participants").get<std::size_t>();
  r.n_votes = j.at("n_votes").get<std::size_t>();
  for (const auto& row : j.at("rows")) {
    r.rows.push_back({row.at("response_id").get<std::size_t>(), row.at("text").get<std::string>(),
                      row.at("mean_agreement").get<double>(), row.at("std_agreement").get<double>(),
                      row.at("agree_votes").get<std::size_t>(),
                      row.at("disagree_votes").get<std::size_t>(),
                      row.at("pair_wins").get<std::size_t>(),
                      row.at("pair_losses").get<std::size_t>()});
  }
  return r;
}

inline json exercise_to_json(const Exercise& e, const std::vector<Response>& responses) {
  json j = {{"exercise_id", e.exercise_id},
            {"kind", e.kind == EventKind::Agreement ? "agreement" : "pair_choice"}};
  if (e.kind == EventKind::Agreement) {
    j["response"] = {{"response_id", e.first}, {"text", responses[e.first].text}};
  } else {
    j["responses"] = json::array({{{"response_id", e.first}, {"text", responses[e.first].text}},
                                  {{"response_id", e.second}, {"text", responses[e.second].text}}});
  }
  return j;
}

inline json log_record_to_json(const LogRecord& r) {
  return {{"seq", r.seq}, {"timestamp", r.timestamp}, {"kind", r.kind}, {"payload", r.payload}};
}

inline LogRecord log_record_from_json(const json& j) {
  return {j.at("seq").get<std::uint64_t>(), j.at("timestamp").get<std::int64_t>(),
          j.at("kind").get<std::string>(), j.at("payload")};
}

namespace detail {

inline std::int64_t now_micros() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::string participant_token(std::uint64_t seed, std::size_t index) {
  static constexpr char kHex[] = "0123456789abcdef";
  auto h = splitmix64(seed ^ splitmix64(index + 1));
  std::string token = "p";
  for (int k = 0; k < 16; ++k, h >>= 4) token += kHex[h & 0xf];
  return token;
}

}  // namespace detail

// ---------------------------------------------------------------- engine

class Engine {
 public:
  /// Called after every applied record, outside the writer lock.
  using Listener = std::function<void(const LogRecord&, const EngineSnapshot&)>;

  explicit Engine(EngineSettings settings = {}) : settings_(std::move(settings)) {
    publish();
    if (!settings_.event_log.empty()) sink_.open(settings_.event_log, std::ios::app);
  }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Rebuilds an engine from records. The returned engine appends new records
  /// to `settings.event_log` when set.
  static std::unique_ptr<Engine> replay(const std::vector<LogRecord>& log,
                                        EngineSettings settings = {}) {
    auto path = std::move(settings.event_log);
    settings.event_log.clear();
    auto engine = std::make_unique<Engine>(std::move(settings));
    for (std::size_t k = 0; k < log.size(); ++k) {
      if (log[k].seq != k + 1) {
        throw Error(Errc::corrupt_log, "record " + std::to_string(k) + ": sequence gap");
      }
      try {
        engine->apply(log[k]);
      } catch (const Error& e) {
        throw Error(Errc::corrupt_log, "record " + std::to_string(k) + ": " + e.what());
      } catch (const json::exception& e) {
        throw Error(Errc::corrupt_log, "record " + std::to_string(k) + ": " + e.what());
      }
      engine->log_.push_back(log[k]);
    }
    engine->publish();
    engine->settings_.event_log = path;
    if (!path.empty()) engine->sink_.open(path, std::ios::app);
    return engine;
  }

  static std::vector<LogRecord> read_log(std::istream& is) {
    std::vector<LogRecord> out;
    std::string line;
    while (std::getline(is, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out.push_back(log_record_from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw Error(Errc::corrupt_log, "record " + std::to_string(out.size()) + ": " + e.what());
      }
    }
    return out;
  }

  static std::vector<LogRecord> read_log_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(Errc::io, "cannot read event log " + path.string());
    return read_log(is);
  }

  void set_listener(Listener listener) {
    std::lock_guard lock(writer_);
    listener_ = std::move(listener);
  }

  const EngineSettings& settings() const { return settings_; }

  std::shared_ptr<const EngineSnapshot> snapshot() const { return std::atomic_load(&snapshot_); }

  std::vector<LogRecord> log() const {
    std::lock_guard lock(writer_);
    return log_;
  }

  // -------------------------------------------------------------- operations

  std::string enroll() {
    return commit([&] {
      const auto index = participants_.size();
      return json{{"participant", index},
                  {"token", detail::participant_token(settings_.seed, index)}};
    }, "ParticipantEnrolled")["token"].get<std::string>();
  }

  std::uint64_t open_cycle(const std::string& question) {
    return commit([&] {
      if (question.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(Errc::invalid_argument, "question must not be empty");
      }
      if (live_cycle()) {
        throw Error(Errc::concurrent_cycle,
                    "cycle " + std::to_string(live_cycle()->cycle_id) + " is still live");
      }
      return json{{"cycle_id", cycles_.size() + 1}, {"question", question}};
    }, "CycleOpened")["cycle_id"].get<std::uint64_t>();
  }

  std::size_t submit_response(std::uint64_t cycle_id, const std::string& participant,
                              const std::string& text) {
    return commit([&] {
      const auto& c = cycle(cycle_id);
      require_phase(c, {Phase::QuestionOpen, Phase::Voting});
      return json{{"cycle_id", cycle_id},
                  {"response_id", c.responses.size()},
                  {"participant", participant_index(participant)},
                  {"text", text}};
    }, "ResponseSubmitted")["response_id"].get<std::size_t>();
  }

  void open_voting(std::uint64_t cycle_id) {
    commit([&] {
      require_phase(cycle(cycle_id), {Phase::QuestionOpen});
      return json{{"cycle_id", cycle_id}};
    }, "VotingOpened");
  }

  /// Hands out a new prompt, never one this participant already holds.
  json next_exercise(std::uint64_t cycle_id, const std::string& participant) {
    const auto payload = commit([&] {
      const auto& c = cycle(cycle_id);
      require_phase(c, {Phase::Voting});
      return choose_exercise(c, participant_index(participant));
    }, "ExerciseAssigned");
    auto snap = snapshot();
    const auto c = snap->find(cycle_id);
    return exercise_to_json(c->exercises[payload["exercise_id"].get<std::uint64_t>() - 1],
                            c->responses);
  }

  /// `outcome` is agree/disagree (bool or string) for agreements, the winning
  /// response id for pair choices.
  void submit_vote(std::uint64_t cycle_id, const std::string& participant,
                   std::uint64_t exercise_id, const json& outcome) {
    commit([&] {
      const auto& c = cycle(cycle_id);
      require_phase(c, {Phase::Voting});
      const auto who = participant_index(participant);
      if (exercise_id == 0 || exercise_id > c.exercises.size() ||
          c.exercises[exercise_id - 1].participant != who) {
        throw Error(Errc::unassigned_exercise, "exercise " + std::to_string(exercise_id) +
                                                   " was not assigned to this participant");
      }
      const auto& ex = c.exercises[exercise_id - 1];
      if (ex.answered) {
        throw Error(Errc::duplicate_vote, "exercise " + std::to_string(exercise_id) + " already answered");
      }
      ExerciseEvent vote;
      if (ex.kind == EventKind::Agreement) {
        vote = ExerciseEvent::agreement(who, ex.first, parse_agreement(outcome));
      } else {
        if (!outcome.is_number_unsigned() && !outcome.is_number_integer()) {
          throw Error(Errc::invalid_argument, "pair-choice outcome must be the winning response id");
        }
        const auto winner = outcome.get<std::int64_t>();
        if (winner != static_cast<std::int64_t>(ex.first) &&
            winner != static_cast<std::int64_t>(ex.second)) {
          throw Error(Errc::invalid_argument, "winner must be one of the two shown responses");
        }
        const auto w = static_cast<std::size_t>(winner);
        vote = ExerciseEvent::pair_choice(who, w, w == ex.first ? ex.second : ex.first);
      }
      return json{{"cycle_id", cycle_id},
                  {"exercise_id", exercise_id},
                  {"participant", who},
                  {"kind", vote.is_agreement() ? "agreement" : "pair_choice"},
                  {"first", vote.first},
                  {"second", vote.second},
                  {"agreed", vote.agreed}};
    }, "VoteSubmitted");
  }

  /// Freezes the votes, runs inference outside the writer lock, and stores
  /// the result. On failure the cycle returns to Voting.
  CycleResult close_voting_and_infer(std::uint64_t cycle_id, Method method) {
    const auto closed = commit([&] {
      const auto& c = cycle(cycle_id);
      require_phase(c, {Phase::Voting});
      if (c.responses.empty()) throw Error(Errc::no_responses, "cycle has no responses");
      return json{{"cycle_id", cycle_id},
                  {"method", to_string(method)},
                  {"seed", detail::splitmix64(settings_.seed ^ cycle_id)}};
    }, "VotingClosed");

    const auto frozen = snapshot()->find(cycle_id);
    const auto seed = closed["seed"].get<std::uint64_t>();
    CycleResult result;
    try {
      result = compute_result(*frozen, snapshot()->participants.size(), method, seed);
    } catch (const std::exception& e) {
      const std::string message = e.what();
      commit([&] { return json{{"cycle_id", cycle_id}, {"error", message}}; }, "InferenceFailed");
      throw Error(Errc::inference_failed, message);
    }
    commit([&] { return json{{"cycle_id", cycle_id}, {"result", result_to_json(result)}}; },
           "InferenceCompleted");
    return result;
  }

  CycleResult get_results(std::uint64_t cycle_id) const {
    const auto c = snapshot()->find(cycle_id);
    if (!c) throw Error(Errc::unknown_cycle, "no cycle " + std::to_string(cycle_id));
    if (c->phase != Phase::ResultsReady) {
      throw Error(Errc::results_not_ready, std::string("cycle is ") + to_string(c->phase));
    }
    return *c->result;
  }

  /// Dataset of one cycle over all enrolled participants.
  Dataset cycle_dataset(std::uint64_t cycle_id) const {
    auto snap = snapshot();
    const auto c = snap->find(cycle_id);
    if (!c) throw Error(Errc::unknown_cycle, "no cycle " + std::to_string(cycle_id));
    return {snap->participants.size(), c->responses.size(), c->votes};
  }

  // -------------------------------------------------------------- views

  static json cycle_json(const DialogueCycle& c) {
    std::size_t agreements = 0;
    for (const auto& v : c.votes) agreements += v.is_agreement();
    json j = {{"cycle_id", c.cycle_id},
              {"question", c.question},
              {"phase", to_string(c.phase)},
              {"opened_at", c.opened_at},
              {"closed_at", c.closed_at},
              {"n_responses", c.responses.size()},
              {"n_exercises", c.exercises.size()},
              {"votes", {{"agreement", agreements}, {"pair_choice", c.votes.size() - agreements}}}};
    json responses = json::array();
    for (const auto& r : c.responses) {
      responses.push_back({{"response_id", r.response_id}, {"participant", r.participant}, {"text", r.text}});
    }
    j["responses"] = responses;
    if (c.result) j["result"] = result_to_json(*c.result);
    if (!c.last_error.empty()) j["last_error"] = c.last_error;
    return j;
  }

  /// Full state, used to check that replay matches the live engine.
  static json state_json(const EngineSnapshot& s) {
    json cycles = json::array();
    for (const auto& c : s.cycles) {
      auto j = cycle_json(*c);
      json votes = json::array();
      for (const auto& v : c->votes) {
        votes.push_back({v.is_agreement() ? 0 : 1, v.participant, v.first, v.second, v.agreed});
      }
      json exercises = json::array();
      for (const auto& e : c->exercises) {
        exercises.push_back({e.exercise_id, e.participant, e.kind == EventKind::Agreement ? 0 : 1,
                             e.first, e.second, e.answered});
      }
      j["vote_log"] = votes;
      j["exercise_log"] = exercises;
      cycles.push_back(j);
    }
    return {{"seq", s.seq}, {"participants", s.participants}, {"cycles", cycles}};
  }

 private:
  // -------------------------------------------------------------- helpers

  template <typename Validate>
  json commit(Validate&& validate, const char* kind) {
    LogRecord record;
    std::shared_ptr<const EngineSnapshot> snap;
    Listener listener;
    {
      std::lock_guard lock(writer_);
      record.payload = validate();
      record.seq = log_.size() + 1;
      record.timestamp = detail::now_micros();
      record.kind = kind;
      apply(record);
      log_.push_back(record);
      if (sink_.is_open()) {
        sink_ << log_record_to_json(record).dump() << '\n';
        sink_.flush();
      }
      snap = publish();
      listener = listener_;
    }
    if (listener) listener(record, *snap);
    return record.payload;
  }

  std::shared_ptr<const EngineSnapshot> publish() {
    auto snap = std::make_shared<EngineSnapshot>();
    snap->seq = log_.size();
    snap->participants = participants_;
    snap->cycles = cycles_;
    std::shared_ptr<const EngineSnapshot> frozen = snap;
    std::atomic_store(&snapshot_, frozen);
    return frozen;
  }

  const DialogueCycle* live_cycle() const {
    if (cycles_.empty()) return nullptr;
    const auto& c = *cycles_.back();
    return c.phase == Phase::ResultsReady ? nullptr : &c;
  }

  const DialogueCycle& cycle(std::uint64_t cycle_id) const {
    if (cycle_id == 0 || cycle_id > cycles_.size()) {
      throw Error(Errc::unknown_cycle, "no cycle " + std::to_string(cycle_id));
    }
    return *cycles_[cycle_id - 1];
  }

  /// Copy-on-write access for apply().
  DialogueCycle& mutable_cycle(std::uint64_t cycle_id) {
    cycle(cycle_id);
    auto copy = std::make_shared<DialogueCycle>(*cycles_[cycle_id - 1]);
    auto* raw = copy.get();
    cycles_[cycle_id - 1] = std::move(copy);
    return *raw;
  }

  static void require_phase(const DialogueCycle& c, std::initializer_list<Phase> allowed) {
    if (std::find(allowed.begin(), allowed.end(), c.phase) == allowed.end()) {
      throw Error(Errc::wrong_phase, "cycle " + std::to_string(c.cycle_id) + " is " + to_string(c.phase));
    }
  }

  std::size_t participant_index(const std::string& token) const {
    const auto it = token_index_.find(token);
    if (it == token_index_.end()) throw Error(Errc::unknown_participant, "unknown participant '" + token + "'");
    return it->second;
  }

  static bool parse_agreement(const json& outcome) {
    if (outcome.is_boolean()) return outcome.get<bool>();
    if (outcome.is_string()) {
      const auto s = outcome.get<std::string>();
      if (s == "agree") return true;
      if (s == "disagree") return false;
    }
    throw Error(Errc::invalid_argument, "agreement outcome must be agree/disagree or a boolean");
  }

  /// Next prompt for participant `who`: kind by the agree-ratio sequence,
  /// response(s) by least coverage, ties broken by a seeded draw.
  json choose_exercise(const DialogueCycle& c, std::size_t who) const {
    const auto m = c.responses.size();
    std::vector<char> eligible(m, 1);
    if (!settings_.allow_self_votes) {
      for (const auto& r : c.responses) eligible[r.response_id] = r.participant != who;
    }
    std::vector<std::size_t> coverage(m, 0);
    std::vector<char> agreed_on(m, 0);
    std::set<std::pair<std::size_t, std::size_t>> paired;
    std::size_t held = 0;
    for (const auto& e : c.exercises) {
      ++coverage[e.first];
      if (e.kind == EventKind::PairChoice) ++coverage[e.second];
      if (e.participant != who) continue;
      ++held;
      if (e.kind == EventKind::Agreement) agreed_on[e.first] = 1;
      else paired.insert({std::min(e.first, e.second), std::max(e.first, e.second)});
    }

    const auto exercise_id = static_cast<std::uint64_t>(c.exercises.size() + 1);
    std::mt19937_64 rng(detail::splitmix64(settings_.seed ^ (c.cycle_id << 32) ^ exercise_id));
    const double r = settings_.agree_ratio;
    const bool want_agreement = std::floor(static_cast<double>(held + 1) * r) >
                                std::floor(static_cast<double>(held) * r);

    auto pick_agreement = [&]() -> std::optional<json> {
      const auto j = detail::least_covered(coverage, [&](std::size_t k) { return eligible[k] && !agreed_on[k]; }, rng);
      if (j >= m) return std::nullopt;
      return json{{"cycle_id", c.cycle_id}, {"exercise_id", exercise_id}, {"participant", who},
                  {"kind", "agreement"}, {"first", j}, {"second", 0}};
    };
    auto pick_pair = [&]() -> std::optional<json> {
      std::vector<char> tried(m, 0);
      for (;;) {
        const auto j = detail::least_covered(coverage, [&](std::size_t k) { return eligible[k] && !tried[k]; }, rng);
        if (j >= m) return std::nullopt;
        tried[j] = 1;
        const auto k = detail::least_covered(coverage, [&](std::size_t x) {
          return x != j && eligible[x] && !paired.count({std::min(j, x), std::max(j, x)});
        }, rng);
        if (k >= m) continue;
        return json{{"cycle_id", c.cycle_id}, {"exercise_id", exercise_id}, {"participant", who},
                    {"kind", "pair_choice"}, {"first", j}, {"second", k}};
      }
    };

    auto chosen = want_agreement ? pick_agreement() : pick_pair();
    if (!chosen) chosen = want_agreement ? pick_pair() : pick_agreement();
    if (!chosen) throw Error(Errc::exhausted, "no eligible exercise left for this participant");
    return *chosen;
  }

  CycleResult compute_result(const DialogueCycle& c, std::size_t n_participants, Method method,
                             std::uint64_t seed) const {
    Dataset data(n_participants, c.responses.size(), c.votes);
    auto inference = settings_.inference;
    seed_configs(inference, seed);
    const auto outcome = run_inference(data, method, inference);

    CycleResult result;
    result.method = method;
    result.wall_clock_seconds = outcome.wall_clock_seconds;
    result.seed = seed;
    result.n_participants = n_participants;
    result.n_votes = c.votes.size();
    for (const auto& r : c.responses) {
      const auto j = static_cast<Eigen::Index>(r.response_id);
      ResultRow row{r.response_id, r.text, outcome.estimate.mean_agreement(j),
                    outcome.estimate.std_agreement(j)};
      if (!std::isfinite(row.mean_agreement) || !std::isfinite(row.std_agreement)) {
        throw Error(Errc::numerical, "non-finite estimate for response " + std::to_string(r.response_id));
      }
      result.rows.push_back(row);
    }
    for (const auto& v : c.votes) {
      if (v.is_agreement()) {
        ++(v.agreed ? result.rows[v.first].agree_votes : result.rows[v.first].disagree_votes);
      } else {
        ++result.rows[v.winner()].pair_wins;
        ++result.rows[v.loser()].pair_losses;
      }
    }
    std::stable_sort(result.rows.begin(), result.rows.end(), [](const ResultRow& a, const ResultRow& b) {
      return a.mean_agreement > b.mean_agreement;
    });
    return result;
  }

  /// Applies a validated record. Shared by live operation and replay, so every
  /// precondition a record relies on is re-checked here.
  void apply(const LogRecord& r) {
    const auto& p = r.payload;
    if (r.kind == "ParticipantEnrolled") {
      const auto index = p.at("participant").get<std::size_t>();
      const auto token = p.at("token").get<std::string>();
      if (index != participants_.size() || token_index_.count(token)) {
        throw Error(Errc::corrupt_log, "bad enrollment");
      }
      participants_.push_back(token);
      token_index_[token] = index;
    } else if (r.kind == "CycleOpened") {
      const auto id = p.at("cycle_id").get<std::uint64_t>();
      if (id != cycles_.size() + 1 || live_cycle()) throw Error(Errc::corrupt_log, "bad cycle open");
      auto c = std::make_shared<DialogueCycle>();
      c->cycle_id = id;
      c->question = p.at("question").get<std::string>();
      c->opened_at = r.timestamp;
      cycles_.push_back(std::move(c));
    } else if (r.kind == "ResponseSubmitted") {
      auto& c = mutable_cycle(p.at("cycle_id").get<std::uint64_t>());
      const auto id = p.at("response_id").get<std::size_t>();
      const auto who = p.at("participant").get<std::size_t>();
      if (id != c.responses.size() || who >= participants_.size()) {
        throw Error(Errc::corrupt_log, "bad response");
      }
      c.responses.push_back({id, who, p.at("text").get<std::string>()});
    } else if (r.kind == "VotingOpened") {
      mutable_cycle(p.at("cycle_id").get<std::uint64_t>()).phase = Phase::Voting;
    } else if (r.kind == "ExerciseAssigned") {
      auto& c = mutable_cycle(p.at("cycle_id").get<std::uint64_t>());
      Exercise e;
      e.exercise_id = p.at("exercise_id").get<std::uint64_t>();
      e.participant = p.at("participant").get<std::size_t>();
      e.kind = p.at("kind").get<std::string>() == "agreement" ? EventKind::Agreement : EventKind::PairChoice;
      e.first = p.at("first").get<std::size_t>();
      e.second = p.at("second").get<std::size_t>();
      if (e.exercise_id != c.exercises.size() + 1 || e.first >= c.responses.size() ||
          e.second >= c.responses.size()) {
        throw Error(Errc::corrupt_log, "bad exercise");
      }
      c.exercises.push_back(e);
    } else if (r.kind == "VoteSubmitted") {
      auto& c = mutable_cycle(p.at("cycle_id").get<std::uint64_t>());
      const auto id = p.at("exercise_id").get<std::uint64_t>();
      if (id == 0 || id > c.exercises.size() || c.exercises[id - 1].answered) {
        throw Error(Errc::corrupt_log, "bad vote");
      }
      c.exercises[id - 1].answered = true;
      const auto who = p.at("participant").get<std::size_t>();
      const auto first = p.at("first").get<std::size_t>();
      c.votes.push_back(p.at("kind").get<std::string>() == "agreement"
                            ? ExerciseEvent::agreement(who, first, p.at("agreed").get<bool>())
                            : ExerciseEvent::pair_choice(who, first, p.at("second").get<std::size_t>()));
    } else if (r.kind == "VotingClosed") {
      auto& c = mutable_cycle(p.at("cycle_id").get<std::uint64_t>());
      c.phase = Phase::Inferring;
      c.closed_at = r.timestamp;
      c.pending_method = method_from_string(p.at("method").get<std::string>());
      c.inference_seed = p.at("seed").get<std::uint64_t>();
      c.last_error.clear();
    } else if (r.kind == "InferenceCompleted") {
      auto& c = mutable_cycle(p.at("cycle_id").get<std::uint64_t>());
      if (c.phase != Phase::Inferring) throw Error(Errc::corrupt_log, "result outside Inferring");
      c.result = result_from_json(p.at("result"));
      c.phase = Phase::ResultsReady;
    } else if (r.kind == "InferenceFailed") {
      auto& c = mutable_cycle(p.at("cycle_id").get<std::uint64_t>());
      c.phase = Phase::Voting;
      c.closed_at = 0;
      c.pending_method.reset();
      c.last_error = p.at("error").get<std::string>();
    } else {
      throw Error(Errc::corrupt_log, "unknown record kind '" + r.kind + "'");
    }
  }

  EngineSettings settings_;
  mutable std::mutex writer_;
  std::vector<LogRecord> log_;
  std::ofstream sink_;
  Listener listener_;

  std::vector<std::string> participants_;
  std::map<std::string, std::size_t> token_index_;
  std::vector<std::shared_ptr<const DialogueCycle>> cycles_;

  std::shared_ptr<const EngineSnapshot> snapshot_;
};

}  // namespace rlsdp
