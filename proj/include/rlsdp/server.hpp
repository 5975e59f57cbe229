#pragma once

// HTTP API and WebSocket push channel around an Engine.
//
//   POST /participants                         -> {participant}
//   POST /cycles               {question}      -> {cycle_id}
//   GET  /cycles/current                       -> cycle view (404 when none)
//   GET  /cycles/{id}                          -> cycle view
//   POST /cycles/{id}/responses {participant, text} -> {response_id}
//   POST /cycles/{id}/voting                   -> opens voting
//   GET  /cycles/{id}/exercise?participant=... -> exercise prompt
//   POST /cycles/{id}/votes {participant, exercise_id, outcome}
//   POST /cycles/{id}/close {method}           -> result
//   GET  /cycles/{id}/results                  -> result
//   GET  /state                                -> full engine state

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

// Before httplib.h, whose <resolv.h> defines _res.
#include "rlsdp/engine.hpp"
#include "rlsdp/push.hpp"
#include "httplib.h"
#include "json.hpp"

namespace rlsdp {

inline int http_status(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::dimension_mismatch:
    case Errc::index_out_of_range: return 400;
    case Errc::unknown_cycle:
    case Errc::unknown_participant: return 404;
    case Errc::concurrent_cycle:
    case Errc::wrong_phase:
    case Errc::exhausted:
    case Errc::unassigned_exercise:
    case Errc::duplicate_vote:
    case Errc::results_not_ready:
    case Errc::no_responses: return 409;
    default: return 500;
  }
}

/// Message pushed to console clients after each engine record.
inline json push_message(const LogRecord& record, const EngineSnapshot& snap) {
  json msg = {{"seq", record.seq}, {"kind", record.kind}};
  if (record.payload.contains("cycle_id")) {
    const auto c = snap.find(record.payload["cycle_id"].get<std::uint64_t>());
    if (c) msg["cycle"] = Engine::cycle_json(*c);
  }
  msg["participants"] = snap.participants.size();
  return msg;
}

class Service {
 public:
  /// Ports of 0 pick free ports.
  explicit Service(EngineSettings settings, std::unique_ptr<Engine> engine = nullptr)
      : engine_(engine ? std::move(engine) : std::make_unique<Engine>(settings)),
        push_(static_cast<std::uint16_t>(settings.ws_port)),
        settings_(std::move(settings)) {
    engine_->set_listener([this](const LogRecord& r, const EngineSnapshot& s) {
      push_.broadcast(push_message(r, s).dump());
      if (r.kind == "VotingOpened") arm_timer(r.payload["cycle_id"].get<std::uint64_t>());
    });
    routes();
  }

  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the HTTP port and serves on a background thread; returns the port.
  int start(const std::string& host = "0.0.0.0") {
    http_port_ = settings_.port == 0 ? http_.bind_to_any_port(host)
                                     : (http_.bind_to_port(host, settings_.port) ? settings_.port : -1);
    if (http_port_ < 0) throw Error(Errc::io, "cannot bind HTTP port " + std::to_string(settings_.port));
    http_thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return http_port_;
  }

  void stop() {
    {
      std::lock_guard lock(timer_mu_);
      stopping_ = true;
    }
    timer_cv_.notify_all();
    for (auto& t : timers_) t.join();
    timers_.clear();
    http_.stop();
    if (http_thread_.joinable()) http_thread_.join();
    push_.stop();
  }

  /// Blocks until stop() is called from another thread.
  void wait() {
    if (http_thread_.joinable()) http_thread_.join();
  }

  Engine& engine() { return *engine_; }
  int http_port() const { return http_port_; }
  int ws_port() const { return push_.port(); }
  std::size_t push_clients() const { return push_.client_count(); }

 private:
  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      auto j = json::parse(req.body);
      if (!j.is_object()) throw Error(Errc::invalid_argument, "body must be a JSON object");
      return j;
    } catch (const json::exception& e) {
      throw Error(Errc::invalid_argument, std::string("malformed JSON: ") + e.what());
    }
  }

  static std::uint64_t cycle_id_of(const httplib::Request& req) {
    try {
      return std::stoull(req.matches[1].str());
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, "bad cycle id");
    }
  }

  template <typename T>
  static T field(const json& body, const char* name) {
    if (!body.contains(name)) throw Error(Errc::invalid_argument, std::string("missing field '") + name + "'");
    try {
      return body.at(name).get<T>();
    } catch (const json::exception&) {
      throw Error(Errc::invalid_argument, std::string("bad field '") + name + "'");
    }
  }

  static void reply(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  template <typename Handler>
  auto guarded(Handler h) {
    return [h](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        reply(res, {{"error", to_string(e.code())}, {"message", e.what()}}, http_status(e.code()));
      } catch (const std::exception& e) {
        reply(res, {{"error", "internal"}, {"message", e.what()}}, 500);
      }
    };
  }

  void routes() {
    http_.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
    });
    http_.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    http_.Post("/participants", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, {{"participant", engine_->enroll()}}, 201);
    }));
    http_.Post("/cycles", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = engine_->open_cycle(field<std::string>(body_of(req), "question"));
      reply(res, {{"cycle_id", id}}, 201);
    }));
    http_.Get("/cycles/current", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto snap = engine_->snapshot();
      if (snap->cycles.empty()) throw Error(Errc::unknown_cycle, "no cycle opened yet");
      reply(res, Engine::cycle_json(*snap->cycles.back()));
    }));
    http_.Get(R"(/cycles/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto c = engine_->snapshot()->find(cycle_id_of(req));
      if (!c) throw Error(Errc::unknown_cycle, "no such cycle");
      reply(res, Engine::cycle_json(*c));
    }));
    http_.Post(R"(/cycles/(\d+)/responses)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_of(req);
      const auto id = engine_->submit_response(cycle_id_of(req), field<std::string>(body, "participant"),
                                               field<std::string>(body, "text"));
      reply(res, {{"response_id", id}}, 201);
    }));
    http_.Post(R"(/cycles/(\d+)/voting)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      engine_->open_voting(cycle_id_of(req));
      reply(res, {{"phase", "Voting"}});
    }));
    http_.Get(R"(/cycles/(\d+)/exercise)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("participant")) throw Error(Errc::invalid_argument, "missing participant");
      reply(res, engine_->next_exercise(cycle_id_of(req), req.get_param_value("participant")));
    }));
    http_.Post(R"(/cycles/(\d+)/votes)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_of(req);
      if (!body.contains("outcome")) throw Error(Errc::invalid_argument, "missing field 'outcome'");
      engine_->submit_vote(cycle_id_of(req), field<std::string>(body, "participant"),
                           field<std::uint64_t>(body, "exercise_id"), body["outcome"]);
      reply(res, {{"accepted", true}}, 201);
    }));
    http_.Post(R"(/cycles/(\d+)/close)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_of(req);
      const auto method = body.contains("method") ? method_from_string(field<std::string>(body, "method"))
                                                  : settings_.method;
      reply(res, result_to_json(engine_->close_voting_and_infer(cycle_id_of(req), method)));
    }));
    http_.Get(R"(/cycles/(\d+)/results)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, result_to_json(engine_->get_results(cycle_id_of(req))));
    }));
    http_.Get("/state", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, Engine::state_json(*engine_->snapshot()));
    }));
  }

  /// Closes voting after auto_close_seconds unless the moderator got there first.
  void arm_timer(std::uint64_t cycle_id) {
    if (settings_.auto_close_seconds <= 0.0) return;
    std::lock_guard lock(timer_mu_);
    if (stopping_) return;
    timers_.emplace_back([this, cycle_id] {
      std::unique_lock lock(timer_mu_);
      const auto deadline = std::chrono::steady_clock::now() +
                            std::chrono::duration<double>(settings_.auto_close_seconds);
      if (timer_cv_.wait_until(lock, deadline, [this] { return stopping_; })) return;
      lock.unlock();
      try {
        engine_->close_voting_and_infer(cycle_id, settings_.method);
      } catch (const Error&) {
        // Already closed by hand, or inference failed and the cycle is back in Voting.
      }
    });
  }

  std::unique_ptr<Engine> engine_;
  PushServer push_;
  EngineSettings settings_;
  httplib::Server http_;
  std::thread http_thread_;
  int http_port_ = -1;

  std::mutex timer_mu_;
  std::condition_variable timer_cv_;
  std::vector<std::thread> timers_;
  bool stopping_ = false;
};

}  // namespace rlsdp
