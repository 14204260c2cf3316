#include "gensim/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>

#include <httplib.h>

#include "gensim/error.hpp"

namespace gensim {

using nlohmann::json;

const char* to_string(SimStatus status) {
  switch (status) {
    case SimStatus::configured: return "configured";
    case SimStatus::running: return "running";
    case SimStatus::paused: return "paused";
    case SimStatus::stopped: return "stopped";
    case SimStatus::finished: return "finished";
  }
  return "unknown";
}

bool legal_transition(SimStatus from, SimStatus to) {
  switch (from) {
    case SimStatus::configured: return to == SimStatus::running;
    case SimStatus::running:
      return to == SimStatus::paused || to == SimStatus::stopped || to == SimStatus::finished;
    case SimStatus::paused: return to == SimStatus::running;
    default: return false;
  }
}

Session::Session(std::string id, std::unique_ptr<Simulation> sim) : id_(std::move(id)), sim_(std::move(sim)) {}

Session::~Session() {
  sim_->request_stop();
  if (runner_.joinable()) runner_.join();
}

SimStatus Session::status() const {
  std::lock_guard lock(mutex_);
  return status_;
}

std::vector<SimStatus> Session::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

bool Session::terminal() const {
  std::lock_guard lock(mutex_);
  return (status_ == SimStatus::stopped || status_ == SimStatus::finished) && !runner_active_;
}

json Session::handle() const {
  std::lock_guard lock(mutex_);
  json h = {{"id", id_},
            {"status", to_string(status_)},
            {"current_round", sim_->current_round()},
            {"rounds", sim_->config().rounds},
            {"scenario", sim_->config().scenario},
            {"num_agents", sim_->config().num_agents},
            {"last_seq", sim_->events().last_seq()}};
  json hist = json::array();
  for (auto s : history_) hist.push_back(to_string(s));
  h["history"] = std::move(hist);
  if (last_error_) h["error"] = *last_error_;
  return h;
}

void Session::transition(SimStatus to) {
  if (!legal_transition(status_, to)) {
    throw ConflictError(std::string("simulation is ") + to_string(status_) + ", cannot become " + to_string(to));
  }
  status_ = to;
  history_.push_back(to);
}

void Session::run(std::optional<std::uint64_t> rounds) {
  std::unique_lock lock(mutex_);
  if (!legal_transition(status_, SimStatus::running)) {
    throw ConflictError(std::string("simulation is ") + to_string(status_) + ", cannot run");
  }
  // A paused runner may still be finishing its round.
  auto previous = std::move(runner_);
  if (previous.joinable()) {
    lock.unlock();
    previous.join();
    lock.lock();
  }
  transition(SimStatus::running);
  last_error_.reset();
  sim_->clear_stop();
  const auto& config = sim_->config();
  const std::uint64_t remaining = config.rounds - std::min(config.rounds, sim_->current_round());
  const std::uint64_t n = rounds ? std::min(*rounds, remaining) : remaining;
  runner_active_ = true;
  runner_ = std::thread([this, n] {
    std::optional<std::string> failure;
    try {
      for (const auto& report : sim_->run(n)) {
        if (report.aborted) failure = report.abort_reason.value_or("round aborted");
      }
    } catch (const std::exception& e) {
      failure = e.what();
    }
    std::lock_guard guard(mutex_);
    if (status_ == SimStatus::running) {
      if (failure) {
        transition(SimStatus::stopped);
        last_error_ = failure;
      } else if (sim_->finished()) {
        transition(SimStatus::finished);
      } else {
        transition(SimStatus::paused);
      }
    }
    runner_active_ = false;
  });
}

void Session::pause() {
  std::lock_guard lock(mutex_);
  transition(SimStatus::paused);
  sim_->request_stop();
}

void Session::stop() {
  std::lock_guard lock(mutex_);
  transition(SimStatus::stopped);
  sim_->request_stop();
}

void Session::wait() {
  std::thread runner;
  {
    std::lock_guard lock(mutex_);
    runner = std::move(runner_);
  }
  if (runner.joinable()) runner.join();
}

namespace {

struct ApiFailure {
  int status;
  std::string code;
  std::string message;
  json fields;
};

ApiFailure classify(const std::exception& e) {
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) {
    return {400, "invalid_config", e.what(), ce->field_errors()};
  }
  if (const auto* ge = dynamic_cast<const Error*>(&e)) {
    switch (ge->kind()) {
      case ErrorKind::validation:
      case ErrorKind::format:
      case ErrorKind::io: return {400, "invalid_config", e.what(), nullptr};
      case ErrorKind::not_found: return {404, "not_found", e.what(), nullptr};
      case ErrorKind::conflict: return {409, "conflict", e.what(), nullptr};
      case ErrorKind::backend:
      case ErrorKind::transport:
      case ErrorKind::protocol: return {502, "backend_error", e.what(), nullptr};
    }
  }
  if (dynamic_cast<const json::exception*>(&e)) return {400, "invalid_config", e.what(), nullptr};
  return {500, "backend_error", e.what(), nullptr};
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const json& fields = nullptr) {
  json err = {{"code", code}, {"message", message}};
  if (!fields.is_null()) err["fields"] = fields;
  res.status = status;
  res.set_content(json{{"error", err}}.dump(), "application/json");
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError(std::string(what) + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

AgentId agent_id_param(const httplib::Request& req) {
  return AgentId{parse_u64(req.path_params.at("aid"), "agent id")};
}

json recent_events(const Simulation& sim, AgentId id, std::size_t limit) {
  auto all = sim.events().all();
  json out = json::array();
  std::vector<const ActionEvent*> picked;
  for (auto it = all.rbegin(); it != all.rend() && picked.size() < limit; ++it) {
    if (it->agent_id == id) picked.push_back(&*it);
  }
  for (auto it = picked.rbegin(); it != picked.rend(); ++it) out.push_back(json::parse((*it)->to_json_line()));
  return out;
}

std::string sse_frame(const ActionEvent& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: action\ndata: " + e.to_json_line() + "\n\n";
}

}  // namespace

struct ServiceRoutes {
  Service& svc;
  std::atomic<bool>& stopping;

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Handler guarded(Handler inner) const {
    return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
      try {
        inner(req, res);
      } catch (const std::exception& e) {
        auto f = classify(e);
        send_error(res, f.status, f.code, f.message, f.fields);
      }
    };
  }

  // Replays the stored response for a repeated Idempotency-Key. A duplicate
  // arriving while the first is in flight waits for it. 5xx replies are not
  // kept so a retry after a transient failure runs again.
  Handler idempotent(Handler inner) const {
    Service* s = &svc;
    auto g = guarded(std::move(inner));
    return [s, g](const httplib::Request& req, httplib::Response& res) {
      const auto key = req.get_header_value("Idempotency-Key");
      if (key.empty()) return g(req, res);
      const std::string slot = req.method + " " + req.path + " " + key;
      {
        std::unique_lock lock(s->idem_mutex_);
        for (;;) {
          auto it = s->idempotent_.find(slot);
          if (it == s->idempotent_.end()) {
            s->idempotent_[slot] = Service::Idempotent{false, req.body, 0, {}};
            break;
          }
          if (it->second.done) {
            if (it->second.fingerprint != req.body) {
              return send_error(res, 409, "conflict", "Idempotency-Key reused with a different request body");
            }
            res.status = it->second.status;
            res.set_content(it->second.body, "application/json");
            res.set_header("Idempotent-Replayed", "true");
            return;
          }
          s->idem_cv_.wait(lock);
        }
      }
      g(req, res);
      {
        std::lock_guard lock(s->idem_mutex_);
        if (res.status >= 500) {
          s->idempotent_.erase(slot);
        } else {
          auto& entry = s->idempotent_[slot];
          entry.done = true;
          entry.status = res.status;
          entry.body = res.body;
        }
      }
      s->idem_cv_.notify_all();
    };
  }

  std::shared_ptr<Session> sim_param(const httplib::Request& req) const {
    return svc.session(req.path_params.at("id"));
  }

  // Top-level routes name their simulation in the body or the query string;
  // with a single hosted simulation it may be omitted.
  std::shared_ptr<Session> sim_for(const httplib::Request& req, const json& body) const {
    if (req.path_params.count("id")) return sim_param(req);
    if (body.contains("simulation_id")) return svc.session(body.at("simulation_id").get<std::string>());
    if (req.has_param("simulation")) return svc.session(req.get_param_value("simulation"));
    auto all = svc.sessions();
    if (all.size() == 1) return all.front();
    throw ValidationError("simulation_id: required when the service hosts " + std::to_string(all.size()) +
                          " simulations");
  }

  void install(httplib::Server& server) {
    server.Get("/health", guarded([](const auto&, auto& res) { send_json(res, 200, {{"status", "ok"}}); }));

    server.Post("/simulations", idempotent([this](const auto& req, auto& res) {
                  auto config = SimulationConfig::from_json(body_of(req));
                  send_json(res, 201, svc.create(std::move(config))->handle());
                }));
    server.Get("/simulations", guarded([this](const auto&, auto& res) {
                 json out = json::array();
                 for (const auto& s : svc.sessions()) out.push_back(s->handle());
                 send_json(res, 200, out);
               }));
    server.Get("/simulations/:id", guarded([this](const auto& req, auto& res) {
                 auto s = sim_param(req);
                 json h = s->handle();
                 h["config"] = s->sim().config().to_json();
                 json reports = json::array();
                 for (const auto& r : s->sim().reports()) reports.push_back(r.to_json());
                 h["reports"] = std::move(reports);
                 send_json(res, 200, h);
               }));

    server.Post("/simulations/:id/run", idempotent([this](const auto& req, auto& res) {
                  auto body = body_of(req);
                  std::optional<std::uint64_t> rounds;
                  if (body.contains("rounds") && !body["rounds"].is_null()) {
                    if (!body["rounds"].is_number_unsigned()) {
                      throw ConfigError({"rounds: must be a non-negative integer"});
                    }
                    rounds = body["rounds"].template get<std::uint64_t>();
                  }
                  auto s = sim_param(req);
                  s->run(rounds);
                  send_json(res, 200, s->handle());
                }));
    server.Post("/simulations/:id/pause", idempotent([this](const auto& req, auto& res) {
                  auto s = sim_param(req);
                  s->pause();
                  send_json(res, 200, s->handle());
                }));
    server.Post("/simulations/:id/resume", idempotent([this](const auto& req, auto& res) {
                  auto s = sim_param(req);
                  s->run(std::nullopt);
                  send_json(res, 200, s->handle());
                }));
    server.Post("/simulations/:id/stop", idempotent([this](const auto& req, auto& res) {
                  auto s = sim_param(req);
                  s->stop();
                  send_json(res, 200, s->handle());
                }));
    server.Post("/simulations/:id/checkpoint", idempotent([this](const auto& req, auto& res) {
                  auto body = body_of(req);
                  auto s = sim_param(req);
                  if (!body.contains("path")) throw ValidationError("path: required");
                  std::filesystem::path path = body["path"].template get<std::string>();
                  s->sim().checkpoint(path);
                  send_json(res, 200, {{"path", std::filesystem::absolute(path).string()}});
                }));

    auto list_agents = guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = sim_param(req);
      const std::string q = req.has_param("q") ? req.get_param_value("q") : "";
      const std::uint64_t offset = req.has_param("offset") ? parse_u64(req.get_param_value("offset"), "offset") : 0;
      std::uint64_t limit = req.has_param("limit") ? parse_u64(req.get_param_value("limit"), "limit") : 50;
      limit = std::clamp<std::uint64_t>(limit, 1, 1000);
      auto hits = s->sim().search(q);
      json page = json::array();
      for (std::uint64_t i = offset; i < hits.size() && i < offset + limit; ++i) {
        page.push_back({{"id", hits[i].id.value}, {"public", hits[i].public_attrs}});
      }
      send_json(res, 200, {{"total", hits.size()}, {"offset", offset}, {"limit", limit}, {"agents", page}});
    });
    server.Get("/simulations/:id/agents", list_agents);

    auto get_agent = guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = sim_for(req, json::object());
      const AgentId id = agent_id_param(req);
      Agent agent = s->sim().agent(id);
      json memory = json::array();
      for (const auto& r : agent.memory().short_term()) memory.push_back(r.to_json());
      send_json(res, 200,
                {{"simulation_id", s->id()},
                 {"profile", agent.profile().to_json()},
                 {"short_term_memory", memory},
                 {"memory_size", agent.memory().long_term().size()},
                 {"recent_events", recent_events(s->sim(), id, 20)}});
    });
    server.Get("/simulations/:id/agents/:aid", get_agent);
    server.Get("/agents/:aid", get_agent);

    auto interview = idempotent([this](const httplib::Request& req, httplib::Response& res) {
      auto body = body_of(req);
      auto s = sim_for(req, body);
      if (!body.contains("question") || !body["question"].is_string()) throw ValidationError("question: required");
      auto exchange = s->sim().interview(agent_id_param(req), body["question"].get<std::string>());
      send_json(res, 200, exchange.to_json());
    });
    server.Post("/simulations/:id/agents/:aid/interview", interview);
    server.Post("/agents/:aid/interview", interview);

    server.Post("/simulations/:id/interventions", idempotent([this](const auto& req, auto& res) {
                  auto s = sim_param(req);
                  auto intervention = Intervention::from_json(body_of(req));
                  s->sim().submit_intervention(intervention);
                  send_json(res, 202, {{"accepted", true}, {"intervention", intervention.to_json()}});
                }));
    server.Get("/simulations/:id/interventions", guarded([this](const auto& req, auto& res) {
                 json out = json::array();
                 for (const auto& i : sim_param(req)->sim().pending_interventions()) out.push_back(i.to_json());
                 send_json(res, 200, out);
               }));

    server.Get("/simulations/:id/events", [this](const httplib::Request& req, httplib::Response& res) {
      std::shared_ptr<Session> s;
      std::uint64_t from = 0;
      try {
        s = sim_param(req);
        if (req.has_param("from_seq")) from = parse_u64(req.get_param_value("from_seq"), "from_seq");
        const auto last_id = req.get_header_value("Last-Event-ID");
        if (!last_id.empty()) from = std::max(from, parse_u64(last_id, "Last-Event-ID"));
      } catch (const std::exception& e) {
        auto f = classify(e);
        return send_error(res, f.status, f.code, f.message);
      }
      res.set_header("Cache-Control", "no-cache");
      auto cursor = std::make_shared<std::uint64_t>(from);
      auto* flag = &stopping;
      res.set_chunked_content_provider(
          "text/event-stream", [s, cursor, flag](std::size_t, httplib::DataSink& sink) {
            using namespace std::chrono_literals;
            if (flag->load()) {
              sink.done();
              return true;
            }
            // Read terminality before the log so a final batch is never missed.
            const bool terminal = s->terminal();
            auto batch = s->sim().events().since(*cursor, 512);
            if (!batch.empty()) {
              std::string chunk;
              for (const auto& e : batch) chunk += sse_frame(e);
              if (!sink.write(chunk.data(), chunk.size())) return false;
              *cursor = batch.back().seq;
              return true;
            }
            if (terminal) {
              sink.done();
              return true;
            }
            if (!s->sim().events().wait_for(*cursor, 500ms)) {
              static constexpr char kBeat[] = ": keepalive\n\n";
              if (!sink.write(kBeat, sizeof(kBeat) - 1)) return false;
            }
            return true;
          });
    });
    server.Get("/simulations/:id/events.json", guarded([this](const auto& req, auto& res) {
                 auto s = sim_param(req);
                 const auto from = req.has_param("from_seq") ? parse_u64(req.get_param_value("from_seq"), "from_seq") : 0;
                 const auto limit = req.has_param("limit") ? parse_u64(req.get_param_value("limit"), "limit") : 0;
                 std::string out = "[";
                 for (const auto& e : s->sim().events().since(from, limit)) {
                   if (out.size() > 1) out += ',';
                   out += e.to_json_line();
                 }
                 out += ']';
                 res.set_content(out, "application/json");
               }));

    auto score = idempotent([this](const httplib::Request& req, httplib::Response& res) {
      auto body = body_of(req);
      auto s = sim_for(req, body);
      const auto seq = body.at("event_seq").get<std::uint64_t>();
      auto event = s->sim().events().at(seq);
      if (!event) throw NotFoundError("event_seq " + std::to_string(seq) + " not found");
      ScoreFeedback fb{seq, event->q, event->a, body.at("s").get<double>(),
                       feedback_source_from_string(body.value("source", "human"))};
      s->feedback().add_score(fb);
      send_json(res, 201, fb.to_json());
    });
    server.Post("/feedback/score", score);
    server.Post("/simulations/:id/feedback/score", score);

    auto revision = idempotent([this](const httplib::Request& req, httplib::Response& res) {
      auto body = body_of(req);
      auto s = sim_for(req, body);
      const auto seq = body.at("event_seq").get<std::uint64_t>();
      auto event = s->sim().events().at(seq);
      if (!event) throw NotFoundError("event_seq " + std::to_string(seq) + " not found");
      RevisionFeedback fb{seq, event->q, body.at("a_prime").get<std::string>(),
                          feedback_source_from_string(body.value("source", "human"))};
      s->feedback().add_revision(fb, event->a);
      send_json(res, 201, fb.to_json());
    });
    server.Post("/feedback/revision", revision);
    server.Post("/simulations/:id/feedback/revision", revision);

    auto judge = idempotent([this](const httplib::Request& req, httplib::Response& res) {
      auto body = body_of(req);
      auto s = sim_for(req, body);
      const std::string which = body.value("judge", "oracle");
      std::shared_ptr<Backend> backend;
      if (which == "oracle") {
        backend = std::make_shared<OracleJudge>();
      } else if (which == "backend") {
        backend = s->sim().gateway_shared();
      } else {
        throw ValidationError("judge: expected oracle or backend, got '" + which + "'");
      }
      EvaluateOptions options;
      options.sample = body.value("sample", options.sample);
      options.seed = body.value("seed", s->sim().config().seed);
      options.lanes = s->sim().config().workers;
      const double revise_below = body.value("revise_below", 5.0);
      auto events = s->sim().events().all();
      FeedbackStore local;
      auto series = evaluate_rounds(events, JudgeConfig{}, *backend, options, &local);
      JudgeConfig reviser{JudgeConfig::default_rubric(), JudgeMode::revise};
      std::size_t revised = 0;
      for (const auto& fb : local.scores()) {
        s->feedback().add_score(fb);
        if (fb.s >= revise_below) continue;
        auto event = s->sim().events().at(fb.event_seq);
        try {
          judge_revise(*event, reviser, *backend, &s->feedback());
          ++revised;
        } catch (const ConflictError&) {
        }
      }
      json out = json::array();
      for (const auto& r : series) out.push_back(r.to_json());
      send_json(res, 200, {{"scores", local.score_count()}, {"revisions", revised}, {"series", out}});
    });
    server.Post("/judge", judge);
    server.Post("/simulations/:id/judge", judge);

    auto export_route = idempotent([this](const httplib::Request& req, httplib::Response& res) {
      auto body = body_of(req);
      auto s = sim_for(req, body);
      const auto kind_name = req.path_params.at("kind");
      const auto kind = dataset_kind_from_string(kind_name);
      std::filesystem::path path =
          body.contains("path") ? std::filesystem::path(body["path"].get<std::string>())
                                : svc.options_.data_dir / s->id() / (kind_name + ".jsonl");
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      std::size_t n = 0;
      if (kind == DatasetKind::sft) {
        auto revisions = s->feedback().revisions();
        n = export_sft_dataset(revisions, path);
      } else {
        auto scores = s->feedback().scores();
        n = export_reward_dataset(scores, path);
      }
      send_json(res, 200, {{"path", std::filesystem::absolute(path).string()}, {"records", n}, {"kind", kind_name}});
    });
    server.Post("/export/:kind", export_route);
    server.Post("/simulations/:id/export/:kind", export_route);

    server.Post("/finetune", idempotent([](const auto& req, auto& res) {
                  auto body = body_of(req);
                  if (!body.contains("dataset_path")) throw ValidationError("dataset_path: required");
                  if (!body.contains("endpoint")) throw ValidationError("endpoint: required");
                  const auto method = body.value("method", std::string("sft"));
                  auto job = trigger_external_finetune(body["dataset_path"].template get<std::string>(),
                                                       body["endpoint"].template get<std::string>(), method);
                  send_json(res, 202, {{"job_id", job}, {"method", method}});
                }));
  }
};

Service::Service(ServiceOptions options) : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

Service::~Service() { stop(); }

void Service::routes() {
  auto& server = *server_;
  const int threads = std::max(4, options_.threads);
  server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  if (options_.token) {
    server.set_pre_routing_handler([token = *options_.token](const httplib::Request& req, httplib::Response& res) {
      if (req.get_header_value("Authorization") == "Bearer " + token) return httplib::Server::HandlerResponse::Unhandled;
      send_error(res, 401, "invalid_config", "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    });
  }
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) return send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
    send_error(res, res.status, res.status >= 500 ? "backend_error" : "invalid_config",
               "request failed with status " + std::to_string(res.status));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      auto f = classify(e);
      send_error(res, f.status, f.code, f.message, f.fields);
    } catch (...) {
      send_error(res, 500, "backend_error", "unknown failure");
    }
  });
  routes_ = std::make_unique<ServiceRoutes>(ServiceRoutes{*this, stopping_});
  routes_->install(server);
}

int Service::start(const std::string& host, int port) {
  stopping_.store(false);
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  stopping_.store(false);
  if (!server_->listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
  stopping_.store(true);
  if (server_->is_running()) server_->stop();
  if (thread_.joinable()) thread_.join();
  std::vector<std::shared_ptr<Session>> all = sessions();
  for (auto& s : all) {
    s->sim().request_stop();
    s->wait();
  }
}

std::shared_ptr<Session> Service::create(SimulationConfig config) {
  config.validate();
  auto sim = std::make_unique<Simulation>(std::move(config));
  std::lock_guard lock(mutex_);
  auto id = "sim-" + std::to_string(next_id_++);
  auto s = std::make_shared<Session>(id, std::move(sim));
  sessions_.emplace(id, s);
  return s;
}

std::shared_ptr<Session> Service::session(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("simulation '" + id + "' not found");
  return it->second;
}

std::vector<std::shared_ptr<Session>> Service::sessions() const {
  std::lock_guard lock(mutex_);
  std::vector<std::shared_ptr<Session>> out;
  for (const auto& [id, s] : sessions_) out.push_back(s);
  return out;
}

}  // namespace gensim
