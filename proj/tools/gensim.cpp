// gensim command line: runs simulations and experiments locally, or drives a
// running service with --server.
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "gensim/correction.hpp"
#include "gensim/error.hpp"
#include "gensim/experiments.hpp"
#include "gensim/service.hpp"
#include "gensim/simulation.hpp"

using namespace gensim;
using nlohmann::json;

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return json::parse(in);
}

struct Remote {
  std::string server;
  std::string token = env_or("GENSIM_SERVICE_TOKEN", "");
  std::string idempotency_key;

  httplib::Headers headers() const {
    httplib::Headers h;
    if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
    if (!idempotency_key.empty()) h.emplace("Idempotency-Key", idempotency_key);
    return h;
  }

  json call(const std::string& method, const std::string& path, const json& body = json::object()) const {
    httplib::Client c(server);
    c.set_read_timeout(300, 0);
    auto res = method == "GET" ? c.Get(path, headers()) : c.Post(path, headers(), body.dump(), "application/json");
    if (!res) throw TransportError("cannot reach " + server + ": " + httplib::to_string(res.error()));
    auto j = json::parse(res->body, nullptr, false);
    if (res->status >= 300) {
      std::string msg = j.is_object() && j.contains("error") ? j["error"].value("message", res->body) : res->body;
      throw std::runtime_error("HTTP " + std::to_string(res->status) + ": " + msg);
    }
    return j;
  }
};

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

std::unique_ptr<Simulation> open_local(const std::string& config, const std::string& checkpoint) {
  if (!checkpoint.empty()) return Simulation::restore(checkpoint);
  if (!config.empty()) return std::make_unique<Simulation>(SimulationConfig::load(config));
  throw ValidationError("one of --config, --checkpoint or --server is required");
}

std::vector<ActionEvent> read_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<ActionEvent> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(ActionEvent::from_json(json::parse(line)));
  }
  return out;
}

// Judges an event log with the rule-based oracle or a configured backend and
// revises low scorers.
json label_events(const std::vector<ActionEvent>& events, const std::string& backend_config, std::size_t sample,
                  double revise_below, FeedbackStore& store) {
  std::shared_ptr<Backend> backend;
  if (backend_config.empty()) {
    backend = std::make_shared<OracleJudge>();
  } else {
    const auto j = read_json(backend_config);
    backend = make_gateway(BackendConfig::from_json(j.value("backend", j)), RetryPolicy::from_json(j.value("retry", json::object())));
  }
  EvaluateOptions options;
  options.sample = sample;
  options.lanes = 8;
  auto series = evaluate_rounds(events, JudgeConfig{}, *backend, options, &store);
  JudgeConfig reviser{JudgeConfig::default_rubric(), JudgeMode::revise};
  std::map<std::uint64_t, const ActionEvent*> by_seq;
  for (const auto& e : events) by_seq[e.seq] = &e;
  for (const auto& fb : store.scores()) {
    if (fb.s >= revise_below) continue;
    try {
      judge_revise(*by_seq.at(fb.event_seq), reviser, *backend, &store);
    } catch (const ConflictError&) {
    }
  }
  json out = json::array();
  for (const auto& r : series) out.push_back(r.to_json());
  return {{"scores", store.score_count()}, {"revisions", store.revision_count()}, {"series", out}};
}

Service* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gensim: large-scale LLM agent social simulation"};
  app.require_subcommand(1);
  Remote remote;
  std::string sim_id;
  auto add_remote = [&](CLI::App* cmd) {
    cmd->add_option("--server", remote.server, "Service base URL, e.g. http://127.0.0.1:8080");
    cmd->add_option("--sim", sim_id, "Simulation id on the service");
    cmd->add_option("--idempotency-key", remote.idempotency_key, "Idempotency-Key header for retries");
  };

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host = "127.0.0.1";
  int port = std::stoi(env_or("GENSIM_PORT", "8080"));
  std::string data_dir = "gensim-data";
  std::string token = env_or("GENSIM_SERVICE_TOKEN", "");
  serve->add_option("--host", host);
  serve->add_option("--port", port, "Defaults to $GENSIM_PORT or 8080");
  serve->add_option("--data-dir", data_dir, "Where exports go");
  serve->add_option("--token", token, "Require this bearer token (default $GENSIM_SERVICE_TOKEN)");

  auto* run = app.add_subcommand("run", "Run a simulation from a config file");
  std::string config_path, checkpoint_in, checkpoint_out, events_path;
  std::optional<std::uint64_t> rounds;
  bool wait = true;
  run->add_option("--config", config_path, "SimulationConfig JSON");
  run->add_option("--restore", checkpoint_in, "Resume from a checkpoint");
  run->add_option("--rounds", rounds, "Rounds to run (default: the rest)");
  run->add_option("--checkpoint", checkpoint_out, "Write a checkpoint when done");
  run->add_option("--events", events_path, "Event log file (overrides the config)");
  run->add_flag("!--no-wait", wait, "With --server, return once the run starts");
  add_remote(run);

  std::string control_action;
  auto* control = app.add_subcommand("control", "pause, resume or stop a hosted simulation");
  control->add_option("action", control_action)->required()->check(CLI::IsMember({"pause", "resume", "stop"}));
  add_remote(control);

  auto* status = app.add_subcommand("status", "Show a hosted simulation, or list them all");
  add_remote(status);

  auto* interview = app.add_subcommand("interview", "Ask one agent a question");
  std::uint64_t agent_id = 0;
  std::string question;
  interview->add_option("--id", agent_id, "Agent id")->required();
  interview->add_option("--question,-q", question)->required();
  interview->add_option("--config", config_path);
  interview->add_option("--checkpoint", checkpoint_in);
  add_remote(interview);

  auto* search = app.add_subcommand("search", "Find agents by public attributes");
  std::string query;
  std::size_t offset = 0, limit = 50;
  search->add_option("query", query);
  search->add_option("--offset", offset);
  search->add_option("--limit", limit);
  search->add_option("--config", config_path);
  search->add_option("--checkpoint", checkpoint_in);
  add_remote(search);

  auto* agent = app.add_subcommand("agent", "Show an agent's profile and recent events");
  agent->add_option("--id", agent_id)->required();
  add_remote(agent);

  auto* intervene = app.add_subcommand("intervene", "Queue an intervention on a hosted simulation");
  std::uint64_t apply_at = 0;
  std::string broadcast, set_global;
  intervene->add_option("--at", apply_at, "Round it applies at")->required();
  auto* bc = intervene->add_option("--broadcast", broadcast, "Message every agent observes");
  intervene->add_option("--set", set_global, "key=value global")->excludes(bc);
  add_remote(intervene);

  auto* events = app.add_subcommand("events", "Stream the event feed of a hosted simulation");
  std::uint64_t from_seq = 0;
  events->add_option("--from-seq", from_seq);
  add_remote(events);

  auto* feedback = app.add_subcommand("feedback", "Label one event on a hosted simulation");
  std::uint64_t event_seq = 0;
  std::optional<double> score;
  std::string a_prime;
  feedback->add_option("--seq", event_seq)->required();
  auto* sc = feedback->add_option("--score", score, "Score in [0, 10]");
  feedback->add_option("--revision", a_prime, "Corrected action")->excludes(sc);
  add_remote(feedback);

  auto* judge = app.add_subcommand("judge", "Score and revise events with a judge");
  std::string backend_config, sft_out, reward_out;
  std::size_t sample = 100;
  double revise_below = 5.0;
  judge->add_option("--events", events_path, "Event log to judge");
  judge->add_option("--backend", backend_config, "Judge backend config JSON (default: rule-based oracle)");
  judge->add_option("--sample", sample, "Events judged per round");
  judge->add_option("--revise-below", revise_below);
  judge->add_option("--sft", sft_out, "Write the SFT dataset here");
  judge->add_option("--reward", reward_out, "Write the reward dataset here");
  add_remote(judge);

  auto* export_cmd = app.add_subcommand("export", "Export labels as a fine-tuning dataset");
  std::string kind, out_path;
  export_cmd->add_option("--kind", kind)->required()->check(CLI::IsMember({"sft", "reward"}));
  export_cmd->add_option("--out", out_path, "Output JSONL");
  export_cmd->add_option("--events", events_path, "Label this event log locally with the oracle judge");
  add_remote(export_cmd);

  auto* validate = app.add_subcommand("validate", "Check a dataset file against its schema");
  validate->add_option("--kind", kind)->required()->check(CLI::IsMember({"sft", "reward"}));
  validate->add_option("file", out_path)->required();

  auto* finetune = app.add_subcommand("finetune", "Hand a dataset to an external training service");
  std::string dataset, endpoint, method = "sft";
  finetune->add_option("--dataset", dataset)->required();
  finetune->add_option("--endpoint", endpoint)->required();
  finetune->add_option("--method", method)->check(CLI::IsMember({"sft", "ppo"}));
  add_remote(finetune);

  auto* bench = app.add_subcommand("bench", "Run an experiment and write its CSV");
  std::string experiment;
  bench->add_option("experiment", experiment)->required()->check(CLI::IsMember({"fluctuation", "scaling"}));
  bench->add_option("--config", config_path, "Experiment config JSON (defaults otherwise)");
  bench->add_option("--out", out_path, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const bool is_remote = !remote.server.empty();
    auto sim_path = [&] {
      if (sim_id.empty()) throw ValidationError("--sim is required with --server");
      return "/simulations/" + sim_id;
    };

    if (*serve) {
      ServiceOptions options;
      options.data_dir = data_dir;
      if (!token.empty()) options.token = token;
      Service service(options);
      g_service = &service;
      std::signal(SIGINT, [](int) { g_service->stop(); });
      std::signal(SIGTERM, [](int) { g_service->stop(); });
      std::cerr << "gensim serving on http://" << host << ":" << port << "\n";
      service.listen(host, port);
      return 0;
    }

    if (*run) {
      if (is_remote) {
        json handle;
        if (sim_id.empty()) {
          if (config_path.empty()) throw ValidationError("--config or --sim is required");
          handle = remote.call("POST", "/simulations", read_json(config_path));
          sim_id = handle["id"];
        }
        json body = json::object();
        if (rounds) body["rounds"] = *rounds;
        handle = remote.call("POST", sim_path() + "/run", body);
        while (wait && handle["status"] == "running") {
          std::this_thread::sleep_for(std::chrono::milliseconds(200));
          handle = remote.call("GET", sim_path());
        }
        handle.erase("config");
        print(handle);
        return 0;
      }
      std::unique_ptr<Simulation> sim;
      if (!checkpoint_in.empty()) {
        sim = Simulation::restore(checkpoint_in, nullptr,
                                  events_path.empty() ? std::nullopt : std::optional<std::string>(events_path));
      } else {
        if (config_path.empty()) throw ValidationError("--config or --restore is required");
        auto config = SimulationConfig::load(config_path);
        if (!events_path.empty()) config.event_log = events_path;
        sim = std::make_unique<Simulation>(std::move(config));
      }
      sim->run(rounds, [](const RoundReport& r) { std::cout << r.to_json().dump() << "\n" << std::flush; });
      if (!checkpoint_out.empty()) sim->checkpoint(checkpoint_out);
      return 0;
    }

    if (*control) {
      print(remote.call("POST", sim_path() + "/" + control_action));
      return 0;
    }

    if (*status) {
      print(sim_id.empty() ? remote.call("GET", "/simulations") : remote.call("GET", sim_path()));
      return 0;
    }

    if (*interview) {
      if (is_remote) {
        print(remote.call("POST", sim_path() + "/agents/" + std::to_string(agent_id) + "/interview",
                          {{"question", question}}));
      } else {
        print(open_local(config_path, checkpoint_in)->interview(AgentId{agent_id}, question).to_json());
      }
      return 0;
    }

    if (*search) {
      if (is_remote) {
        print(remote.call("GET", sim_path() + "/agents?q=" + httplib::detail::encode_query_param(query) +
                                     "&offset=" + std::to_string(offset) + "&limit=" + std::to_string(limit)));
      } else {
        auto hits = open_local(config_path, checkpoint_in)->search(query);
        for (std::size_t i = offset; i < hits.size() && i < offset + limit; ++i) {
          std::cout << hits[i].to_json().dump() << "\n";
        }
      }
      return 0;
    }

    if (*agent) {
      print(remote.call("GET", sim_path() + "/agents/" + std::to_string(agent_id)));
      return 0;
    }

    if (*intervene) {
      json body = {{"apply_at_round", apply_at}};
      if (!broadcast.empty()) {
        body["kind"] = "broadcast";
        body["message"] = broadcast;
      } else {
        const auto eq = set_global.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, or use --broadcast");
        body["kind"] = "set_global";
        body["key"] = set_global.substr(0, eq);
        body["value"] = set_global.substr(eq + 1);
      }
      print(remote.call("POST", sim_path() + "/interventions", body));
      return 0;
    }

    if (*events) {
      httplib::Client c(remote.server);
      c.set_read_timeout(3600, 0);
      auto res = c.Get(sim_path() + "/events?from_seq=" + std::to_string(from_seq), remote.headers(),
                       [](const char* data, std::size_t n) {
                         std::cout.write(data, static_cast<std::streamsize>(n));
                         std::cout.flush();
                         return true;
                       });
      if (!res) throw TransportError("cannot reach " + remote.server);
      return res->status == 200 ? 0 : 1;
    }

    if (*feedback) {
      if (score) {
        print(remote.call("POST", sim_path() + "/feedback/score", {{"event_seq", event_seq}, {"s", *score}}));
      } else {
        print(remote.call("POST", sim_path() + "/feedback/revision", {{"event_seq", event_seq}, {"a_prime", a_prime}}));
      }
      return 0;
    }

    if (*judge) {
      if (is_remote) {
        print(remote.call("POST", sim_path() + "/judge",
                          {{"judge", backend_config.empty() ? "oracle" : "backend"},
                           {"sample", sample},
                           {"revise_below", revise_below}}));
        return 0;
      }
      if (events_path.empty()) throw ValidationError("--events is required");
      FeedbackStore store;
      auto summary = label_events(read_events(events_path), backend_config, sample, revise_below, store);
      // An empty label set leaves its file unwritten rather than failing the run.
      if (!sft_out.empty() && store.revision_count() > 0) summary["sft"] = export_sft_dataset(store.revisions(), sft_out);
      if (!reward_out.empty() && store.score_count() > 0) {
        summary["reward"] = export_reward_dataset(store.scores(), reward_out);
      }
      print(summary);
      return 0;
    }

    if (*export_cmd) {
      if (is_remote) {
        json body = json::object();
        if (!out_path.empty()) body["path"] = out_path;
        print(remote.call("POST", sim_path() + "/export/" + kind, body));
        return 0;
      }
      if (events_path.empty() || out_path.empty()) throw ValidationError("--events and --out are required locally");
      FeedbackStore store;
      label_events(read_events(events_path), "", 100, 5.0, store);
      const auto n = kind == "sft" ? export_sft_dataset(store.revisions(), out_path)
                                   : export_reward_dataset(store.scores(), out_path);
      print({{"path", std::filesystem::absolute(out_path).string()}, {"records", n}, {"kind", kind}});
      return 0;
    }

    if (*validate) {
      auto problems = validate_dataset(out_path, dataset_kind_from_string(kind));
      for (const auto& p : problems) std::cerr << p << "\n";
      if (problems.empty()) std::cout << "ok\n";
      return problems.empty() ? 0 : 1;
    }

    if (*finetune) {
      if (is_remote) {
        print(remote.call("POST", "/finetune", {{"dataset_path", dataset}, {"endpoint", endpoint}, {"method", method}}));
      } else {
        print({{"job_id", trigger_external_finetune(dataset, endpoint, method)}, {"method", method}});
      }
      return 0;
    }

    if (*bench) {
      std::filesystem::create_directories(out_path);
      const json cfg = config_path.empty() ? json::object() : read_json(config_path);
      if (experiment == "fluctuation") {
        auto results = run_fluctuation_experiment(FluctuationConfig::from_json(cfg));
        const auto path = std::filesystem::path(out_path) / "fluctuation.csv";
        write_fluctuation_csv(results, path);
        std::cout << path.string() << "\n";
      } else {
        auto cells = run_scaling_benchmark(ScalingConfig::from_json(cfg));
        const auto path = std::filesystem::path(out_path) / "scaling.csv";
        write_scaling_csv(cells, path);
        std::cout << path.string() << "\n";
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "invalid config:\n";
    for (const auto& f : e.field_errors()) std::cerr << "  " << f << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
