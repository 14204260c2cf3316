#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "gensim/error.hpp"
#include "gensim/scenarios.hpp"
#include "gensim/simulation.hpp"

using namespace gensim;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gensim_sim_" + name);
}

SimulationConfig small_config(std::string scenario, std::size_t agents, std::uint64_t rounds) {
  SimulationConfig c;
  c.scenario = std::move(scenario);
  c.num_agents = agents;
  c.rounds = rounds;
  c.seed = 17;
  c.workers = 4;
  return c;
}

std::shared_ptr<Gateway> gateway_for(std::shared_ptr<Backend> backend, int slots = 8) {
  return std::make_shared<Gateway>(std::vector<GatewayEndpoint>{{std::move(backend), slots}},
                                   RetryPolicy{3, std::chrono::milliseconds(0)});
}

}  // namespace

TEST_CASE("config validation reports every bad field") {
  try {
    SimulationConfig::from_json(json{{"num_agents", 0}, {"rounds", 0}, {"scenario", "casino"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const auto& f = e.field_errors();
    auto has = [&](const std::string& prefix) {
      return std::any_of(f.begin(), f.end(), [&](const auto& s) { return s.rfind(prefix, 0) == 0; });
    };
    CHECK(has("num_agents"));
    CHECK(has("rounds"));
  }
  try {
    SimulationConfig::from_json(json{{"scenario", "casino"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_errors().at(0).rfind("scenario", 0) == 0);
  }
  auto c = SimulationConfig::from_json(json{{"scenario", "job_market"}, {"num_agents", 3}, {"seed", -1}});
  CHECK(c.seed == ~std::uint64_t{0});
  CHECK(SimulationConfig::from_json(c.to_json()).to_json() == c.to_json());
}

TEST_CASE("spawn_population is deterministic with distinct ids") {
  auto a = spawn_population(500, 3);
  auto b = spawn_population(500, 3);
  CHECK(a == b);
  std::set<std::uint64_t> ids;
  for (auto& p : a) {
    ids.insert(p.id.value);
    CHECK_NOTHROW(p.validate());
  }
  CHECK(ids.size() == 500);
  CHECK(spawn_population(1, 0).size() == 1);
  CHECK(spawn_population(500, 4) != a);
  CHECK_THROWS_AS(spawn_population(0, 0), ValidationError);
}

TEST_CASE("three agents give three events in agent order") {
  Simulation sim(small_config("recommender", 3, 1));
  auto report = sim.run_round();
  CHECK(report.events == 3);
  CHECK(report.errors == 0);
  auto events = sim.events().all();
  REQUIRE(events.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(events[i].agent_id == AgentId{i + 1});
    CHECK(events[i].seq == i + 1);
    CHECK(events[i].round == 0);
    CHECK(events[i].q.find("RATE ITEMS:") != std::string::npos);
  }
  CHECK(sim.current_round() == 1);
}

TEST_CASE("event log is identical across worker counts") {
  for (const char* scenario : {"recommender", "job_market", "group_discussion"}) {
    std::string reference;
    for (std::size_t workers : {1, 3, 8}) {
      auto cfg = small_config(scenario, 23, 3);
      cfg.workers = workers;
      cfg.memory.reflection_threshold = 2.0;
      auto path = temp_path(std::string(scenario) + std::to_string(workers) + ".jsonl");
      cfg.event_log = path.string();
      Simulation sim(cfg);
      sim.run();
      sim.events().close();
      auto log = slurp(path);
      CHECK(!log.empty());
      if (reference.empty())
        reference = log;
      else
        CHECK(log == reference);
      std::filesystem::remove(path);
    }
  }
}

TEST_CASE("rounds=3 with two agents logs six events") {
  Simulation sim(small_config("job_market", 2, 3));
  // Keep both agents applying every round.
  dynamic_cast<JobMarketScenario&>(sim.scenario())
      .set_postings({JobPosting{1, "Juggler", "juggling", 1}});
  auto reports = sim.run();
  std::size_t total = 0;
  for (auto& r : reports) total += r.events;
  // Agent 1 is hired in round 0 and stops applying.
  CHECK(total == 4);

  Simulation rec(small_config("recommender", 2, 3));
  rec.run();
  CHECK(rec.events().size() == 6);
  CHECK(rec.finished());
}

TEST_CASE("stop request ends the run at a barrier") {
  auto cfg = small_config("recommender", 20, 10);
  std::atomic<int> calls{0};
  std::shared_ptr<Simulation> sim;
  auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest&) {
    // Request a stop while round 2 (index 1) is in flight.
    if (++calls == 25) sim->request_stop();
    return std::string("1=3.0");
  });
  sim = std::make_shared<Simulation>(cfg, gateway_for(backend));
  auto reports = sim->run();
  CHECK(reports.size() == 2);
  CHECK(sim->current_round() == 2);
  auto events = sim->events().all();
  CHECK(events.size() == 40);
  CHECK(events.back().round == 1);
}

TEST_CASE("barrier safety: rounds never interleave in seq order") {
  Simulation sim(small_config("group_discussion", 12, 3));
  sim.run();
  auto events = sim.events().all();
  for (std::size_t i = 1; i < events.size(); ++i) {
    CHECK(events[i].seq == events[i - 1].seq + 1);
    CHECK(events[i].round >= events[i - 1].round);
  }
}

TEST_CASE("round aborts when most tasks fail terminally") {
  auto backend = std::make_shared<FunctionBackend>(
      [](const ChatRequest&) -> std::string { throw BackendError("model exploded", false, "x"); });
  Simulation sim(small_config("recommender", 5, 2), gateway_for(backend));
  sim.submit_intervention(Intervention{0, SetGlobal{"k", "v"}, IssuedBy::api});
  auto reports = sim.run();
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].aborted);
  CHECK(reports[0].errors == 5);
  CHECK(sim.current_round() == 0);
  CHECK(sim.events().size() == 0);
  CHECK(sim.pending_interventions().size() == 1);
  CHECK(!sim.environment().state().globals.contains("k"));
}

TEST_CASE("liveness under transient faults") {
  auto inner = std::make_shared<DeterministicMock>(2);
  auto faulty = std::make_shared<FaultInjectingBackend>(inner, FaultConfig{0.10, 0.0, 9});
  auto gw = std::make_shared<Gateway>(std::vector<GatewayEndpoint>{{faulty, 8}},
                                      RetryPolicy{0, std::chrono::milliseconds(0)});
  Simulation sim(small_config("recommender", 50, 4), gw);
  auto reports = sim.run();
  REQUIRE(reports.size() == 4);
  std::size_t errors = 0;
  for (auto& r : reports) {
    CHECK(!r.aborted);
    errors += r.errors;
  }
  CHECK(errors > 0);
  std::size_t error_events = 0;
  for (auto& e : sim.events().all()) error_events += e.error.has_value();
  CHECK(error_events == errors);
  CHECK(gw->metrics().terminal_failures >= errors);
}

TEST_CASE("interventions reach prompts in their round") {
  Simulation sim(small_config("recommender", 2, 3));
  sim.submit_intervention(Intervention{1, Broadcast{"Cinemas are closed."}, IssuedBy::api});
  sim.submit_intervention(Intervention{1, SetGlobal{"season", "winter"}, IssuedBy::script});
  sim.run();
  for (const auto& e : sim.events().all()) {
    const bool has_broadcast = e.q.find("Cinemas are closed.") != std::string::npos;
    CHECK(has_broadcast == (e.round == 1));
    CHECK((e.q.find("season: winter") != std::string::npos) == (e.round >= 1));
  }
  CHECK_THROWS_AS(sim.submit_intervention(Intervention{1, Broadcast{"late"}, IssuedBy::api}), ValidationError);
}

TEST_CASE("checkpoint and restore continue the same log") {
  auto full_path = temp_path("full.jsonl");
  auto split_path = temp_path("split.jsonl");
  auto ckpt = temp_path("mid.ckpt");
  for (const char* scenario : {"job_market", "recommender", "group_discussion"}) {
    auto cfg = small_config(scenario, 12, 4);
    cfg.memory.reflection_threshold = 1.5;
    cfg.event_log = full_path.string();
    {
      Simulation sim(cfg);
      sim.run();
    }
    cfg.event_log = split_path.string();
    {
      Simulation sim(cfg);
      sim.run(2);
      sim.submit_intervention(Intervention{3, Broadcast{"news"}, IssuedBy::api});
      sim.checkpoint(ckpt);
    }
    auto restored = Simulation::restore(ckpt);
    CHECK(restored->current_round() == 2);
    CHECK(restored->pending_interventions().size() == 1);
    restored->run();
    restored->events().close();
    // The uninterrupted run had no intervention; compare only the common prefix.
    auto full = slurp(full_path);
    auto split = slurp(split_path);
    CHECK(split.substr(0, split.find("\"round\":3")) == full.substr(0, full.find("\"round\":3")));
  }
  std::filesystem::remove(full_path);
  std::filesystem::remove(split_path);
  std::filesystem::remove(ckpt);
}

TEST_CASE("restore without interventions is byte-identical") {
  auto full_path = temp_path("full2.jsonl");
  auto split_path = temp_path("split2.jsonl");
  auto ckpt = temp_path("mid2.ckpt");
  auto cfg = small_config("job_market", 15, 6);
  cfg.event_log = full_path.string();
  Simulation(cfg).run();
  cfg.event_log = split_path.string();
  {
    Simulation sim(cfg);
    sim.run(3);
    sim.checkpoint(ckpt);
  }
  Simulation::restore(ckpt)->run();
  CHECK(slurp(full_path) == slurp(split_path));
  std::filesystem::remove(full_path);
  std::filesystem::remove(split_path);
  std::filesystem::remove(ckpt);
}

TEST_CASE("interview and search go through the simulation") {
  Simulation sim(small_config("job_market", 5, 1));
  sim.run();
  auto ex = sim.interview(AgentId{2}, "How was your week?");
  CHECK(!ex.answer.empty());
  CHECK(sim.environment().interview_log().size() == 1);
  CHECK_THROWS_AS(sim.interview(AgentId{99}, "hi"), NotFoundError);
  CHECK(sim.search("").size() == 5);
  const auto name = sim.agent(AgentId{3}).profile().name();
  auto hits = sim.search(name);
  REQUIRE(!hits.empty());
}

TEST_CASE("event json lines have fixed field order") {
  ActionEvent e{7, 1, AgentId{3}, "q", "a", json{{"x", 1}}, 2.5, std::nullopt};
  CHECK(e.to_json_line() == R"({"seq":7,"round":1,"agent_id":3,"q":"q","a":"a","parsed":{"x":1},"latency_ms":2.5})");
  auto back = ActionEvent::from_json(json::parse(e.to_json_line()));
  CHECK(back.to_json_line() == e.to_json_line());
}

TEST_CASE("event log readers wait for new events") {
  EventLog log;
  std::jthread writer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    std::vector<ActionEvent> batch(3);
    log.append_batch(batch);
  });
  CHECK(log.wait_for(0, std::chrono::milliseconds(2000)));
  CHECK(log.since(1).size() == 2);
  CHECK(log.since(0, 1).size() == 1);
  CHECK(!log.wait_for(3, std::chrono::milliseconds(20)));
}
