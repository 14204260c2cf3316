// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names as
// arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "gensim/correction.hpp"
#include "gensim/experiments.hpp"
#include "gensim/rng.hpp"
#include "gensim/scenarios.hpp"
#include "gensim/service.hpp"
#include "gensim/simulation.hpp"

using namespace gensim;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "gensim_acceptance";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

double peak_rss_gib() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("VmHWM:", 0) == 0) return std::stod(line.substr(6)) / (1024.0 * 1024.0);
  return -1.0;
}

// ---- fluctuation ----

Outcome fluctuation_law() {
  const std::vector<std::size_t> sizes{300, 3000, 30000};
  std::vector<double> mean(sizes.size(), 0.0);
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    FluctuationConfig c;
    c.sample_sizes = sizes;
    c.repeats = 10;
    c.seed = static_cast<std::uint64_t>(s);
    auto results = run_fluctuation_experiment(c);
    for (std::size_t i = 0; i < sizes.size(); ++i) mean[i] += results[i].v_sum / seeds;
  }
  bool ok = true;
  std::string detail = "mean v_sum";
  for (std::size_t i = 0; i < sizes.size(); ++i) detail += " " + std::to_string(sizes[i]) + ":" + fmt("%.4f", mean[i]);
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    const double ratio = mean[i] / mean[i - 1];
    detail += " ratio:" + fmt("%.3f", ratio);
    ok = ok && mean[i] < mean[i - 1] && ratio >= 0.2 && ratio <= 0.5;
  }
  return {ok, detail};
}

Outcome fluctuation_oracle() {
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    KeyedRng rng({t, 0xacc});
    const auto n = 2 + rng.below(19);
    std::vector<RatingDistribution> ds(n);
    for (auto& d : ds) {
      double total = 0.0;
      for (auto& v : d) total += (v = rng.uniform() * (rng.below(4) == 0 ? 0.0 : 1.0));
      if (total == 0.0) {
        d[0] = 1.0;
        total = 1.0;
      }
      for (auto& v : d) v /= total;
    }
    const auto r = fluctuation(ds);
    double brute_sum = 0.0;
    for (std::size_t k = 0; k < kRatingCount; ++k) {
      double acc = 0.0;
      for (auto& a : ds)
        for (auto& b : ds) acc += (a[k] - b[k]) * (a[k] - b[k]);
      const double sigma = std::sqrt(acc / (2.0 * static_cast<double>(n * n)));
      brute_sum += sigma;
      worst = std::max(worst, std::abs(sigma - r.per_rating_v[k]));
    }
    worst = std::max(worst, std::abs(brute_sum - r.v_sum));
  }
  return {worst <= 1e-12, "max abs diff " + fmt("%.3g", worst) + " over 1000 inputs"};
}

// ---- scaling ----

Outcome scaling() {
  ScalingConfig c;
  c.latency = LatencyModel{50.0, 0.0};
  c.cells = {{100, 8}, {200, 8}, {400, 8}, {400, 2}, {400, 4}};
  const auto cells = run_scaling_benchmark(c);
  bool ok = true;
  std::string detail;
  double t2 = 0, t4 = 0, t8 = 0;
  for (const auto& cell : cells) {
    const double model = std::ceil(static_cast<double>(cell.agents) / static_cast<double>(cell.concurrency)) * 50.0;
    const bool within = cell.wall_time_ms <= model * 1.25 && cell.wall_time_ms >= model / 1.25;
    ok = ok && within;
    detail += "N=" + std::to_string(cell.agents) + ",C=" + std::to_string(cell.concurrency) + ":" +
              fmt("%.0f", cell.wall_time_ms) + "/" + fmt("%.0f", model) + "ms ";
    if (cell.agents == 400 && cell.concurrency == 2) t2 = cell.wall_time_ms;
    if (cell.agents == 400 && cell.concurrency == 4) t4 = cell.wall_time_ms;
    if (cell.agents == 400 && cell.concurrency == 8) t8 = cell.wall_time_ms;
  }
  ok = ok && t2 > t4 && t4 > t8;
  return {ok, detail + (t2 > t4 && t4 > t8 ? "decreasing in C" : "NOT decreasing in C")};
}

// ---- 100k agents ----

Outcome hundred_thousand() {
  SimulationConfig c;
  c.scenario = "recommender";
  c.num_agents = 100000;
  c.rounds = 1;
  c.seed = 1;
  c.workers = std::max(1u, std::thread::hardware_concurrency());
  c.backend.kind = BackendConfig::Kind::mock_deterministic;
  c.backend.mock_max_concurrent = 64;
  Simulation sim(c);
  const auto report = sim.run_round();
  const bool ok = !report.aborted && report.events == 100000 && report.errors == 0 &&
                  sim.agent_count() == 100000 && peak_rss_gib() < 8.0;
  return {ok, std::to_string(sim.agent_count()) + " agents, " + std::to_string(report.events) + " events, round " +
                  fmt("%.1f", report.wall_time.count() / 1000.0) + "s, peak RSS " + fmt("%.2f", peak_rss_gib()) +
                  " GiB"};
}

// ---- determinism ----

SimulationConfig determinism_config(const std::string& scenario, std::size_t workers, const std::string& log) {
  SimulationConfig c;
  c.scenario = scenario;
  c.num_agents = 120;
  c.rounds = 6;
  c.seed = 99;
  c.workers = workers;
  c.memory.reflection_threshold = 2.0;
  c.backend.kind = BackendConfig::Kind::mock_deterministic;
  c.backend.mock_max_concurrent = 16;
  c.event_log = log;
  return c;
}

Outcome determinism() {
  std::string detail;
  bool ok = true;
  for (const std::string scenario : {"recommender", "job_market", "group_discussion"}) {
    std::string reference;
    for (std::size_t w : {1, 4, 16}) {
      const auto path = scratch(scenario + "_w" + std::to_string(w) + ".jsonl");
      {
        Simulation sim(determinism_config(scenario, w, path.string()));
        sim.run();
      }
      auto log = slurp(path);
      if (reference.empty()) reference = log;
      ok = ok && !log.empty() && log == reference;
    }
    const auto split = scratch(scenario + "_split.jsonl");
    const auto ckpt = scratch(scenario + ".ckpt");
    {
      Simulation sim(determinism_config(scenario, 4, split.string()));
      sim.run(3);
      sim.checkpoint(ckpt);
    }
    Simulation::restore(ckpt)->run();
    const bool same = slurp(split) == reference;
    ok = ok && same;
    detail += scenario + ":" + std::to_string(std::count(reference.begin(), reference.end(), '\n')) + " events" +
              (same ? " " : " (restore differs) ");
  }
  return {ok, detail + "identical across workers 1/4/16 and checkpoint at round 3"};
}

// ---- correction ----

std::shared_ptr<Gateway> noisy_gateway(std::uint64_t seed) {
  auto noisy = std::make_shared<FaultInjectingBackend>(std::make_shared<DeterministicMock>(seed),
                                                       FaultConfig{0.0, 0.5, seed});
  return std::make_shared<Gateway>(std::vector<GatewayEndpoint>{{noisy, 64}},
                                   RetryPolicy{3, std::chrono::milliseconds(0)});
}

SimulationConfig job_market_config(std::size_t agents, std::uint64_t rounds) {
  SimulationConfig c;
  c.scenario = "job_market";
  c.num_agents = agents;
  c.rounds = rounds;
  c.seed = 2024;
  c.workers = 16;
  c.scenario_params = json{{"num_postings", 5}, {"max_capacity", 3}};
  return c;
}

Outcome correction_single() {
  Simulation sim(job_market_config(600, 1), noisy_gateway(11));
  sim.run_round();
  const auto events = sim.events().all();
  OracleJudge oracle;
  FeedbackStore store;
  const JudgeConfig scorer;
  const JudgeConfig revisor{JudgeConfig::default_rubric(), JudgeMode::revise};
  const EvaluateOptions all{events.size(), 0, 16};
  const auto base = evaluate_rounds(events, scorer, oracle, all, &store);
  for (const auto& s : store.scores())
    if (s.s < 5.0) judge_revise(events[s.event_seq - 1], revisor, oracle, &store);
  RevisionReplayAdapter adapter(sim.gateway_shared(), store.revisions());
  const auto replayed = replay_events(events, adapter, 16);
  const auto after = evaluate_rounds(replayed, scorer, oracle, all);
  const double gain = after[0].mean - base[0].mean;
  return {gain >= 3.0, "baseline " + fmt("%.2f", base[0].mean) + ", adapted " + fmt("%.2f", after[0].mean) +
                           ", gain " + fmt("%.2f", gain) + " over " + std::to_string(events.size()) + " events, " +
                           std::to_string(store.revision_count()) + " revisions"};
}

FeedbackStore g_loop_store;

Outcome correction_multi() {
  OracleJudge judge;
  OracleJudge reviser;
  CorrectionOptions opts;
  opts.evaluate = EvaluateOptions{1u << 20, 0, 16};

  Simulation corrected(job_market_config(5000, 5), noisy_gateway(21));
  const auto series = run_correction_loop(corrected, judge, reviser, 5, opts, g_loop_store);

  FeedbackStore baseline_store;
  opts.adapt = false;
  Simulation plain(job_market_config(5000, 5), noisy_gateway(21));
  const auto baseline = run_correction_loop(plain, judge, reviser, 5, opts, baseline_store);

  bool monotone = true;
  std::string detail = "corrected";
  for (std::size_t i = 0; i < series.size(); ++i) {
    detail += " " + fmt("%.2f", series[i].mean);
    if (i && series[i].mean < series[i - 1].mean) monotone = false;
  }
  detail += "; baseline";
  for (const auto& s : baseline) detail += " " + fmt("%.2f", s.mean);
  const double gain = series.back().mean - series.front().mean;
  const double drift = baseline.back().mean - baseline.front().mean;
  const bool ok = series.size() == 5 && monotone && gain >= 2.0 && std::abs(drift) < 0.5;
  return {ok, detail + "; gain " + fmt("%.2f", gain) + ", baseline drift " + fmt("%.2f", drift)};
}

// ---- datasets and training hook ----

Outcome datasets() {
  FeedbackStore store;
  if (g_loop_store.revision_count() == 0) {
    OracleJudge oracle;
    CorrectionOptions opts;
    opts.evaluate = EvaluateOptions{1u << 20, 0, 8};
    Simulation sim(job_market_config(200, 2), noisy_gateway(5));
    run_correction_loop(sim, oracle, oracle, 2, opts, store);
  }
  const auto& src = g_loop_store.revision_count() ? g_loop_store : store;
  auto revisions = src.revisions();
  auto scores = src.scores();
  scores.push_back(ScoreFeedback{0, "human-labelled prompt\nwith a newline", "an answer", 6.25, FeedbackSource::human});

  const auto sft = scratch("sft.jsonl");
  const auto reward = scratch("reward.jsonl");
  const auto n_sft = export_sft_dataset(revisions, sft);
  const auto n_reward = export_reward_dataset(scores, reward);

  std::stable_sort(revisions.begin(), revisions.end(), [](auto& a, auto& b) { return a.event_seq < b.event_seq; });
  std::stable_sort(scores.begin(), scores.end(), [](auto& a, auto& b) { return a.event_seq < b.event_seq; });
  const auto sft_back = read_sft_dataset(sft);
  const auto reward_back = read_reward_dataset(reward);
  bool round_trip = sft_back.size() == revisions.size() && reward_back.size() == scores.size();
  for (std::size_t i = 0; round_trip && i < revisions.size(); ++i)
    round_trip = sft_back[i] == SftRecord{revisions[i].q, revisions[i].a_prime};
  for (std::size_t i = 0; round_trip && i < scores.size(); ++i)
    round_trip = reward_back[i] == RewardRecord{scores[i].q, scores[i].a, scores[i].s, scores[i].source};
  const bool schema_ok = validate_dataset(sft, DatasetKind::sft).empty() &&
                         validate_dataset(reward, DatasetKind::reward).empty() &&
                         !validate_dataset(reward, DatasetKind::sft).empty();

  httplib::Server stub;
  json received;
  stub.Post("/finetune", [&](const httplib::Request& req, httplib::Response& res) {
    received = json::parse(req.body);
    res.set_content(json{{"job_id", "ft-" + received.at("method").get<std::string>() + "-1"}}.dump(),
                    "application/json");
  });
  const int port = stub.bind_to_any_port("127.0.0.1");
  std::thread server([&] { stub.listen_after_bind(); });
  stub.wait_until_ready();
  std::string job;
  try {
    job = trigger_external_finetune(sft, "http://127.0.0.1:" + std::to_string(port), "sft");
  } catch (const std::exception& e) {
    job = std::string("error: ") + e.what();
  }
  stub.stop();
  server.join();
  const bool hook_ok = job == "ft-sft-1" && received.value("dataset_path", "") == std::filesystem::absolute(sft).string();

  return {n_sft > 0 && n_reward > 0 && round_trip && schema_ok && hook_ok,
          std::to_string(n_sft) + " sft + " + std::to_string(n_reward) + " reward records, round trip " +
              (round_trip ? "ok" : "FAILED") + ", schema " + (schema_ok ? "ok" : "FAILED") + ", job id " + job};
}

struct ApiProbe {
  httplib::Client client;
  std::vector<std::string> problems;

  explicit ApiProbe(int port) : client("127.0.0.1", port) { client.set_read_timeout(30, 0); }

  std::pair<int, json> call(const std::string& method, const std::string& path, const json& body = nullptr,
                            const std::string& key = {}) {
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Idempotency-Key", key);
    auto res = method == "GET" ? client.Get(path, headers)
                               : client.Post(path, headers, body.is_null() ? "{}" : body.dump(), "application/json");
    if (!res) {
      problems.push_back(method + " " + path + ": no response");
      return {0, json()};
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (res->status >= 300) {
      const bool one_error = parsed.is_object() && parsed.size() == 1 && parsed.contains("error") &&
                             parsed["error"].contains("code") && parsed["error"].contains("message");
      if (!one_error) problems.push_back(method + " " + path + ": non-2xx body is not a single ApiError");
    }
    return {res->status, parsed};
  }

  json handle(const std::string& id) { return call("GET", "/simulations/" + id).second; }

  json wait_for(const std::string& id, const std::vector<std::string>& statuses) {
    const auto deadline = Clock::now() + std::chrono::seconds(30);
    while (Clock::now() < deadline) {
      auto h = handle(id);
      if (std::find(statuses.begin(), statuses.end(), h.value("status", "")) != statuses.end()) return h;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    problems.push_back(id + ": timed out waiting for status");
    return handle(id);
  }
};

bool history_is_legal(const json& history) {
  auto parse = [](const std::string& s) {
    for (auto st : {SimStatus::configured, SimStatus::running, SimStatus::paused, SimStatus::stopped,
                    SimStatus::finished}) {
      if (s == to_string(st)) return st;
    }
    throw std::runtime_error("unknown status " + s);
  };
  if (history.empty() || history[0] != "configured") return false;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (!legal_transition(parse(history[i - 1]), parse(history[i]))) return false;
  }
  return true;
}

// Reads the event stream in short sessions, dropping the connection after a
// varying number of events and resuming from the last id seen.
std::vector<std::uint64_t> read_with_reconnects(int port, const std::string& id, int& reconnects) {
  std::vector<std::uint64_t> seen;
  KeyedRng rng({0xa11, 7});
  for (bool closed_cleanly = false; !closed_cleanly;) {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    const std::uint64_t from = seen.empty() ? 0 : seen.back();
    const std::size_t quota = 1 + rng.below(40);
    std::size_t got = 0;
    std::string buffer;
    bool aborted = false;
    httplib::Headers headers;
    std::string path = "/simulations/" + id + "/events";
    if (reconnects % 2) {
      headers.emplace("Last-Event-ID", std::to_string(from));
    } else {
      path += "?from_seq=" + std::to_string(from);
    }
    auto res = c.Get(path, headers, [&](const char* data, std::size_t n) {
      buffer.append(data, n);
      for (std::size_t end; (end = buffer.find("\n\n")) != std::string::npos;) {
        const std::string frame = buffer.substr(0, end);
        buffer.erase(0, end + 2);
        if (frame.rfind("id: ", 0) != 0) continue;
        seen.push_back(std::stoull(frame.substr(4, frame.find('\n') - 4)));
        if (++got >= quota) {
          aborted = true;
          return false;
        }
      }
      return true;
    });
    if (aborted) {
      ++reconnects;
      continue;
    }
    if (!res || res->status != 200) throw std::runtime_error("event stream failed");
    closed_cleanly = true;
  }
  return seen;
}

Outcome api_contract() {
  Service service(ServiceOptions{scratch("service"), std::nullopt, 32});
  const int port = service.start();
  ApiProbe api(port);
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  json config = {{"scenario", "recommender"},
                 {"num_agents", 40},
                 {"rounds", 25},
                 {"seed", 9},
                 {"workers", 8},
                 {"backend", {{"kind", "mock_deterministic"}, {"latency", {{"mean_ms", 4.0}}}}}};

  // State machine: run, pause, resume, stop, with illegal requests in between.
  auto [created, h] = api.call("POST", "/simulations", config);
  expect(created == 201 && h["status"] == "configured", "create");
  const std::string a = h.value("id", "");
  expect(api.call("POST", "/simulations/" + a + "/stop").first == 409, "stop on configured");
  expect(api.call("POST", "/simulations/" + a + "/pause").first == 409, "pause on configured");
  expect(api.call("POST", "/simulations/" + a + "/run", {{"rounds", 25}}).first == 200, "run");
  expect(api.call("POST", "/simulations/" + a + "/run").first == 409, "run while running");
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  expect(api.call("POST", "/simulations/" + a + "/pause").first == 200, "pause");
  expect(api.call("POST", "/simulations/" + a + "/pause").first == 409, "pause twice");
  expect(api.call("POST", "/simulations/" + a + "/stop").first == 409, "stop on paused");
  expect(api.call("POST", "/simulations/" + a + "/resume").first == 200, "resume");
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  expect(api.call("POST", "/simulations/" + a + "/stop").first == 200, "stop");
  api.wait_for(a, {"stopped"});
  service.session(a)->wait();
  expect(api.call("POST", "/simulations/" + a + "/run").first == 409, "run on stopped");
  auto ha = api.handle(a);
  expect(history_is_legal(ha["history"]), "history of stopped sim " + ha["history"].dump());
  std::uint64_t per_round = 0;
  for (const auto& r : ha["reports"]) per_round += r["events"].get<std::uint64_t>();
  expect(ha["last_seq"] == per_round && ha["reports"].size() == ha["current_round"],
         "stopped log ends at a round boundary");

  // SSE contiguity: a reader reconnecting at random points while a second
  // simulation runs to completion.
  auto b = api.call("POST", "/simulations", config).second.value("id", "");
  api.call("POST", "/simulations/" + b + "/run");
  int reconnects = 0;
  std::vector<std::uint64_t> seqs;
  try {
    seqs = read_with_reconnects(port, b, reconnects);
  } catch (const std::exception& e) {
    failures.push_back(e.what());
  }
  auto hb = api.wait_for(b, {"finished"});
  const auto last = hb.value("last_seq", std::uint64_t{0});
  bool contiguous = seqs.size() == last && last > 0;
  for (std::size_t i = 0; contiguous && i < seqs.size(); ++i) contiguous = seqs[i] == i + 1;
  expect(contiguous, "sse seq contiguity");
  expect(reconnects >= 10, "too few forced reconnects");
  expect(history_is_legal(hb["history"]) && hb["history"].back() == "finished", "history of finished sim");

  // Idempotent retries: every mutation repeated with one key, sequentially and
  // concurrently, takes effect once and returns the same reply.
  auto retried = [&](const std::string& path, const json& body, const std::string& key) {
    auto first = api.call("POST", path, body, key);
    std::vector<std::pair<int, json>> again(4);
    std::vector<std::thread> ts;
    for (auto& slot : again) {
      ts.emplace_back([&, path, body, key] {
        ApiProbe p(port);
        slot = p.call("POST", path, body, key);
      });
    }
    for (auto& t : ts) t.join();
    bool same = true;
    for (const auto& r : again) same = same && r == first;
    expect(same, "retry of " + path + " changed the reply");
    return first;
  };
  const auto sessions_before = service.sessions().size();
  auto c = retried("/simulations", config, "create-c").second.value("id", "");
  expect(service.sessions().size() == sessions_before + 1, "create applied once");
  retried("/simulations/" + c + "/interventions", {{"apply_at_round", 2}, {"kind", "broadcast"}, {"message", "hello"}},
          "iv-1");
  expect(service.session(c)->sim().pending_interventions().size() == 1, "intervention applied once");
  retried("/simulations/" + c + "/run", {{"rounds", 3}}, "run-1");
  api.wait_for(c, {"paused"});
  expect(api.handle(c)["current_round"] == 3, "run applied once");
  auto& fb = service.session(b)->feedback();
  auto sc = retried("/feedback/score", {{"simulation_id", b}, {"event_seq", 5}, {"s", 7}}, "score-1");
  expect(sc.first == 201 && fb.score_count() == 1, "score applied once");
  auto event = service.session(b)->sim().events().at(6);
  auto rv = retried("/feedback/revision", {{"simulation_id", b}, {"event_seq", 6}, {"a_prime", event->a + "!"}},
                    "rev-1");
  expect(rv.first == 201 && fb.revision_count() == 1, "revision applied once");
  auto ex = retried("/export/sft", {{"simulation_id", b}}, "export-1");
  expect(ex.first == 200 && ex.second.value("records", 0) == 1, "export");
  auto iv = retried("/simulations/" + b + "/agents/3/interview", {{"question", "What did you watch?"}}, "ask-1");
  expect(iv.first == 200 && service.session(b)->sim().environment().interview_log().size() == 1,
         "interview applied once");
  expect(api.call("POST", "/feedback/score", {{"simulation_id", b}, {"event_seq", 9}, {"s", 1}}, "score-1").first ==
             409,
         "reused key with another body");
  expect(api.call("POST", "/feedback/score", {{"simulation_id", b}, {"event_seq", last + 1}, {"s", 1}}).first == 404,
         "unknown event_seq");

  for (const auto& s : service.sessions()) {
    expect(history_is_legal(s->handle()["history"]), "illegal history on " + s->id());
  }
  service.stop();
  failures.insert(failures.end(), api.problems.begin(), api.problems.end());

  std::string detail = std::to_string(seqs.size()) + " events over " + std::to_string(reconnects + 1) +
                       " connections, contiguous " + (contiguous ? "yes" : "no");
  if (!failures.empty()) detail += "; failed: " + failures.front() + " (+" + std::to_string(failures.size() - 1) + ")";
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria{
      {"fluctuation_law", 120, fluctuation_law},
      {"fluctuation_oracle", 5, fluctuation_oracle},
      {"scaling_model", 120, scaling},
      {"spawn_100k", 120, hundred_thousand},
      {"determinism", 60, determinism},
      {"correction_single_round", 60, correction_single},
      {"correction_multi_round", 180, correction_multi},
      {"datasets_and_finetune_hook", 60, datasets},
      {"api_contract", 60, api_contract},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double took = seconds_since(start);
    const bool in_time = took < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %s [%.1fs / %.0fs] %s%s\n", pass ? "PASS" : "FAIL", c.name.c_str(), took, c.budget_s,
                o.detail.c_str(), in_time ? "" : " (over time budget)");
    std::fflush(stdout);
  }
  std::printf("%s: %d failed\n", failed ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", failed);
  return failed ? 1 : 0;
}
