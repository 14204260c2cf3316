#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "gensim/service.hpp"

using namespace gensim;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

json config_json(std::uint64_t rounds, double latency_ms = 0.0) {
  return {{"scenario", "job_market"},
          {"num_agents", 12},
          {"rounds", rounds},
          {"seed", 5},
          {"workers", 4},
          {"backend", {{"kind", "mock_deterministic"}, {"latency", {{"mean_ms", latency_ms}}}}}};
}

struct Fixture {
  Service service{ServiceOptions{std::filesystem::temp_directory_path() / "gensim_service_test", {}, 16}};
  int port = service.start();
  httplib::Client client{"127.0.0.1", port};

  Fixture() { client.set_read_timeout(10, 0); }

  std::pair<int, json> post(const std::string& path, const json& body, const std::string& key = {}) {
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Idempotency-Key", key);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    REQUIRE(res);
    return {res->status, res->body.empty() ? json() : json::parse(res->body)};
  }

  std::pair<int, json> get(const std::string& path) {
    auto res = client.Get(path);
    REQUIRE(res);
    return {res->status, res->body.empty() ? json() : json::parse(res->body)};
  }

  json wait_status(const std::string& id, std::initializer_list<const char*> wanted) {
    for (int i = 0; i < 1000; ++i) {
      auto [status, h] = get("/simulations/" + id);
      for (const char* w : wanted) {
        if (h["status"] == w) return h;
      }
      std::this_thread::sleep_for(10ms);
    }
    FAIL("status never reached");
    return {};
  }
};

void check_api_error(const json& body, const char* code) {
  REQUIRE(body.contains("error"));
  CHECK(body.size() == 1);
  CHECK(body["error"]["code"] == code);
  CHECK(body["error"]["message"].is_string());
}

}  // namespace

TEST_CASE("legal transitions") {
  CHECK(legal_transition(SimStatus::configured, SimStatus::running));
  CHECK(legal_transition(SimStatus::running, SimStatus::paused));
  CHECK(legal_transition(SimStatus::running, SimStatus::stopped));
  CHECK(legal_transition(SimStatus::running, SimStatus::finished));
  CHECK(legal_transition(SimStatus::paused, SimStatus::running));
  CHECK_FALSE(legal_transition(SimStatus::configured, SimStatus::stopped));
  CHECK_FALSE(legal_transition(SimStatus::stopped, SimStatus::running));
  CHECK_FALSE(legal_transition(SimStatus::finished, SimStatus::running));
  CHECK_FALSE(legal_transition(SimStatus::paused, SimStatus::finished));
}

TEST_CASE("create validates config") {
  Fixture f;
  auto [ok, handle] = f.post("/simulations", config_json(2));
  CHECK(ok == 201);
  CHECK(handle["status"] == "configured");
  CHECK(handle["current_round"] == 0);

  auto bad = config_json(2);
  bad["num_agents"] = 0;
  auto [s1, e1] = f.post("/simulations", bad);
  CHECK(s1 == 400);
  check_api_error(e1, "invalid_config");
  CHECK(e1["error"]["message"].get<std::string>().find("num_agents") != std::string::npos);

  bad = config_json(2);
  bad["scenario"] = "no_such_scenario";
  auto [s2, e2] = f.post("/simulations", bad);
  CHECK(s2 == 400);
  CHECK(e2["error"]["message"].get<std::string>().find("scenario") != std::string::npos);

  auto [s3, e3] = f.get("/simulations/sim-999");
  CHECK(s3 == 404);
  check_api_error(e3, "not_found");

  auto [s4, e4] = f.get("/no/such/route");
  CHECK(s4 == 404);
  check_api_error(e4, "not_found");
}

TEST_CASE("run to completion then conflicts") {
  Fixture f;
  auto id = f.post("/simulations", config_json(3)).second["id"].get<std::string>();
  auto [s, h] = f.post("/simulations/" + id + "/run", json::object());
  CHECK(s == 200);
  auto done = f.wait_status(id, {"finished"});
  CHECK(done["current_round"] == 3);
  CHECK(done["history"] == json::array({"configured", "running", "finished"}));
  CHECK(f.post("/simulations/" + id + "/run", json::object()).first == 409);
  auto [s2, e2] = f.post("/simulations/" + id + "/stop", json::object());
  CHECK(s2 == 409);
  check_api_error(e2, "conflict");
}

TEST_CASE("run with explicit rounds pauses, resume finishes") {
  Fixture f;
  auto id = f.post("/simulations", config_json(4)).second["id"].get<std::string>();
  f.post("/simulations/" + id + "/run", {{"rounds", 2}});
  auto h = f.wait_status(id, {"paused"});
  CHECK(h["current_round"] == 2);
  f.post("/simulations/" + id + "/resume", json::object());
  h = f.wait_status(id, {"finished"});
  CHECK(h["current_round"] == 4);
}

TEST_CASE("stop takes effect at a round barrier") {
  Fixture f;
  auto id = f.post("/simulations", config_json(200, 5.0)).second["id"].get<std::string>();
  f.post("/simulations/" + id + "/run", json::object());
  std::this_thread::sleep_for(60ms);
  auto [s, h] = f.post("/simulations/" + id + "/stop", json::object());
  CHECK(s == 200);
  CHECK(h["status"] == "stopped");
  f.service.session(id)->wait();
  auto final = f.get("/simulations/" + id).second;
  const auto rounds = final["current_round"].get<std::uint64_t>();
  CHECK(rounds < 200);
  std::uint64_t reported = 0;
  for (const auto& r : final["reports"]) reported += r["events"].get<std::uint64_t>();
  CHECK(final["reports"].size() == rounds);
  CHECK(final["last_seq"].get<std::uint64_t>() == reported);
  auto tail = f.get("/simulations/" + id + "/events.json?from_seq=" + std::to_string(reported - 1)).second;
  REQUIRE(tail.size() == 1);
  CHECK(tail[0]["round"] == rounds - 1);
  CHECK(f.post("/simulations/" + id + "/run", json::object()).first == 409);
}

TEST_CASE("agents listing, search and lookup") {
  Fixture f;
  auto id = f.post("/simulations", config_json(1)).second["id"].get<std::string>();
  f.post("/simulations/" + id + "/run", json::object());
  f.wait_status(id, {"finished"});
  auto [s, page] = f.get("/simulations/" + id + "/agents?offset=10&limit=5");
  CHECK(s == 200);
  CHECK(page["total"] == 12);
  CHECK(page["agents"].size() == 2);
  CHECK(page["agents"][0]["id"] == 11);
  CHECK_FALSE(page["agents"][0].contains("private"));

  auto name = page["agents"][0]["public"]["name"].get<std::string>();
  auto [s2, hits] = f.get("/simulations/" + id + "/agents?q=" + httplib::detail::encode_query_param(name));
  CHECK(s2 == 200);
  CHECK(hits["total"].get<int>() >= 1);

  auto [s3, agent] = f.get("/agents/3");
  CHECK(s3 == 200);
  CHECK(agent["profile"]["id"] == 3);
  REQUIRE(agent["recent_events"].size() == 1);
  CHECK(agent["recent_events"][0]["agent_id"] == 3);
  CHECK(f.get("/agents/99").first == 404);
}

TEST_CASE("events json and sse replay close on finished") {
  Fixture f;
  auto id = f.post("/simulations", config_json(2)).second["id"].get<std::string>();
  f.post("/simulations/" + id + "/run", json::object());
  f.wait_status(id, {"finished"});
  const auto last = f.get("/simulations/" + id).second["last_seq"].get<std::uint64_t>();
  REQUIRE(last > 10);
  auto [s, events] = f.get("/simulations/" + id + "/events.json?from_seq=" + std::to_string(last - 3));
  CHECK(s == 200);
  REQUIRE(events.size() == 3);
  CHECK(events[0]["seq"] == last - 2);

  std::string body;
  auto res = f.client.Get("/simulations/" + id + "/events?from_seq=5", [&](const char* d, std::size_t n) {
    body.append(d, n);
    return true;
  });
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "text/event-stream");
  std::vector<std::uint64_t> ids;
  for (std::size_t pos = 0; (pos = body.find("id: ", pos)) != std::string::npos; pos += 4) {
    ids.push_back(std::stoull(body.substr(pos + 4, body.find('\n', pos) - pos - 4)));
  }
  REQUIRE(ids.size() == last - 5);
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == 6 + i);
  CHECK(body.find("event: action\ndata: {\"seq\":6,") != std::string::npos);

  httplib::Headers resume{{"Last-Event-ID", "8"}};
  body.clear();
  f.client.Get("/simulations/" + id + "/events", resume, [&](const char* d, std::size_t n) {
    body.append(d, n);
    return true;
  });
  CHECK(body.find("id: 8\n") == std::string::npos);
  CHECK(body.find("id: 9\n") != std::string::npos);
}

TEST_CASE("interventions and interview") {
  Fixture f;
  auto id = f.post("/simulations", config_json(3)).second["id"].get<std::string>();
  auto [s, r] = f.post("/simulations/" + id + "/interventions",
                       {{"apply_at_round", 1}, {"kind", "broadcast"}, {"message", "New jobs posted"}});
  CHECK(s == 202);
  CHECK(r["accepted"] == true);
  f.post("/simulations/" + id + "/run", json::object());
  f.wait_status(id, {"finished"});
  auto [s2, e2] = f.post("/simulations/" + id + "/interventions",
                         {{"apply_at_round", 0}, {"kind", "set_global"}, {"key", "k"}, {"value", "v"}});
  CHECK(s2 == 400);
  check_api_error(e2, "invalid_config");

  auto [s3, ex] = f.post("/agents/2/interview", {{"question", "How is the job search going?"}});
  CHECK(s3 == 200);
  CHECK(ex["agent_id"] == 2);
  CHECK_FALSE(ex["answer"].get<std::string>().empty());
  CHECK(f.post("/simulations/" + id + "/agents/77/interview", {{"question", "hi"}}).first == 404);
}

TEST_CASE("feedback, export and idempotent retries") {
  Fixture f;
  auto id = f.post("/simulations", config_json(1)).second["id"].get<std::string>();
  f.post("/simulations/" + id + "/run", json::object());
  f.wait_status(id, {"finished"});

  auto [e0, err0] = f.post("/export/reward", json::object());
  CHECK(e0 == 400);
  check_api_error(err0, "invalid_config");

  auto [s, fb] = f.post("/feedback/score", {{"event_seq", 3}, {"s", 7}}, "k1");
  CHECK(s == 201);
  auto [s_dup, fb_dup] = f.post("/feedback/score", {{"event_seq", 3}, {"s", 7}}, "k1");
  CHECK(s_dup == 201);
  CHECK(fb_dup == fb);
  CHECK(f.service.session(id)->feedback().score_count() == 1);
  CHECK(f.post("/feedback/score", {{"event_seq", 4}, {"s", 7}}, "k1").first == 409);
  CHECK(f.post("/feedback/score", {{"event_seq", 999}, {"s", 7}}).first == 404);
  CHECK(f.post("/feedback/score", {{"event_seq", 3}, {"s", 11}}).first == 400);

  auto a = f.get("/simulations/" + id + "/events.json?from_seq=0&limit=1").second[0]["a"].get<std::string>();
  CHECK(f.post("/feedback/revision", {{"event_seq", 1}, {"a_prime", a}}).first == 409);
  CHECK(f.post("/feedback/revision", {{"event_seq", 1}, {"a_prime", a + " (revised)"}}).first == 201);

  auto [x, out] = f.post("/export/reward", json::object(), "x1");
  CHECK(x == 200);
  CHECK(out["records"] == 1);
  CHECK(validate_dataset(out["path"].get<std::string>(), DatasetKind::reward).empty());
  auto [x2, out2] = f.post("/export/sft", json::object());
  CHECK(x2 == 200);
  CHECK(out2["records"] == 1);
}

TEST_CASE("judge endpoint labels events") {
  Fixture f;
  auto id = f.post("/simulations", config_json(2)).second["id"].get<std::string>();
  f.post("/simulations/" + id + "/run", json::object());
  f.wait_status(id, {"finished"});
  auto [s, r] = f.post("/simulations/" + id + "/judge", {{"judge", "oracle"}});
  CHECK(s == 200);
  const auto last = f.get("/simulations/" + id).second["last_seq"];
  CHECK(r["scores"] == last);
  CHECK(r["series"].size() == 2);
  CHECK(f.service.session(id)->feedback().score_count() == last.get<std::size_t>());
}

TEST_CASE("concurrent duplicate keys apply once") {
  Fixture f;
  std::vector<std::thread> threads;
  std::vector<int> codes(8);
  std::vector<std::string> ids(8);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", f.port);
      auto res = c.Post("/simulations", {{"Idempotency-Key", "create-1"}}, config_json(1).dump(), "application/json");
      codes[i] = res ? res->status : -1;
      if (res) ids[i] = json::parse(res->body)["id"];
    });
  }
  for (auto& t : threads) t.join();
  for (int i = 0; i < 8; ++i) {
    CHECK(codes[i] == 201);
    CHECK(ids[i] == ids[0]);
  }
  CHECK(f.service.sessions().size() == 1);
}

TEST_CASE("bearer token") {
  ServiceOptions options;
  options.token = "secret";
  options.threads = 4;
  Service service(options);
  int port = service.start();
  httplib::Client c("127.0.0.1", port);
  auto denied = c.Get("/health");
  REQUIRE(denied);
  CHECK(denied->status == 401);
  auto allowed = c.Get("/health", {{"Authorization", "Bearer secret"}});
  REQUIRE(allowed);
  CHECK(allowed->status == 200);
}
