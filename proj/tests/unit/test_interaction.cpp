#include <doctest.h>

#include <map>

#include "gensim/error.hpp"
#include "gensim/interaction.hpp"
#include "gensim/rng.hpp"

using namespace gensim;

namespace {

std::vector<Role> doctor_teacher() { return {{"Doctor", "name: Doctor"}, {"Teacher", "name: Teacher"}}; }

std::shared_ptr<Backend> canned(std::string reply) {
  return std::make_shared<FunctionBackend>([reply](const ChatRequest&) { return reply; });
}

std::vector<Agent> make_agents(const std::vector<std::string>& names) {
  std::vector<Agent> out;
  std::uint64_t id = 1;
  for (const auto& n : names) out.emplace_back(AgentProfile{AgentId{id++}, {{"name", n}}, {}}, MemoryConfig{});
  return out;
}

std::vector<Agent*> pointers(std::vector<Agent>& agents) {
  std::vector<Agent*> out;
  for (auto& a : agents) out.push_back(&a);
  return out;
}

}  // namespace

TEST_CASE("script mode parses role-prefixed lines") {
  auto backend = canned("Doctor: hi\nTeacher: hello");
  auto t = run_script_mode(doctor_teacher(), "school lunches", 10, *backend);
  REQUIRE(t.turns.size() == 2);
  CHECK(t.turns[0] == Turn{"Doctor", "hi", 0});
  CHECK(t.turns[1] == Turn{"Teacher", "hello", 1});
  CHECK(t.llm_calls == 1);
  CHECK(t.mode == InteractionMode::script);
}

TEST_CASE("script mode rejects output with no parseable turn") {
  auto backend = canned("garbage without any speaker");
  CHECK_THROWS_AS(run_script_mode(doctor_teacher(), "x", 10, *backend), FormatError);
  try {
    run_script_mode(doctor_teacher(), "x", 10, *backend);
  } catch (const FormatError& e) {
    CHECK(e.raw() == "garbage without any speaker");
  }
}

TEST_CASE("script mode truncates to max_turns and drops undeclared roles") {
  auto backend = canned("Doctor: a\nPilot: b\nTeacher: c\nDoctor: d");
  auto t = run_script_mode(doctor_teacher(), "x", 1, *backend);
  REQUIRE(t.turns.size() == 1);
  CHECK(t.turns[0].content == "a");

  auto all = parse_script("Doctor: a\nPilot: b\nTeacher: c\nDoctor:   \n", doctor_teacher(), 10);
  REQUIRE(all.size() == 2);
  CHECK(all[1] == Turn{"Teacher", "c", 1});
}

TEST_CASE("script mode prompt declares roles and turn budget") {
  std::string seen;
  FunctionBackend backend([&](const ChatRequest& r) {
    seen = r.prompt_text();
    return std::string("Doctor: fine");
  });
  run_script_mode(doctor_teacher(), "vaccines", 6, backend);
  CHECK(seen.find("DIALOGUE ROLES: Doctor, Teacher") != std::string::npos);
  CHECK(seen.find("TURNS: 6") != std::string::npos);
  CHECK(seen.find("vaccines") != std::string::npos);
}

TEST_CASE("script mode rejects bad role lists") {
  auto backend = canned("A: x");
  std::vector<Role> one{{"A", ""}};
  CHECK_THROWS_AS(run_script_mode(one, "x", 4, *backend), ValidationError);
  std::vector<Role> dup{{"A", ""}, {"A", ""}};
  CHECK_THROWS_AS(run_script_mode(dup, "x", 4, *backend), ValidationError);
  std::vector<Role> colon{{"A:B", ""}, {"C", ""}};
  CHECK_THROWS_AS(run_script_mode(colon, "x", 4, *backend), ValidationError);
}

TEST_CASE("agent mode alternates speakers with one call per turn") {
  auto agents = make_agents({"Ann", "Ben"});
  int calls = 0;
  std::vector<std::string> prompts;
  FunctionBackend backend([&](const ChatRequest& r) {
    prompts.push_back(r.prompt_text());
    return "line " + std::to_string(++calls);
  });
  auto t = run_agent_mode(pointers(agents), "parks", 4, backend);
  REQUIRE(t.turns.size() == 4);
  CHECK(calls == 4);
  CHECK(t.llm_calls == 4);
  CHECK(t.turns[0].speaker == "Ann");
  CHECK(t.turns[1].speaker == "Ben");
  CHECK(t.turns[2].speaker == "Ann");
  CHECK(t.turns[3].speaker == "Ben");
  // The third prompt sees the first two turns verbatim.
  CHECK(prompts[2].find("Ann: line 1") != std::string::npos);
  CHECK(prompts[2].find("Ben: line 2") != std::string::npos);
  CHECK(prompts[1].find("Ben: line 2") == std::string::npos);
  CHECK(prompts[2].find("SPEAKER: Ann") != std::string::npos);
}

TEST_CASE("agent mode stores each turn in the speaker's memory") {
  auto agents = make_agents({"Ann", "Ben", "Cy"});
  DeterministicMock backend(3);
  auto t = run_agent_mode(pointers(agents), "parks", 9, backend);
  REQUIRE(t.turns.size() == 9);
  for (auto& a : agents) CHECK(a.memory().long_term().size() == 3);
  std::size_t total = 0;
  for (auto& a : agents) total += a.memory().long_term().size();
  CHECK(total == 9);
  CHECK(agents[0].memory().long_term()[0].content.find(t.turns[0].content) != std::string::npos);
}

TEST_CASE("agent mode is deterministic with the deterministic mock") {
  auto a1 = make_agents({"Ann", "Ben"});
  auto a2 = make_agents({"Ann", "Ben"});
  DeterministicMock m1(5), m2(5);
  auto t1 = run_agent_mode(pointers(a1), "trains", 6, m1);
  auto t2 = run_agent_mode(pointers(a2), "trains", 6, m2);
  CHECK(t1.to_json() == t2.to_json());
}

TEST_CASE("agent mode returns a partial transcript on backend failure") {
  auto agents = make_agents({"Ann", "Ben"});
  int calls = 0;
  FunctionBackend backend([&](const ChatRequest&) -> std::string {
    if (++calls == 3) throw BackendError("down", false, "b");
    return "ok";
  });
  std::vector<TurnTrace> trace;
  auto t = run_agent_mode(pointers(agents), "x", 6, backend, {}, &trace);
  CHECK(t.turns.size() == 2);
  REQUIRE(t.error.has_value());
  CHECK(t.error->find("down") != std::string::npos);
  CHECK(trace.size() == 3);
}

TEST_CASE("duplicate names get id-qualified labels") {
  auto agents = make_agents({"Sam", "Sam"});
  DeterministicMock backend(1);
  auto t = run_agent_mode(pointers(agents), "x", 2, backend);
  CHECK(t.turns[0].speaker == "Sam #1");
  CHECK(t.turns[1].speaker == "Sam #2");
}

TEST_CASE("property: transcripts validate for random role counts and budgets") {
  for (std::uint64_t trial = 0; trial < 60; ++trial) {
    KeyedRng rng({trial, 77});
    const std::size_t n = 2 + rng.below(5);
    const std::size_t budget = 1 + rng.below(12);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("Agent" + std::to_string(i));
    DeterministicMock backend(trial);

    if (trial % 2 == 0) {
      auto agents = make_agents(names);
      auto t = run_agent_mode(pointers(agents), "topic", budget, backend);
      CHECK(t.turns.size() == budget);
      CHECK(t.llm_calls == budget);
      CHECK_NOTHROW(t.validate(names));
      for (std::size_t i = 0; i < t.turns.size(); ++i) CHECK(t.turns[i].speaker == names[i % n]);
      std::size_t stored = 0;
      for (auto& a : agents) stored += a.memory().long_term().size();
      CHECK(stored == budget);
    } else {
      std::vector<Role> roles;
      for (auto& nm : names) roles.push_back({nm, "name: " + nm});
      auto t = run_script_mode(roles, "topic", budget, backend);
      CHECK(t.turns.size() <= budget);
      CHECK(t.turns.size() >= 1);
      CHECK(t.llm_calls == 1);
      CHECK_NOTHROW(t.validate(names));
    }
  }
}

TEST_CASE("transcript json round trip and validation") {
  Transcript t;
  t.mode = InteractionMode::agent;
  t.turns = {{"A", "x", 0}, {"B", "y", 1}};
  t.llm_calls = 2;
  auto back = Transcript::from_json(t.to_json());
  CHECK(back.to_json() == t.to_json());
  std::vector<std::string> names{"A", "B"};
  CHECK_NOTHROW(t.validate(names));
  t.turns[1].index = 5;
  CHECK_THROWS_AS(t.validate(names), ValidationError);
}
