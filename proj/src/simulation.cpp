#include "gensim/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "gensim/error.hpp"
#include "gensim/parallel.hpp"

namespace gensim {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// ---- config ----

void SimulationConfig::validate() const {
  std::vector<std::string> errors;
  const auto names = scenario_names();
  if (std::find(names.begin(), names.end(), scenario) == names.end())
    errors.push_back("scenario: unknown scenario '" + scenario + "'");
  if (num_agents < 1 && !population_file) errors.push_back("num_agents: must be >= 1");
  if (rounds < 1) errors.push_back("rounds: must be >= 1");
  if (workers < 1) errors.push_back("workers: must be >= 1");
  if (!scenario_params.is_object()) errors.push_back("scenario_params: must be an object");
  auto collect = [&](auto&& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      errors.insert(errors.end(), e.field_errors().begin(), e.field_errors().end());
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  };
  collect([&] { memory.validate(); });
  collect([&] { backend.validate(); });
  if (retry.budget < 0) errors.push_back("retry.budget: must be >= 0");
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

json SimulationConfig::to_json() const {
  json j{{"scenario", scenario},       {"num_agents", num_agents},   {"rounds", rounds},
         {"seed", seed},               {"workers", workers},         {"memory", memory.to_json()},
         {"backend", backend.to_json()}, {"retry", retry.to_json()}, {"scenario_params", scenario_params},
         {"keep_events", keep_events}};
  if (population_file) j["population_file"] = *population_file;
  if (event_log) j["event_log"] = *event_log;
  return j;
}

SimulationConfig SimulationConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError({"config: must be a JSON object"});
  SimulationConfig c;
  std::vector<std::string> errors;
  auto field = [&](const char* key, auto&& apply) {
    if (!j.contains(key)) return;
    try {
      apply(j.at(key));
    } catch (const ConfigError& e) {
      errors.insert(errors.end(), e.field_errors().begin(), e.field_errors().end());
    } catch (const std::exception& e) {
      errors.push_back(std::string(key) + ": " + e.what());
    }
  };
  auto positive = [](const json& v, const char* what) {
    if (!v.is_number_integer()) throw std::invalid_argument(std::string(what) + " must be an integer");
    if (v.get<std::int64_t>() < 1) throw std::invalid_argument("must be >= 1");
    return v.get<std::uint64_t>();
  };
  field("scenario", [&](const json& v) { c.scenario = v.get<std::string>(); });
  field("num_agents", [&](const json& v) { c.num_agents = positive(v, "num_agents"); });
  field("rounds", [&](const json& v) { c.rounds = positive(v, "rounds"); });
  field("workers", [&](const json& v) { c.workers = positive(v, "workers"); });
  field("seed", [&](const json& v) {
    if (!v.is_number_integer()) throw std::invalid_argument("must be an integer");
    c.seed = v.is_number_unsigned() ? v.get<std::uint64_t>() : static_cast<std::uint64_t>(v.get<std::int64_t>());
  });
  field("memory", [&](const json& v) { c.memory = MemoryConfig::from_json(v); });
  field("backend", [&](const json& v) { c.backend = BackendConfig::from_json(v); });
  field("retry", [&](const json& v) { c.retry = RetryPolicy::from_json(v); });
  field("scenario_params", [&](const json& v) {
    if (!v.is_object()) throw std::invalid_argument("must be an object");
    c.scenario_params = v;
  });
  field("population_file", [&](const json& v) { c.population_file = v.get<std::string>(); });
  field("event_log", [&](const json& v) {
    if (!v.is_null()) c.event_log = v.get<std::string>();
  });
  field("keep_events", [&](const json& v) { c.keep_events = v.get<bool>(); });
  if (!errors.empty()) throw ConfigError(std::move(errors));
  c.validate();
  return c;
}

SimulationConfig SimulationConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError({std::string("config: not valid JSON: ") + e.what()});
  }
  return from_json(j);
}

// ---- events ----

nlohmann::ordered_json ActionEvent::to_json() const {
  nlohmann::ordered_json j;
  j["seq"] = seq;
  j["round"] = round;
  j["agent_id"] = agent_id.value;
  j["q"] = q;
  j["a"] = a;
  j["parsed"] = parsed;
  j["latency_ms"] = latency_ms;
  if (error) j["error"] = *error;
  return j;
}

std::string ActionEvent::to_json_line() const { return to_json().dump(); }

ActionEvent ActionEvent::from_json(const json& j) {
  ActionEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.round = j.at("round").get<std::uint64_t>();
  e.agent_id = AgentId{j.at("agent_id").get<std::uint64_t>()};
  e.q = j.at("q").get<std::string>();
  e.a = j.at("a").get<std::string>();
  e.parsed = j.value("parsed", json());
  e.latency_ms = j.value("latency_ms", 0.0);
  if (j.contains("error")) e.error = j.at("error").get<std::string>();
  return e;
}

json RoundReport::to_json() const {
  json j{{"round", round},   {"events", events},           {"wall_time_ms", wall_time.count()},
         {"errors", errors}, {"tasks", tasks},             {"reflections", reflections},
         {"aborted", aborted}};
  if (abort_reason) j["abort_reason"] = *abort_reason;
  return j;
}

EventLog::EventLog(std::optional<std::filesystem::path> file, std::uint64_t next_seq, bool append,
                   bool keep_in_memory)
    : first_seq_(next_seq), next_seq_(next_seq), path_(std::move(file)), keep_(keep_in_memory) {
  if (path_) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    file_.open(*path_, append ? std::ios::app : std::ios::trunc);
    if (!file_) throw IoError("cannot open event log " + path_->string());
  }
}

void EventLog::append_batch(std::vector<ActionEvent>& events) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) throw ConflictError("event log is closed");
    std::string buffer;
    for (auto& e : events) {
      e.seq = next_seq_++;
      if (path_) {
        buffer += e.to_json_line();
        buffer += '\n';
      }
    }
    if (path_) {
      file_ << buffer;
      file_.flush();
      if (!file_) throw IoError("write to event log " + path_->string() + " failed");
    }
    if (keep_) events_.insert(events_.end(), events.begin(), events.end());
  }
  grew_.notify_all();
}

std::vector<ActionEvent> EventLog::since(std::uint64_t after, std::size_t limit) const {
  std::lock_guard lock(mutex_);
  const std::uint64_t start = std::max(after + 1, first_seq_) - first_seq_;
  if (start >= events_.size()) return {};
  auto end = events_.size();
  if (limit) end = std::min<std::size_t>(end, start + limit);
  return {events_.begin() + static_cast<std::ptrdiff_t>(start), events_.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::optional<ActionEvent> EventLog::at(std::uint64_t seq) const {
  std::lock_guard lock(mutex_);
  if (seq < first_seq_ || seq - first_seq_ >= events_.size()) return std::nullopt;
  return events_[seq - first_seq_];
}

bool EventLog::wait_for(std::uint64_t after, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  grew_.wait_for(lock, timeout, [&] { return next_seq_ - 1 > after || closed_; });
  return next_seq_ - 1 > after;
}

void EventLog::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    if (file_.is_open()) file_.close();
  }
  grew_.notify_all();
}

bool EventLog::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mutex_);
  return next_seq_ - 1;
}

std::uint64_t EventLog::next_seq() const {
  std::lock_guard lock(mutex_);
  return next_seq_;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

// ---- population ----

namespace {

struct FirstName {
  const char* name;
  const char* gender;
};

constexpr std::array<FirstName, 24> kFirstNames{{
    {"Alice", "female"}, {"Bruno", "male"},   {"Chen", "male"},     {"Dana", "female"}, {"Elif", "female"},
    {"Farid", "male"},   {"Grace", "female"}, {"Hiro", "male"},     {"Ines", "female"}, {"Jonas", "male"},
    {"Kemi", "female"},  {"Luca", "male"},    {"Maya", "female"},   {"Nikhil", "male"}, {"Olga", "female"},
    {"Pedro", "male"},   {"Quinn", "nonbinary"}, {"Rosa", "female"}, {"Sami", "male"},  {"Tara", "female"},
    {"Umar", "male"},    {"Vera", "female"},  {"Wei", "nonbinary"}, {"Yara", "female"},
}};
constexpr std::array<const char*, 20> kLastNames{"Abe",    "Novak", "Okafor", "Silva",  "Larsen", "Haddad", "Kim",
                                                 "Moreau", "Patel", "Rossi",  "Schmidt", "Tanaka", "Ortiz", "Berg",
                                                 "Dubois", "Ivanova", "Mensah", "Nguyen", "Walsh", "Yilmaz"};
constexpr std::array<const char*, 12> kOccupations{"student",  "retired",  "nurse",    "engineer",
                                                   "shop owner", "teacher", "driver",  "artist",
                                                   "clerk",    "farmer",   "musician", "unemployed"};
constexpr std::array<const char*, 10> kTowns{"Riverside", "Lakeview", "Old Harbor", "Northgate", "Millbrook",
                                             "Cedar Hill", "Fairport", "Stonebridge", "Elmwood", "Sunnyvale"};
constexpr std::array<const char*, 3> kHealth{"good", "fair", "poor"};

}  // namespace

AgentProfile default_profile(AgentId id, KeyedRng& rng) {
  AgentProfile p;
  p.id = id;
  const auto& first = kFirstNames[rng.below(kFirstNames.size())];
  p.public_attrs["name"] = std::string(first.name) + " " + kLastNames[rng.below(kLastNames.size())];
  p.public_attrs["gender"] = first.gender;
  p.public_attrs["age"] = std::to_string(18 + rng.below(63));
  p.public_attrs["occupation"] = kOccupations[rng.below(kOccupations.size())];
  p.public_attrs["hometown"] = kTowns[rng.below(kTowns.size())];
  p.private_attrs["income"] = std::to_string(12 + rng.below(140)) + "000 per year";
  p.private_attrs["health"] = kHealth[rng.below(kHealth.size())];
  return p;
}

std::vector<AgentProfile> spawn_population(std::size_t n, const ProfileGenerator& generator, std::uint64_t seed) {
  if (n < 1) throw ValidationError("spawn_population: n must be >= 1");
  std::vector<AgentProfile> out;
  out.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    KeyedRng rng({seed, i, 0x9e09});
    auto p = generator(AgentId{i}, rng);
    p.id = AgentId{i};
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<AgentProfile> spawn_population(std::size_t n, std::uint64_t seed) {
  return spawn_population(n, default_profile, seed);
}

// ---- simulation ----

Simulation::Simulation(SimulationConfig config, std::shared_ptr<Gateway> gateway) : config_(std::move(config)) {
  config_.validate();
  std::vector<AgentProfile> profiles;
  if (config_.population_file) {
    profiles = load_population(*config_.population_file);
    if (profiles.empty()) throw ConfigError({"population_file: no profiles in " + *config_.population_file});
    std::sort(profiles.begin(), profiles.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    config_.num_agents = profiles.size();
  } else {
    profiles = spawn_population(config_.num_agents, config_.seed);
  }
  scenario_ = make_scenario(config_.scenario, config_.scenario_params);
  scenario_->init(profiles, config_.seed);
  agents_.reserve(profiles.size());
  for (auto& p : profiles) agents_.emplace_back(std::move(p), config_.memory);
  events_ = std::make_unique<EventLog>(config_.event_log, 1, false, config_.keep_events);
  setup_backend(std::move(gateway));
}

Simulation::Simulation(RestoreTag, SimulationConfig config, std::shared_ptr<Gateway> gateway)
    : config_(std::move(config)) {
  config_.validate();
  scenario_ = make_scenario(config_.scenario, config_.scenario_params);
  setup_backend(std::move(gateway));
}

void Simulation::setup_backend(std::shared_ptr<Gateway> gateway) {
  gateway_ = gateway ? std::move(gateway) : make_gateway(config_.backend, config_.retry);
  backend_ = gateway_;
}

std::unique_ptr<Simulation> Simulation::restore(const std::filesystem::path& checkpoint,
                                                std::shared_ptr<Gateway> gateway,
                                                std::optional<std::string> event_log) {
  auto data = read_checkpoint(checkpoint);
  auto config = SimulationConfig::from_json(data.config);
  if (event_log) config.event_log = *event_log;
  std::unique_ptr<Simulation> sim(new Simulation(RestoreTag{}, std::move(config), std::move(gateway)));

  sim->agents_.reserve(data.profiles.size());
  for (std::size_t i = 0; i < data.profiles.size(); ++i) {
    Agent agent(AgentProfile::from_json(data.profiles[i]), sim->config_.memory);
    agent.set_memory(MemoryStore::from_json(data.memories[i], sim->config_.memory));
    sim->agents_.push_back(std::move(agent));
  }
  if (!std::is_sorted(sim->agents_.begin(), sim->agents_.end(),
                      [](const Agent& a, const Agent& b) { return a.id() < b.id(); }))
    throw IoError("checkpoint profiles are not in id order");

  auto& state = sim->env_.state();
  state = EnvironmentState::from_json(data.env);
  if (state.round != data.round) throw IoError("checkpoint round mismatch between header and env section");
  sim->scenario_->load_state(state.scenario_state);
  for (const auto& item : data.queue) sim->env_.interventions().submit(Intervention::from_json(item), data.round);
  sim->round_ = data.round;
  sim->open_round_ = data.round;
  const auto next_seq = data.env.value("event_seq", std::uint64_t{1});
  sim->events_ = std::make_unique<EventLog>(sim->config_.event_log, next_seq, true, sim->config_.keep_events);
  return sim;
}

std::size_t Simulation::index_of(AgentId id) const {
  auto it = std::lower_bound(agents_.begin(), agents_.end(), id,
                             [](const Agent& a, AgentId v) { return a.id() < v; });
  if (it == agents_.end() || it->id() != id) throw NotFoundError("agent " + std::to_string(id.value) + " not found");
  return static_cast<std::size_t>(it - agents_.begin());
}

RoundReport Simulation::run_round() {
  std::lock_guard lock(state_mutex_);
  const auto started = Clock::now();
  const std::uint64_t round = env_.state().round;
  RoundReport report;
  report.round = round;

  auto previous_globals = env_.state().globals;
  auto applied = env_.apply_due();
  open_round_ = round + 1;

  const auto tasks = scenario_->plan_round(agents_, env_);
  report.tasks = tasks.size();
  const auto backend = this->backend();
  const RoundContext ctx{round, config_.seed, env_, *backend};
  const std::size_t lanes =
      std::min<std::size_t>(config_.workers, static_cast<std::size_t>(std::max(1, gateway_->total_concurrency())));

  std::vector<TaskResult> results(tasks.size());
  parallel_for(tasks.size(), lanes, [&](std::size_t i) {
    std::vector<Agent*> members;
    members.reserve(tasks[i].members.size());
    for (auto idx : tasks[i].members) members.push_back(&agents_[idx]);
    try {
      results[i] = scenario_->execute(tasks[i], members, ctx);
    } catch (const std::exception& e) {
      ActionOutcome out;
      out.agent_id = members.front()->id();
      out.error = e.what();
      results[i] = TaskResult{{std::move(out)}, true};
    }
  });

  const auto failed = static_cast<std::size_t>(
      std::count_if(results.begin(), results.end(), [](const TaskResult& r) { return r.failed; }));
  if (!tasks.empty() && failed * 2 > tasks.size()) {
    // Memories written by in-flight discussions are not rolled back.
    env_.undo_apply(std::move(applied), std::move(previous_globals));
    open_round_ = round;
    report.aborted = true;
    report.errors = failed;
    report.abort_reason = std::to_string(failed) + " of " + std::to_string(tasks.size()) + " tasks failed terminally";
    report.wall_time = Clock::now() - started;
    reports_.push_back(report);
    return report;
  }

  std::vector<ActionOutcome> outcomes;
  for (auto& r : results)
    for (auto& o : r.outcomes) outcomes.push_back(std::move(o));
  std::stable_sort(outcomes.begin(), outcomes.end(), [](const ActionOutcome& a, const ActionOutcome& b) {
    return a.agent_id != b.agent_id ? a.agent_id < b.agent_id : a.turn < b.turn;
  });

  for (auto& update : scenario_->resolve(outcomes, round))
    agents_[index_of(update.agent_id)].memory().append(std::move(update.record), round);

  std::vector<std::size_t> reflecting;
  for (std::size_t i = 0; i < agents_.size(); ++i)
    if (agents_[i].memory().reflection_due()) reflecting.push_back(i);
  std::atomic<std::size_t> reflections{0};
  parallel_for(reflecting.size(), lanes, [&](std::size_t i) {
    try {
      if (reflect(agents_[reflecting[i]], *backend, round)) ++reflections;
    } catch (const std::exception&) {
      // Reflection is retried at the next barrier.
    }
  });
  report.reflections = reflections.load();

  std::vector<ActionEvent> events;
  events.reserve(outcomes.size());
  for (auto& o : outcomes) {
    if (o.error) ++report.errors;
    events.push_back(ActionEvent{0, round, o.agent_id, std::move(o.q), std::move(o.a), std::move(o.parsed),
                                 o.latency.count(), std::move(o.error)});
  }
  report.events = events.size();
  events_->append_batch(events);

  env_.clear_broadcasts();
  env_.state().round = round + 1;
  round_ = round + 1;
  report.wall_time = Clock::now() - started;
  reports_.push_back(report);
  return report;
}

std::vector<RoundReport> Simulation::run(std::optional<std::uint64_t> rounds,
                                         const std::function<void(const RoundReport&)>& on_round) {
  const std::uint64_t target = rounds ? current_round() + *rounds : config_.rounds;
  std::vector<RoundReport> out;
  while (current_round() < target && !stop_requested()) {
    auto report = run_round();
    out.push_back(report);
    if (on_round) on_round(report);
    if (report.aborted) break;
  }
  return out;
}

void Simulation::checkpoint(const std::filesystem::path& path) const {
  std::lock_guard lock(state_mutex_);
  CheckpointData data;
  data.round = env_.state().round;
  data.config = config_.to_json();
  data.profiles.reserve(agents_.size());
  data.memories.reserve(agents_.size());
  for (const auto& a : agents_) {
    data.profiles.push_back(a.profile().to_json());
    data.memories.push_back(a.memory().to_json());
  }
  auto state = env_.state();
  state.scenario_state = scenario_->save_state();
  data.env = state.to_json();
  data.env["event_seq"] = events_->next_seq();
  data.rng = json{{"generator", "splitmix64-keyed"}, {"seed", config_.seed}};
  for (const auto& i : env_.interventions().pending()) data.queue.push_back(i.to_json());
  write_checkpoint(path, data);
}

void Simulation::submit_intervention(Intervention intervention) {
  env_.interventions().submit(std::move(intervention), open_round_.load());
}

std::vector<Intervention> Simulation::pending_interventions() const { return env_.interventions().pending(); }

InterviewExchange Simulation::interview(AgentId id, std::string_view question) {
  std::optional<Agent> copy;
  std::uint64_t round = 0;
  {
    std::lock_guard lock(state_mutex_);
    copy.emplace(agents_[index_of(id)]);
    round = env_.state().round;
  }
  auto exchange = gensim::interview(*copy, question, *backend(), round);
  env_.log_interview(exchange);
  return exchange;
}

std::vector<AgentProfile> Simulation::search(std::string_view query) const {
  std::lock_guard lock(state_mutex_);
  return search_agents(agents_, query);
}

Agent Simulation::agent(AgentId id) const {
  std::lock_guard lock(state_mutex_);
  return agents_[index_of(id)];
}

std::size_t Simulation::agent_count() const { return agents_.size(); }

EnvironmentState Simulation::environment_state() const {
  std::lock_guard lock(state_mutex_);
  auto state = env_.state();
  state.scenario_state = scenario_->save_state();
  return state;
}

std::vector<RoundReport> Simulation::reports() const {
  std::lock_guard lock(state_mutex_);
  return reports_;
}

void Simulation::set_backend(std::shared_ptr<Backend> backend) {
  if (!backend) throw ValidationError("set_backend: null backend");
  std::lock_guard lock(backend_mutex_);
  backend_ = std::move(backend);
}

std::shared_ptr<Backend> Simulation::backend() const {
  std::lock_guard lock(backend_mutex_);
  return backend_;
}

}  // namespace gensim
