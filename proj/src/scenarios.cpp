#include "gensim/scenarios.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>

#include "gensim/directives.hpp"
#include "gensim/error.hpp"
#include "gensim/rng.hpp"
#include "gensim/text.hpp"

namespace gensim {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<const char*, const char*>, 10> kJobs{{
    {"Carpenter", "carpentry"},
    {"Nurse", "nursing"},
    {"Accountant", "accounting"},
    {"Software Developer", "programming"},
    {"Teacher", "teaching"},
    {"Cook", "cooking"},
    {"Delivery Driver", "driving"},
    {"Sales Associate", "sales"},
    {"Welder", "welding"},
    {"Graphic Designer", "design"},
}};

constexpr std::array<const char*, 12> kAdjectives{"Silent", "Crimson", "Last",   "Hidden", "Broken", "Golden",
                                                  "Distant", "Frozen", "Wild",  "Lonely", "Burning", "Secret"};
constexpr std::array<const char*, 12> kNouns{"River", "Kingdom", "Promise", "Harbor", "Garden", "Signal",
                                             "Winter", "Machine", "Orchard", "Letter", "Voyage", "Mirror"};
constexpr std::array<const char*, 8> kGenres{"drama", "comedy", "thriller", "romance",
                                             "science fiction", "documentary", "animation", "horror"};

std::uint64_t param_uint(const json& params, const char* key, std::uint64_t fallback, std::uint64_t min_value) {
  if (!params.contains(key)) return fallback;
  const auto& v = params.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < static_cast<std::int64_t>(min_value))
    throw ConfigError({std::string("scenario_params.") + key + ": must be an integer >= " + std::to_string(min_value)});
  return v.get<std::uint64_t>();
}

std::string param_string(const json& params, const char* key, std::string fallback) {
  if (!params.contains(key)) return fallback;
  if (!params.at(key).is_string()) throw ConfigError({std::string("scenario_params.") + key + ": must be a string"});
  return params.at(key).get<std::string>();
}

template <class T>
std::vector<T> load_jsonl(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + " file " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(T::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), line);
    }
  }
  return out;
}

}  // namespace

TaskResult PerAgentScenario::execute(const TaskSpec&, std::span<Agent* const> members,
                                     const RoundContext& ctx) const {
  TaskResult result;
  for (Agent* agent : members) {
    auto task = build_task(*agent, ctx.env, ctx);
    auto memories = context_memories(*agent, task.memory_query, ctx.round);
    static const auto tmpl = PromptTemplate::default_agent();
    ActionOutcome out;
    out.agent_id = agent->id();
    out.q = render_prompt(tmpl, agent->profile(), memories, ctx.env.agent_view(task.scenario_view), task.instruction);
    try {
      auto response = ctx.backend.complete(ChatRequest::from_prompt(out.q));
      out.a = std::move(response.content);
      out.latency = response.latency;
      out.parsed = parse(out.a, task.context);
    } catch (const std::exception& e) {
      out.error = e.what();
      result.failed = true;
    }
    result.outcomes.push_back(std::move(out));
  }
  return result;
}

// ---- job market ----

json JobPosting::to_json() const {
  return json{{"id", id}, {"title", title}, {"required_skill", required_skill}, {"capacity", capacity}};
}

JobPosting JobPosting::from_json(const json& j) {
  JobPosting p;
  p.id = j.at("id").get<std::uint64_t>();
  p.title = j.at("title").get<std::string>();
  p.required_skill = j.value("required_skill", std::string());
  p.capacity = j.value("capacity", std::uint64_t{1});
  if (p.capacity < 1) throw ValidationError("posting " + std::to_string(p.id) + ": capacity must be >= 1");
  return p;
}

std::vector<JobPosting> load_postings(const std::filesystem::path& path) {
  return load_jsonl<JobPosting>(path, "postings");
}

JobMarketScenario::JobMarketScenario(const json& params) {
  num_postings_ = param_uint(params, "num_postings", 0, 1);
  max_capacity_ = param_uint(params, "max_capacity", 3, 1);
  if (params.contains("postings")) {
    std::vector<JobPosting> ps;
    try {
      for (const auto& p : params.at("postings")) ps.push_back(JobPosting::from_json(p));
    } catch (const std::exception& e) {
      throw ConfigError({std::string("scenario_params.postings: ") + e.what()});
    }
    set_postings(std::move(ps));
  } else if (params.contains("postings_file")) {
    set_postings(load_postings(param_string(params, "postings_file", "")));
  }
}

void JobMarketScenario::set_postings(std::vector<JobPosting> postings) {
  std::set<std::uint64_t> ids;
  for (const auto& p : postings) {
    if (p.capacity < 1) throw ConfigError({"postings: capacity must be >= 1"});
    if (!ids.insert(p.id).second) throw ConfigError({"postings: duplicate id " + std::to_string(p.id)});
  }
  postings_ = std::move(postings);
  std::sort(postings_.begin(), postings_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

void JobMarketScenario::init(std::vector<AgentProfile>& profiles, std::uint64_t seed) {
  for (auto& p : profiles) {
    if (p.public_attrs.contains("skill") || p.private_attrs.contains("skill")) continue;
    KeyedRng rng({seed, p.id.value, 0x5c111});
    p.public_attrs["skill"] = kJobs[rng.below(kJobs.size())].second;
  }
  if (postings_.empty()) {
    const std::size_t n = num_postings_ ? num_postings_ : std::max<std::size_t>(1, profiles.size() / 20);
    for (std::size_t i = 0; i < n; ++i) {
      KeyedRng rng({seed, i, 0x9057});
      const auto& job = kJobs[rng.below(kJobs.size())];
      postings_.push_back(JobPosting{i + 1, job.first, job.second, 1 + rng.below(max_capacity_)});
    }
  }
  if (postings_.empty()) throw ConfigError({"scenario_params.postings: job market needs at least one posting"});
}

std::uint64_t JobMarketScenario::filled(std::uint64_t posting_id) const {
  auto it = filled_.find(posting_id);
  return it == filled_.end() ? 0 : it->second;
}

std::vector<TaskSpec> JobMarketScenario::plan_round(std::span<const Agent> agents, const Environment&) const {
  std::vector<TaskSpec> tasks;
  for (std::size_t i = 0; i < agents.size(); ++i)
    if (!hires_.contains(agents[i].id().value)) tasks.push_back(TaskSpec{{i}});
  return tasks;
}

AgentTask JobMarketScenario::build_task(const Agent&, const Environment&, const RoundContext& ctx) const {
  AgentTask task;
  task.scenario_view = "It is week " + std::to_string(ctx.round + 1) + " of the job fair. Job postings:";
  std::vector<std::string> choices;
  json ids = json::array();
  for (const auto& p : postings_) {
    const auto left = p.capacity - std::min(p.capacity, filled(p.id));
    task.scenario_view += "\n[" + std::to_string(p.id) + "] " + p.title + " (requires " + p.required_skill + ", ";
    task.scenario_view += left == 0 ? std::string("no openings left)")
                                    : std::to_string(left) + (left == 1 ? " opening left)" : " openings left)");
    choices.push_back(std::to_string(p.id));
    ids.push_back(p.id);
  }
  task.instruction = "You are looking for a job. Pick one posting to apply for and reply with its id only.\n" +
                     directives::choices_line(choices);
  task.memory_query = "job application posting hired";
  task.context = json{{"choices", std::move(ids)}};
  return task;
}

json JobMarketScenario::parse(std::string_view reply, const json& context) const {
  const auto id = directives::first_integer(reply);
  if (id && *id > 0) {
    for (const auto& c : context.at("choices"))
      if (c.get<std::uint64_t>() == static_cast<std::uint64_t>(*id))
        return json{{"action", "apply"}, {"posting_id", c}};
  }
  return json{{"action", "none"}, {"reason", "unparseable choice"}};
}

std::vector<MemoryUpdate> JobMarketScenario::resolve(std::span<const ActionOutcome> outcomes, std::uint64_t round) {
  std::vector<MemoryUpdate> updates;
  for (const auto& o : outcomes) {
    if (o.error) continue;
    if (o.parsed.value("action", "") != "apply") {
      ++invalid_choices_;
      continue;
    }
    ++applications_;
    const auto pid = o.parsed.at("posting_id").get<std::uint64_t>();
    auto it = std::find_if(postings_.begin(), postings_.end(), [&](const auto& p) { return p.id == pid; });
    if (it == postings_.end()) {
      ++invalid_choices_;
      continue;
    }
    if (filled(pid) < it->capacity && !hires_.contains(o.agent_id.value)) {
      ++filled_[pid];
      hires_[o.agent_id.value] = pid;
      updates.push_back({o.agent_id, MemoryRecord{"hired as " + it->title, round, 0.8, MemoryKind::observation}});
    } else {
      updates.push_back({o.agent_id, MemoryRecord{"I applied to be a " + it->title + " but was not hired", round,
                                                  kDefaultImportance, MemoryKind::observation}});
    }
  }
  return updates;
}

json JobMarketScenario::save_state() const {
  json postings = json::array();
  for (const auto& p : postings_) postings.push_back(p.to_json());
  json filled = json::object();
  for (const auto& [k, v] : filled_) filled[std::to_string(k)] = v;
  json hires = json::object();
  for (const auto& [k, v] : hires_) hires[std::to_string(k)] = v;
  return json{{"postings", postings},         {"filled", filled},
              {"hires", hires},               {"applications", applications_},
              {"invalid_choices", invalid_choices_}};
}

void JobMarketScenario::load_state(const json& state) {
  std::vector<JobPosting> ps;
  for (const auto& p : state.at("postings")) ps.push_back(JobPosting::from_json(p));
  set_postings(std::move(ps));
  filled_.clear();
  for (const auto& [k, v] : state.at("filled").items()) filled_[std::stoull(k)] = v.get<std::uint64_t>();
  hires_.clear();
  for (const auto& [k, v] : state.at("hires").items()) hires_[std::stoull(k)] = v.get<std::uint64_t>();
  applications_ = state.value("applications", std::uint64_t{0});
  invalid_choices_ = state.value("invalid_choices", std::uint64_t{0});
}

// ---- recommender ----

json CatalogItem::to_json() const { return json{{"id", id}, {"title", title}, {"genre", genre}}; }

CatalogItem CatalogItem::from_json(const json& j) {
  return CatalogItem{j.at("id").get<std::uint64_t>(), j.at("title").get<std::string>(),
                     j.value("genre", std::string())};
}

std::vector<CatalogItem> load_catalog(const std::filesystem::path& path) {
  return load_jsonl<CatalogItem>(path, "catalog");
}

std::vector<RatingRow> load_ratings_csv(const std::filesystem::path& path, std::size_t limit) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ratings file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("ratings file is empty", "");
  const auto header = text::split(text::trim(line), ',');
  if (header.size() < 4 || header[0] != "userId" || header[1] != "movieId" || header[2] != "rating" ||
      header[3] != "timestamp")
    throw FormatError("ratings header must be userId,movieId,rating,timestamp", line);
  std::vector<RatingRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line) && (limit == 0 || rows.size() < limit)) {
    ++lineno;
    auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto f = text::split(trimmed, ',');
    RatingRow r;
    try {
      if (f.size() != 4) throw std::invalid_argument("expected 4 fields");
      r.user_id = std::stoull(f[0]);
      r.item_id = std::stoull(f[1]);
      r.rating = std::stod(f[2]);
      r.timestamp = std::stoll(f[3]);
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), line);
    }
    rows.push_back(r);
  }
  return rows;
}

RecommenderScenario::RecommenderScenario(const json& params) {
  catalog_size_ = param_uint(params, "catalog_size", 200, 1);
  k_ = param_uint(params, "k", 5, 1);
  if (params.contains("catalog_file")) {
    catalog_ = load_catalog(param_string(params, "catalog_file", ""));
  } else if (params.contains("ratings_csv")) {
    std::set<std::uint64_t> ids;
    for (const auto& r : load_ratings_csv(param_string(params, "ratings_csv", ""))) ids.insert(r.item_id);
    for (auto id : ids) catalog_.push_back(CatalogItem{id, "Movie " + std::to_string(id), ""});
  }
  if (params.contains("catalog") || params.contains("catalog_file") || params.contains("ratings_csv")) {
    if (params.contains("catalog"))
      for (const auto& item : params.at("catalog")) catalog_.push_back(CatalogItem::from_json(item));
    if (catalog_.empty()) throw ConfigError({"scenario_params.catalog: catalog is empty"});
  }
}

void RecommenderScenario::init(std::vector<AgentProfile>&, std::uint64_t seed) {
  if (catalog_.empty()) {
    for (std::size_t i = 0; i < catalog_size_; ++i) {
      KeyedRng rng({seed, i, 0xca7a});
      std::string title = std::string("The ") + kAdjectives[rng.below(kAdjectives.size())] + " " +
                          kNouns[rng.below(kNouns.size())];
      if (i >= kAdjectives.size() * kNouns.size() / 4) title += " " + std::to_string(i / 36 + 1);
      catalog_.push_back(CatalogItem{i + 1, std::move(title), kGenres[rng.below(kGenres.size())]});
    }
  }
  index_.clear();
  for (std::size_t i = 0; i < catalog_.size(); ++i)
    if (!index_.emplace(catalog_[i].id, i).second)
      throw ConfigError({"scenario_params.catalog: duplicate item id " + std::to_string(catalog_[i].id)});
}

std::vector<TaskSpec> RecommenderScenario::plan_round(std::span<const Agent> agents, const Environment&) const {
  std::vector<TaskSpec> tasks(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) tasks[i].members = {i};
  return tasks;
}

std::vector<std::uint64_t> RecommenderScenario::recommend(AgentId agent, std::uint64_t round,
                                                          std::uint64_t seed) const {
  const std::size_t m = catalog_.size();
  const std::size_t k = std::min(k_, m);
  KeyedRng rng({seed, round, agent.value, 0x7ec});
  std::vector<std::size_t> picked;
  picked.reserve(k);
  if (k * 2 > m) {
    // Dense pick: partial shuffle.
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(m - i)]);
    picked.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    while (picked.size() < k) {
      const auto c = static_cast<std::size_t>(rng.below(m));
      if (std::find(picked.begin(), picked.end(), c) == picked.end()) picked.push_back(c);
    }
  }
  std::vector<std::uint64_t> ids;
  for (auto i : picked) ids.push_back(catalog_[i].id);
  return ids;
}

AgentTask RecommenderScenario::build_task(const Agent& agent, const Environment&, const RoundContext& ctx) const {
  const auto items = recommend(agent.id(), ctx.round, ctx.seed);
  AgentTask task;
  task.scenario_view = "Movies recommended to you:";
  std::vector<std::string> ids;
  for (auto id : items) {
    const auto& item = catalog_[index_.at(id)];
    task.scenario_view += "\n[" + std::to_string(id) + "] " + item.title;
    if (!item.genre.empty()) task.scenario_view += " (" + item.genre + ")";
    ids.push_back(std::to_string(id));
  }
  task.instruction =
      "Rate every recommended movie from 0.5 to 5.0 in steps of 0.5. Reply with one line per movie in the "
      "form <id>=<rating>.\n" +
      directives::rate_items_line(ids);
  task.memory_query = "movie rating watched";
  task.context = json{{"items", items}};
  return task;
}

json RecommenderScenario::parse(std::string_view reply, const json& context) const {
  const auto& items = context.at("items");
  std::vector<std::optional<double>> ratings(items.size());
  for (const auto& raw : text::split_lines(reply)) {
    auto line = text::trim(raw);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = text::trim(line.substr(0, eq));
    const auto value = std::string(text::trim(line.substr(eq + 1)));
    std::uint64_t id = 0;
    auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    if (ec != std::errc() || p != key.data() + key.size()) continue;
    char* end = nullptr;
    const double r = std::strtod(value.c_str(), &end);
    if (end == value.c_str()) continue;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].get<std::uint64_t>() == id && !ratings[i]) ratings[i] = clamp_rating(r);
  }
  json out = json::array();
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (ratings[i])
      out.push_back(json{{"item_id", items[i]}, {"rating", *ratings[i]}});
    else
      ++skipped;
  }
  return json{{"ratings", out}, {"skipped", skipped}};
}

std::vector<MemoryUpdate> RecommenderScenario::resolve(std::span<const ActionOutcome> outcomes, std::uint64_t round) {
  last_round_.fill(0);
  std::vector<MemoryUpdate> updates;
  for (const auto& o : outcomes) {
    if (o.error) continue;
    std::string summary;
    for (const auto& r : o.parsed.at("ratings")) {
      const double v = r.at("rating").get<double>();
      const auto idx = rating_index(v).value_or(0);
      ++histogram_[idx];
      ++last_round_[idx];
      ++accepted_;
      auto it = index_.find(r.at("item_id").get<std::uint64_t>());
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.1f", v);
      summary += (summary.empty() ? "" : ", ") + catalog_[it->second].title + " " + buf;
    }
    skipped_ += o.parsed.at("skipped").get<std::uint64_t>();
    if (!summary.empty())
      updates.push_back({o.agent_id, MemoryRecord{"I rated movies: " + summary, round, kDefaultImportance,
                                                  MemoryKind::observation}});
  }
  return updates;
}

json RecommenderScenario::save_state() const {
  json catalog = json::array();
  for (const auto& c : catalog_) catalog.push_back(c.to_json());
  return json{{"catalog", catalog},   {"histogram", histogram_}, {"last_round_histogram", last_round_},
              {"accepted", accepted_}, {"skipped", skipped_},   {"k", k_}};
}

void RecommenderScenario::load_state(const json& state) {
  catalog_.clear();
  for (const auto& c : state.at("catalog")) catalog_.push_back(CatalogItem::from_json(c));
  histogram_ = state.at("histogram").get<RatingHistogram>();
  last_round_ = state.at("last_round_histogram").get<RatingHistogram>();
  accepted_ = state.at("accepted").get<std::uint64_t>();
  skipped_ = state.at("skipped").get<std::uint64_t>();
  k_ = state.value("k", k_);
  index_.clear();
  for (std::size_t i = 0; i < catalog_.size(); ++i) index_.emplace(catalog_[i].id, i);
}

// ---- group discussion ----

GroupDiscussionScenario::GroupDiscussionScenario(const json& params) {
  group_size_ = param_uint(params, "group_size", 5, 2);
  max_turns_ = param_uint(params, "max_turns", 10, 1);
  topic_ = param_string(params, "topic", topic_);
}

void GroupDiscussionScenario::init(std::vector<AgentProfile>& profiles, std::uint64_t) {
  if (profiles.size() < 2) throw ConfigError({"num_agents: group discussion needs at least 2 agents"});
}

std::vector<TaskSpec> GroupDiscussionScenario::plan_round(std::span<const Agent> agents, const Environment&) const {
  std::vector<TaskSpec> tasks;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (i % group_size_ == 0) tasks.emplace_back();
    tasks.back().members.push_back(i);
  }
  // A lone agent at the end joins the previous group.
  if (tasks.size() > 1 && tasks.back().members.size() == 1) {
    tasks[tasks.size() - 2].members.push_back(tasks.back().members.front());
    tasks.pop_back();
  }
  return tasks;
}

TaskResult GroupDiscussionScenario::execute(const TaskSpec& task, std::span<Agent* const> members,
                                            const RoundContext& ctx) const {
  const auto& globals = ctx.env.state().globals;
  const auto topic_it = globals.find("topic");
  const std::string topic = topic_it == globals.end() ? topic_ : topic_it->second;
  std::vector<TurnTrace> trace;
  auto t = run_agent_mode(members, topic, max_turns_, ctx.backend,
                          AgentModeContext{ctx.round, ctx.env.agent_view("")}, &trace);

  const std::uint64_t group = task.members.front();
  TaskResult result;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    ActionOutcome out;
    out.agent_id = members[i % members.size()]->id();
    out.turn = i;
    out.q = std::move(trace[i].prompt);
    out.a = std::move(trace[i].raw);
    out.latency = trace[i].latency;
    out.parsed = json{{"group", group}, {"turn", i}};
    if (i < t.turns.size()) {
      out.parsed["speaker"] = t.turns[i].speaker;
      out.parsed["content"] = t.turns[i].content;
    } else {
      out.error = t.error.value_or("turn failed");
      if (!out.error->ends_with("empty reply")) result.failed = true;
    }
    result.outcomes.push_back(std::move(out));
  }
  return result;
}

std::vector<MemoryUpdate> GroupDiscussionScenario::resolve(std::span<const ActionOutcome> outcomes, std::uint64_t) {
  // Turns were stored in memory while the discussion ran; here the
  // transcripts are rebuilt in group order for the environment.
  std::map<std::uint64_t, std::vector<const ActionOutcome*>> groups;
  for (const auto& o : outcomes) groups[o.parsed.at("group").get<std::uint64_t>()].push_back(&o);
  transcripts_.clear();
  for (auto& [g, turns] : groups) {
    std::sort(turns.begin(), turns.end(), [](auto* a, auto* b) { return a->turn < b->turn; });
    Transcript t;
    t.mode = InteractionMode::agent;
    for (const auto* o : turns) {
      if (o->error) {
        t.error = o->error;
        break;
      }
      t.turns.push_back(Turn{o->parsed.at("speaker").get<std::string>(), o->parsed.at("content").get<std::string>(),
                             o->turn});
    }
    t.llm_calls = t.turns.size();
    transcripts_.push_back(std::move(t));
  }
  return {};
}

json GroupDiscussionScenario::save_state() const {
  json ts = json::array();
  for (const auto& t : transcripts_) ts.push_back(t.to_json());
  return json{{"transcripts", ts}, {"topic", topic_}};
}

void GroupDiscussionScenario::load_state(const json& state) {
  transcripts_.clear();
  for (const auto& t : state.at("transcripts")) transcripts_.push_back(Transcript::from_json(t));
  topic_ = state.value("topic", topic_);
}

// ---- registry ----

std::vector<std::string> scenario_names() { return {"job_market", "recommender", "group_discussion"}; }

std::unique_ptr<Scenario> make_scenario(const std::string& name, const json& params) {
  if (!params.is_object()) throw ConfigError({"scenario_params: must be an object"});
  if (name == "job_market") return std::make_unique<JobMarketScenario>(params);
  if (name == "recommender") return std::make_unique<RecommenderScenario>(params);
  if (name == "group_discussion") return std::make_unique<GroupDiscussionScenario>(params);
  throw ConfigError({"scenario: unknown scenario '" + name + "' (expected job_market, recommender or group_discussion)"});
}

}  // namespace gensim
