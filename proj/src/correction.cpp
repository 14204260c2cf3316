#include "gensim/correction.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include <httplib.h>

#include "gensim/directives.hpp"
#include "gensim/error.hpp"
#include "gensim/parallel.hpp"
#include "gensim/rng.hpp"

namespace gensim {

using nlohmann::json;

const char* to_string(FeedbackSource source) { return source == FeedbackSource::judge ? "judge" : "human"; }

FeedbackSource feedback_source_from_string(std::string_view s) {
  if (s == "judge") return FeedbackSource::judge;
  if (s == "human") return FeedbackSource::human;
  throw ValidationError("unknown feedback source '" + std::string(s) + "'");
}

const char* to_string(JudgeMode mode) { return mode == JudgeMode::score ? "score" : "revise"; }

json ScoreFeedback::to_json() const {
  return json{{"event_seq", event_seq}, {"q", q}, {"a", a}, {"s", s}, {"source", to_string(source)}};
}

json RevisionFeedback::to_json() const {
  return json{{"event_seq", event_seq}, {"q", q}, {"a_prime", a_prime}, {"source", to_string(source)}};
}

// ---- store ----

void FeedbackStore::add_score(ScoreFeedback feedback) {
  if (!(feedback.s >= kMinScore && feedback.s <= kMaxScore)) throw ValidationError("score must be in [0, 10]");
  std::lock_guard lock(mutex_);
  scores_.push_back(std::move(feedback));
}

void FeedbackStore::add_revision(RevisionFeedback feedback, std::string_view original_a) {
  if (text::trim(feedback.a_prime).empty()) throw ValidationError("revision must not be empty");
  if (feedback.a_prime == original_a) throw ConflictError("revision is identical to the original action");
  std::lock_guard lock(mutex_);
  revisions_.push_back(std::move(feedback));
}

std::vector<ScoreFeedback> FeedbackStore::scores() const {
  std::lock_guard lock(mutex_);
  return scores_;
}

std::vector<RevisionFeedback> FeedbackStore::revisions() const {
  std::lock_guard lock(mutex_);
  return revisions_;
}

std::size_t FeedbackStore::score_count() const {
  std::lock_guard lock(mutex_);
  return scores_.size();
}

std::size_t FeedbackStore::revision_count() const {
  std::lock_guard lock(mutex_);
  return revisions_.size();
}

// ---- judge ----

std::string JudgeConfig::default_rubric() {
  return "You are reviewing one step of a social simulation.\n"
         "The agent was given this prompt:\n<prompt>\n{q}\n</prompt>\n"
         "The agent answered:\n<action>\n{a}\n</action>";
}

void JudgeConfig::validate() const {
  if (rubric.find("{q}") == std::string::npos || rubric.find("{a}") == std::string::npos)
    throw ValidationError("judge rubric must contain {q} and {a}");
}

std::string JudgeConfig::render(std::string_view q, std::string_view a) const {
  validate();
  std::string out;
  out.reserve(rubric.size() + q.size() + a.size() + 200);
  for (std::size_t i = 0; i < rubric.size(); ++i) {
    if (rubric.compare(i, 3, "{q}") == 0) {
      out += q;
      i += 2;
    } else if (rubric.compare(i, 3, "{a}") == 0) {
      out += a;
      i += 2;
    } else {
      out += rubric[i];
    }
  }
  if (mode == JudgeMode::score) {
    out += "\nRate how reasonable the answer is for this person and situation, from 0 (nonsense) to 10 "
           "(fully reasonable and in the requested format). Reply as \"Score: <number>\".\n";
  } else {
    out += "\nRewrite the answer so it is reasonable for this person and follows the requested format. "
           "Reply with the revised answer only.\n";
  }
  out += directives::kJudge;
  out += ' ';
  out += to_string(mode);
  return out;
}

std::optional<double> parse_score(std::string_view reply) {
  std::size_t i = 0;
  while (i < reply.size()) {
    if (!std::isdigit(static_cast<unsigned char>(reply[i]))) {
      ++i;
      continue;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(reply.data() + i, reply.data() + reply.size(), value);
    const auto next = static_cast<std::size_t>(ptr - reply.data());
    const bool negative = i > 0 && reply[i - 1] == '-';
    if (ec == std::errc() && !negative && value >= kMinScore && value <= kMaxScore) return value;
    i = std::max(next, i + 1);
  }
  return std::nullopt;
}

ScoreFeedback judge_score(const ActionEvent& event, const JudgeConfig& judge, Backend& backend,
                          FeedbackStore* store) {
  if (judge.mode != JudgeMode::score) throw ValidationError("judge_score needs a judge in score mode");
  const auto reply = backend.complete(ChatRequest::from_prompt(judge.render(event.q, event.a)));
  const auto s = parse_score(reply.content);
  if (!s) throw FormatError("judge reply has no score in [0, 10]", reply.content);
  ScoreFeedback f{event.seq, event.q, event.a, *s, FeedbackSource::judge};
  if (store) store->add_score(f);
  return f;
}

RevisionFeedback judge_revise(const ActionEvent& event, const JudgeConfig& judge, Backend& backend,
                              FeedbackStore* store) {
  if (judge.mode != JudgeMode::revise) throw ValidationError("judge_revise needs a judge in revise mode");
  const auto reply = backend.complete(ChatRequest::from_prompt(judge.render(event.q, event.a)));
  RevisionFeedback f{event.seq, event.q, std::string(text::trim(reply.content)), FeedbackSource::judge};
  if (f.a_prime.empty()) throw FormatError("judge returned an empty revision", reply.content);
  if (f.a_prime == event.a) throw ConflictError("revision is identical to the original action");
  if (store) store->add_revision(f, event.a);
  return f;
}

namespace {

// Text between "<tag>\n" and the last "\n</tag>" at or after `from`.
std::optional<std::string_view> block(std::string_view s, std::string_view tag, std::size_t from,
                                      std::size_t* end = nullptr) {
  const std::string open = "<" + std::string(tag) + ">\n";
  const std::string close = "\n</" + std::string(tag) + ">";
  const auto o = s.find(open, from);
  if (o == std::string_view::npos) return std::nullopt;
  const auto start = o + open.size();
  // The closing tag may sit right after the opening one when the body is empty.
  const auto c = s.rfind(close);
  if (c == std::string_view::npos || c + 1 < start) return std::nullopt;
  if (end) *end = c + close.size();
  return c < start ? std::string_view() : s.substr(start, c - start);
}

}  // namespace

ChatResponse OracleJudge::complete(const ChatRequest& request) {
  ++calls_;
  const auto prompt = request.prompt_text();
  const auto mode = directives::find_value(prompt, directives::kJudge);
  if (!mode) throw BackendError("oracle judge: prompt has no judge directive", false, id());

  // The action block follows the prompt block; find the prompt's close before
  // the action's open so a prompt quoting tags cannot confuse the split.
  const auto action_open = prompt.rfind("<action>\n");
  if (action_open == std::string::npos) throw BackendError("oracle judge: no action block", false, id());
  std::string_view view(prompt);
  const auto q = block(view.substr(0, action_open), "prompt", 0);
  const auto a = block(view, "action", action_open);
  if (!q || !a) throw BackendError("oracle judge: malformed rubric", false, id());

  ChatResponse r;
  r.backend_id = id();
  if (*mode == "revise") {
    r.content = directives::canonical_action(*q).value_or(std::string(text::trim(*a)) + " (revised)");
  } else {
    r.content = directives::action_follows_directives(*q, *a) ? "Score: 10" : "Score: 0";
  }
  r.token_estimate = estimate_tokens(r.content);
  return r;
}

// ---- datasets ----

namespace {

void write_lines_atomically(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << body;
    if (!out) throw IoError("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

template <class T>
std::vector<const T*> by_seq(std::span<const T> items) {
  std::vector<const T*> out;
  for (const auto& i : items) out.push_back(&i);
  std::stable_sort(out.begin(), out.end(), [](auto* x, auto* y) { return x->event_seq < y->event_seq; });
  return out;
}

}  // namespace

std::size_t export_sft_dataset(std::span<const RevisionFeedback> revisions, const std::filesystem::path& path) {
  if (revisions.empty()) throw ValidationError("no revisions to export");
  std::string body;
  for (const auto* r : by_seq(revisions)) {
    nlohmann::ordered_json j;
    j["prompt"] = r->q;
    j["completion"] = r->a_prime;
    body += j.dump() + "\n";
  }
  write_lines_atomically(path, body);
  return revisions.size();
}

std::size_t export_reward_dataset(std::span<const ScoreFeedback> scores, const std::filesystem::path& path) {
  if (scores.empty()) throw ValidationError("no scores to export");
  std::string body;
  for (const auto* s : by_seq(scores)) {
    nlohmann::ordered_json j;
    j["prompt"] = s->q;
    j["completion"] = s->a;
    j["score"] = s->s;
    j["source"] = to_string(s->source);
    body += j.dump() + "\n";
  }
  write_lines_atomically(path, body);
  return scores.size();
}

DatasetKind dataset_kind_from_string(std::string_view s) {
  if (s == "sft") return DatasetKind::sft;
  if (s == "reward") return DatasetKind::reward;
  throw ValidationError("unknown dataset kind '" + std::string(s) + "' (expected sft or reward)");
}

namespace {

std::vector<std::string> record_problems(const json& j, DatasetKind kind) {
  std::vector<std::string> out;
  if (!j.is_object()) return {"record is not an object"};
  std::vector<std::string> allowed{"prompt", "completion"};
  if (kind == DatasetKind::reward) {
    allowed.push_back("score");
    allowed.push_back("source");
  }
  for (const auto& key : allowed)
    if (!j.contains(key)) out.push_back("missing \"" + key + "\"");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) out.push_back("unexpected \"" + key + "\"");
  if (j.contains("prompt") && !j["prompt"].is_string()) out.push_back("\"prompt\" must be a string");
  if (j.contains("completion") && !j["completion"].is_string()) out.push_back("\"completion\" must be a string");
  if (kind == DatasetKind::sft && j.contains("completion") && j["completion"].is_string() &&
      j["completion"].get<std::string>().empty())
    out.push_back("\"completion\" must not be empty");
  if (kind == DatasetKind::reward) {
    if (j.contains("score") &&
        (!j["score"].is_number() || j["score"].get<double>() < kMinScore || j["score"].get<double>() > kMaxScore))
      out.push_back("\"score\" must be a number in [0, 10]");
    if (j.contains("source") &&
        (!j["source"].is_string() || (j["source"] != "judge" && j["source"] != "human")))
      out.push_back("\"source\" must be \"judge\" or \"human\"");
  }
  return out;
}

template <class F>
void for_each_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) f(++n, line);
}

}  // namespace

std::vector<std::string> validate_dataset(const std::filesystem::path& path, DatasetKind kind) {
  std::vector<std::string> problems;
  std::size_t records = 0;
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      problems.push_back("line " + std::to_string(n) + ": not valid JSON");
      return;
    }
    ++records;
    for (auto& p : record_problems(j, kind)) problems.push_back("line " + std::to_string(n) + ": " + p);
  });
  if (records == 0 && problems.empty()) problems.push_back("dataset has no records");
  return problems;
}

std::vector<SftRecord> read_sft_dataset(const std::filesystem::path& path) {
  std::vector<SftRecord> out;
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("prompt").get<std::string>(), j.at("completion").get<std::string>()});
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what(), line);
    }
  });
  return out;
}

std::vector<RewardRecord> read_reward_dataset(const std::filesystem::path& path) {
  std::vector<RewardRecord> out;
  for_each_line(path, [&](std::size_t n, const std::string& line) {
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("prompt").get<std::string>(), j.at("completion").get<std::string>(),
                     j.at("score").get<double>(), feedback_source_from_string(j.at("source").get<std::string>())});
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what(), line);
    }
  });
  return out;
}

// ---- adapter ----

namespace {

std::uint64_t tokens_key(const text::TokenSet& t) {
  const auto& v = t.tokens();
  return text::fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(std::uint64_t)));
}

}  // namespace

RevisionReplayAdapter::RevisionReplayAdapter(std::shared_ptr<Backend> inner, std::vector<RevisionFeedback> revisions,
                                             double threshold)
    : inner_(std::move(inner)), threshold_(threshold) {
  if (!inner_) throw ValidationError("adapter needs a backend to wrap");
  if (!(threshold_ > 0.0 && threshold_ <= 1.0)) throw ValidationError("adapter threshold must be in (0, 1]");
  std::stable_sort(revisions.begin(), revisions.end(),
                   [](const auto& a, const auto& b) { return a.event_seq < b.event_seq; });
  entries_.reserve(revisions.size());
  for (auto& r : revisions) {
    entries_.push_back(Entry{r.event_seq, text::TokenSet(r.q), std::move(r.a_prime)});
    by_tokens_.emplace(tokens_key(entries_.back().tokens), entries_.size() - 1);
  }
}

std::string RevisionReplayAdapter::id() const { return "replay(" + inner_->id() + ")"; }

std::optional<std::string> RevisionReplayAdapter::lookup(std::string_view prompt) const {
  if (entries_.empty()) return std::nullopt;
  const text::TokenSet query(prompt);
  // An identical token set is similarity 1; emplace kept the earliest entry.
  if (auto it = by_tokens_.find(tokens_key(query));
      it != by_tokens_.end() && entries_[it->second].tokens.tokens() == query.tokens())
    return entries_[it->second].a_prime;

  double best = -1.0;
  const Entry* winner = nullptr;
  const double qs = static_cast<double>(query.size());
  for (const auto& e : entries_) {
    // Jaccard is at most min/max of the set sizes.
    const double es = static_cast<double>(e.tokens.size());
    const double bound = std::max(qs, es) == 0.0 ? 1.0 : std::min(qs, es) / std::max(qs, es);
    if (bound < threshold_ || bound <= best) continue;
    const double sim = text::jaccard(query, e.tokens);
    if (sim >= threshold_ && sim > best) {
      best = sim;
      winner = &e;
    }
  }
  if (!winner) return std::nullopt;
  return winner->a_prime;
}

ChatResponse RevisionReplayAdapter::complete(const ChatRequest& request) {
  if (auto hit = lookup(request.prompt_text())) {
    ++hits_;
    ChatResponse r;
    r.content = std::move(*hit);
    r.backend_id = id();
    r.token_estimate = estimate_tokens(r.content);
    return r;
  }
  ++delegated_;
  return inner_->complete(request);
}

// ---- training hook ----

std::string trigger_external_finetune(const std::filesystem::path& dataset_path, const std::string& endpoint_url,
                                      const std::string& method) {
  if (method != "sft" && method != "ppo") throw ValidationError("finetune method must be sft or ppo");
  const auto scheme_end = endpoint_url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("finetune endpoint must be an http(s) URL");
  const auto path_start = endpoint_url.find('/', scheme_end + 3);
  const std::string host = endpoint_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : endpoint_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client client(host);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(std::chrono::seconds(30));
  const json body{{"dataset_path", std::filesystem::absolute(dataset_path).string()}, {"method", method}};
  auto res = client.Post(prefix + "/finetune", body.dump(), "application/json");
  if (!res) throw TransportError("finetune endpoint " + endpoint_url + " unreachable: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw ProtocolError("finetune endpoint returned HTTP " + std::to_string(res->status));
  try {
    const auto j = json::parse(res->body);
    const auto& id = j.at("job_id");
    if (id.is_string() && !id.get<std::string>().empty()) return id.get<std::string>();
    if (id.is_number_integer()) return std::to_string(id.get<std::int64_t>());
  } catch (const json::exception&) {
  }
  throw ProtocolError("finetune endpoint reply has no job_id");
}

// ---- evaluation ----

json RoundScore::to_json() const {
  return json{{"round", round}, {"mean", mean}, {"judged", judged}, {"unparsed", unparsed}};
}

std::vector<RoundScore> evaluate_rounds(std::span<const ActionEvent> events, const JudgeConfig& judge,
                                        Backend& backend, const EvaluateOptions& options, FeedbackStore* store) {
  std::map<std::uint64_t, std::vector<const ActionEvent*>> rounds;
  for (const auto& e : events) rounds[e.round].push_back(&e);

  std::vector<RoundScore> out;
  for (auto& [round, items] : rounds) {
    std::sort(items.begin(), items.end(), [](auto* a, auto* b) { return a->seq < b->seq; });
    if (options.sample < items.size()) {
      KeyedRng rng({options.seed, round, 0x5a3b});
      for (std::size_t i = 0; i < options.sample; ++i) std::swap(items[i], items[i + rng.below(items.size() - i)]);
      items.resize(options.sample);
      std::sort(items.begin(), items.end(), [](auto* a, auto* b) { return a->seq < b->seq; });
    }
    std::vector<std::optional<ScoreFeedback>> scored(items.size());
    parallel_for(items.size(), options.lanes, [&](std::size_t i) {
      try {
        scored[i] = judge_score(*items[i], judge, backend);
      } catch (const FormatError&) {
      }
    });
    RoundScore rs;
    rs.round = round;
    double sum = 0.0;
    for (auto& s : scored) {
      if (!s) {
        ++rs.unparsed;
        continue;
      }
      ++rs.judged;
      sum += s->s;
      if (store) store->add_score(*s);
    }
    rs.mean = rs.judged ? sum / static_cast<double>(rs.judged) : 0.0;
    out.push_back(rs);
  }
  return out;
}

std::vector<ActionEvent> replay_events(std::span<const ActionEvent> events, Backend& backend, std::size_t lanes) {
  std::vector<ActionEvent> out(events.begin(), events.end());
  parallel_for(out.size(), lanes, [&](std::size_t i) {
    try {
      auto r = backend.complete(ChatRequest::from_prompt(out[i].q));
      out[i].a = std::move(r.content);
      out[i].latency_ms = r.latency.count();
      out[i].error.reset();
    } catch (const std::exception& e) {
      out[i].a.clear();
      out[i].error = e.what();
    }
  });
  return out;
}

std::vector<RoundScore> run_correction_loop(Simulation& sim, Backend& judge, Backend& reviser, std::uint64_t rounds,
                                            const CorrectionOptions& options, FeedbackStore& store) {
  const JudgeConfig scorer{JudgeConfig::default_rubric(), JudgeMode::score};
  const JudgeConfig revisor{JudgeConfig::default_rubric(), JudgeMode::revise};
  const auto gateway = sim.gateway_shared();
  std::vector<RoundScore> series;
  for (std::uint64_t r = 0; r < rounds; ++r) {
    const auto first = sim.events().next_seq();
    const auto report = sim.run_round();
    if (report.aborted) throw BackendError("round " + std::to_string(report.round) + " aborted", false, "simulation");
    auto events = sim.events().since(first - 1);
    std::erase_if(events, [](const ActionEvent& e) { return e.error.has_value(); });

    FeedbackStore round_scores;
    auto scores = evaluate_rounds(events, scorer, judge, options.evaluate, &round_scores);
    series.push_back(scores.empty() ? RoundScore{report.round, 0.0, 0, 0} : scores.front());

    std::map<std::uint64_t, const ActionEvent*> by_seq;
    for (const auto& e : events) by_seq[e.seq] = &e;
    std::vector<const ActionEvent*> to_revise;
    for (auto& s : round_scores.scores()) {
      store.add_score(s);
      if (s.s < options.revise_below) to_revise.push_back(by_seq.at(s.event_seq));
    }
    std::vector<std::optional<RevisionFeedback>> revised(to_revise.size());
    parallel_for(to_revise.size(), options.evaluate.lanes, [&](std::size_t i) {
      try {
        revised[i] = judge_revise(*to_revise[i], revisor, reviser);
      } catch (const Error&) {
        // A reviser that cannot improve the action leaves it out.
      }
    });
    for (std::size_t i = 0; i < revised.size(); ++i)
      if (revised[i]) store.add_revision(*revised[i], to_revise[i]->a);

    if (options.adapt)
      sim.set_backend(
          std::make_shared<RevisionReplayAdapter>(gateway, store.revisions(), options.similarity_threshold));
  }
  return series;
}

}  // namespace gensim
