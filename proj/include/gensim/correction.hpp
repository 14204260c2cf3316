#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gensim/llm.hpp"
#include "gensim/simulation.hpp"
#include "gensim/text.hpp"

namespace gensim {

enum class FeedbackSource { judge, human };

const char* to_string(FeedbackSource source);
FeedbackSource feedback_source_from_string(std::string_view s);

inline constexpr double kMinScore = 0.0;
inline constexpr double kMaxScore = 10.0;

struct ScoreFeedback {
  std::uint64_t event_seq = 0;
  std::string q;
  std::string a;
  double s = 0.0;
  FeedbackSource source = FeedbackSource::judge;

  nlohmann::json to_json() const;
};

struct RevisionFeedback {
  std::uint64_t event_seq = 0;
  std::string q;
  std::string a_prime;
  FeedbackSource source = FeedbackSource::judge;

  nlohmann::json to_json() const;
};

/// Append-only, safe from any thread.
class FeedbackStore {
 public:
  /// Throws ValidationError unless s is in [0, 10].
  void add_score(ScoreFeedback feedback);
  /// Throws ValidationError for an empty a′ and ConflictError when a′ equals
  /// the original action.
  void add_revision(RevisionFeedback feedback, std::string_view original_a);

  std::vector<ScoreFeedback> scores() const;
  std::vector<RevisionFeedback> revisions() const;
  std::size_t score_count() const;
  std::size_t revision_count() const;

 private:
  mutable std::mutex mutex_;
  std::vector<ScoreFeedback> scores_;
  std::vector<RevisionFeedback> revisions_;
};

enum class JudgeMode { score, revise };

const char* to_string(JudgeMode mode);

/// Judge prompt. The rubric's {q} and {a} placeholders receive the event's
/// prompt and action; any other text is kept as written.
struct JudgeConfig {
  std::string rubric = default_rubric();
  JudgeMode mode = JudgeMode::score;

  static std::string default_rubric();
  /// Throws ValidationError unless the rubric has both placeholders.
  void validate() const;
  /// Fills the rubric and appends the mode's task and directive line.
  std::string render(std::string_view q, std::string_view a) const;
};

/// First number in [0, 10] in the reply, if any.
std::optional<double> parse_score(std::string_view reply);

/// One judge call; the parsed score is stored. Throws FormatError when the
/// reply has no score (nothing stored).
ScoreFeedback judge_score(const ActionEvent& event, const JudgeConfig& judge, Backend& backend,
                          FeedbackStore* store = nullptr);
/// One judge call; the trimmed reply becomes a′. Throws ConflictError when a′
/// repeats the original action (nothing stored).
RevisionFeedback judge_revise(const ActionEvent& event, const JudgeConfig& judge, Backend& backend,
                              FeedbackStore* store = nullptr);

/// Rule-based judge and reviser: reads the embedded prompt and action back out
/// of a rendered rubric. Scores actions that follow the prompt's directives 10,
/// everything else 0; revisions are the canonical valid action.
class OracleJudge final : public Backend {
 public:
  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "oracle-judge"; }

  std::uint64_t calls() const noexcept { return calls_.load(); }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

/// Both return the number of lines written; records are in event_seq order.
/// Throws ValidationError for an empty set.
std::size_t export_sft_dataset(std::span<const RevisionFeedback> revisions, const std::filesystem::path& path);
std::size_t export_reward_dataset(std::span<const ScoreFeedback> scores, const std::filesystem::path& path);

struct SftRecord {
  std::string prompt;
  std::string completion;
  bool operator==(const SftRecord&) const = default;
};

struct RewardRecord {
  std::string prompt;
  std::string completion;
  double score = 0.0;
  FeedbackSource source = FeedbackSource::judge;
  bool operator==(const RewardRecord&) const = default;
};

enum class DatasetKind { sft, reward };

DatasetKind dataset_kind_from_string(std::string_view s);

/// Per-line schema problems ("line N: ..."); empty when the file is valid.
std::vector<std::string> validate_dataset(const std::filesystem::path& path, DatasetKind kind);
std::vector<SftRecord> read_sft_dataset(const std::filesystem::path& path);
std::vector<RewardRecord> read_reward_dataset(const std::filesystem::path& path);

/// Answers prompts lexically close to a revised prompt with the stored
/// revision instead of asking the wrapped backend. The closest stored prompt
/// by token Jaccard wins, ties to the earliest event; below the threshold the
/// request is delegated. Immutable after construction.
class RevisionReplayAdapter final : public Backend {
 public:
  RevisionReplayAdapter(std::shared_ptr<Backend> inner, std::vector<RevisionFeedback> revisions,
                        double threshold = 0.8);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override;

  /// Stored revision chosen for a prompt, if any.
  std::optional<std::string> lookup(std::string_view prompt) const;

  std::size_t size() const noexcept { return entries_.size(); }
  double threshold() const noexcept { return threshold_; }
  std::uint64_t hits() const noexcept { return hits_.load(); }
  std::uint64_t delegated() const noexcept { return delegated_.load(); }

 private:
  struct Entry {
    std::uint64_t seq;
    text::TokenSet tokens;
    std::string a_prime;
  };

  std::shared_ptr<Backend> inner_;
  std::vector<Entry> entries_;
  std::unordered_map<std::uint64_t, std::size_t> by_tokens_;
  double threshold_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> delegated_{0};
};

/// POSTs {"dataset_path", "method"} to {endpoint}/finetune and returns the
/// job id without waiting for training. TransportError if unreachable,
/// ProtocolError for a bad status or reply.
std::string trigger_external_finetune(const std::filesystem::path& dataset_path, const std::string& endpoint_url,
                                      const std::string& method = "sft");

struct RoundScore {
  std::uint64_t round = 0;
  double mean = 0.0;
  std::size_t judged = 0;
  /// Judge replies without a score; excluded from the mean.
  std::size_t unparsed = 0;

  nlohmann::json to_json() const;
};

struct EvaluateOptions {
  /// Events judged per round; rounds with fewer are judged in full.
  std::size_t sample = 100;
  std::uint64_t seed = 0;
  std::size_t lanes = 1;
};

/// Mean judge score per round, in round order. Judgments are added to
/// `store` when given.
std::vector<RoundScore> evaluate_rounds(std::span<const ActionEvent> events, const JudgeConfig& judge,
                                        Backend& backend, const EvaluateOptions& options = {},
                                        FeedbackStore* store = nullptr);

/// Re-asks every event's prompt through `backend`, keeping seq and round.
std::vector<ActionEvent> replay_events(std::span<const ActionEvent> events, Backend& backend, std::size_t lanes = 1);

struct CorrectionOptions {
  /// Events scoring below this are sent for revision.
  double revise_below = 5.0;
  /// Install the adapter after each round; false gives the uncorrected baseline.
  bool adapt = true;
  double similarity_threshold = 0.8;
  EvaluateOptions evaluate;
};

/// Runs rounds of judge -> revise -> adapt on a simulation: each round is
/// simulated, its events judged, low scorers revised, and a replay adapter
/// over all revisions so far put in front of the gateway for the next round.
std::vector<RoundScore> run_correction_loop(Simulation& sim, Backend& judge, Backend& reviser, std::uint64_t rounds,
                                            const CorrectionOptions& options, FeedbackStore& store);

}  // namespace gensim
