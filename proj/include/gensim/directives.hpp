#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Structured lines that scenario prompts carry so that both real models and
// the mock backends know the expected reply shape. Each directive is a line
// beginning with its tag; the last such line in a prompt wins.
namespace gensim::directives {

/// "CHOICES: 3, 7, 12": reply with exactly one of the listed tokens.
inline constexpr std::string_view kChoices = "CHOICES:";
/// "RATE ITEMS: 12, 42": reply with one "<item>=<rating>" line per item.
inline constexpr std::string_view kRateItems = "RATE ITEMS:";
/// "DIALOGUE ROLES: Doctor, Teacher": reply with "<Role>: <line>" lines.
inline constexpr std::string_view kDialogueRoles = "DIALOGUE ROLES:";
/// "TURNS: 4": number of dialogue lines wanted.
inline constexpr std::string_view kTurns = "TURNS:";
/// "SPEAKER: Alice": reply with the next line spoken by Alice.
inline constexpr std::string_view kSpeaker = "SPEAKER:";
/// "JUDGE: score" or "JUDGE: revise".
inline constexpr std::string_view kJudge = "JUDGE:";

std::optional<std::string> find_value(std::string_view prompt, std::string_view tag);
std::optional<std::vector<std::string>> find_list(std::string_view prompt, std::string_view tag);

std::string choices_line(const std::vector<std::string>& choices);
std::string rate_items_line(const std::vector<std::string>& items);

/// First integer literal in `text`, if any.
std::optional<long long> first_integer(std::string_view text);

/// True iff `action` answers the prompt's CHOICES or RATE ITEMS directive in
/// the required shape. Prompts without either directive accept any non-empty
/// action.
bool action_follows_directives(std::string_view prompt, std::string_view action);

/// A reply that satisfies the prompt's directive (first choice, mid-scale
/// ratings), or nullopt if the prompt has none.
std::optional<std::string> canonical_action(std::string_view prompt);

}  // namespace gensim::directives
