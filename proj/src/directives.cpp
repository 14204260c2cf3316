#include "gensim/directives.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "gensim/text.hpp"

namespace gensim::directives {

std::optional<std::string> find_value(std::string_view prompt, std::string_view tag) {
  std::optional<std::string> found;
  for (auto line : text::split_lines(prompt)) {
    auto t = text::trim(line);
    if (t.size() >= tag.size() && t.substr(0, tag.size()) == tag) {
      found = std::string(text::trim(t.substr(tag.size())));
    }
  }
  return found;
}

std::optional<std::vector<std::string>> find_list(std::string_view prompt, std::string_view tag) {
  auto value = find_value(prompt, tag);
  if (!value) return std::nullopt;
  std::vector<std::string> out;
  for (auto& item : text::split(*value, ',')) {
    auto t = text::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

namespace {

std::string list_line(std::string_view tag, const std::vector<std::string>& items) {
  std::string out(tag);
  out += ' ';
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

}  // namespace

std::string choices_line(const std::vector<std::string>& choices) { return list_line(kChoices, choices); }

std::string rate_items_line(const std::vector<std::string>& items) { return list_line(kRateItems, items); }

std::optional<long long> first_integer(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) continue;
    std::size_t start = i;
    if (i > 0 && s[i - 1] == '-') start = i - 1;
    long long value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + start, s.data() + s.size(), value);
    if (ec == std::errc()) return value;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  }
  return std::nullopt;
}

namespace {

// "<item> = <number>" on one line; returns the parsed pairs in order.
std::vector<std::pair<std::string, double>> rating_lines(std::string_view action) {
  std::vector<std::pair<std::string, double>> out;
  for (auto line : text::split_lines(action)) {
    auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    auto key = text::trim(line.substr(0, eq));
    auto val = text::trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) continue;
    double rating = 0.0;
    auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), rating);
    if (ec != std::errc() || !std::isfinite(rating)) continue;
    out.emplace_back(std::string(key), rating);
  }
  return out;
}

}  // namespace

bool action_follows_directives(std::string_view prompt, std::string_view action) {
  if (auto items = find_list(prompt, kRateItems)) {
    auto pairs = rating_lines(action);
    for (const auto& item : *items) {
      auto hit = std::find_if(pairs.begin(), pairs.end(), [&](const auto& p) { return p.first == item; });
      if (hit == pairs.end()) return false;
    }
    return true;
  }
  if (auto choices = find_list(prompt, kChoices)) {
    const auto trimmed = text::to_lower(text::trim(action));
    for (const auto& c : *choices) {
      if (text::to_lower(c) == trimmed) return true;
    }
    if (auto n = first_integer(action)) {
      const auto s = std::to_string(*n);
      return std::find(choices->begin(), choices->end(), s) != choices->end();
    }
    return false;
  }
  return !text::trim(action).empty();
}

std::optional<std::string> canonical_action(std::string_view prompt) {
  if (auto items = find_list(prompt, kRateItems)) {
    std::string out;
    for (const auto& item : *items) {
      if (!out.empty()) out += '\n';
      out += item + "=3.0";
    }
    return out;
  }
  if (auto choices = find_list(prompt, kChoices); choices && !choices->empty()) {
    return choices->front();
  }
  return std::nullopt;
}

}  // namespace gensim::directives
