#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gensim::text {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(std::span<const std::string> parts, std::string_view sep);

bool contains_icase(std::string_view haystack, std::string_view needle);

/// Lowercase alphanumeric word set, stored as sorted unique 64-bit hashes.
class TokenSet {
 public:
  TokenSet() = default;
  explicit TokenSet(std::string_view s);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::vector<std::uint64_t>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::uint64_t> tokens_;
};

/// |A∩B| / |A∪B|. Two empty sets are identical (1.0).
double jaccard(const TokenSet& a, const TokenSet& b);
double jaccard(std::string_view a, std::string_view b);

/// Lowercase alphanumeric words in order of appearance (duplicates kept).
std::vector<std::string> words(std::string_view s);

}  // namespace gensim::text
