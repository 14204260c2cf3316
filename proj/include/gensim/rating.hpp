#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>

namespace gensim {

/// The rating scale 0.5, 1.0, ..., 5.0, ascending.
inline constexpr std::size_t kRatingCount = 10;
inline constexpr std::array<double, kRatingCount> kRatingScale = {0.5, 1.0, 1.5, 2.0, 2.5,
                                                                  3.0, 3.5, 4.0, 4.5, 5.0};

/// Nearest scale member, ties rounding up; values outside the scale clamp to its ends.
inline double clamp_rating(double value) {
  if (std::isnan(value)) return kRatingScale.front();
  const double snapped = std::floor(value * 2.0 + 0.5) / 2.0;
  if (snapped < kRatingScale.front()) return kRatingScale.front();
  if (snapped > kRatingScale.back()) return kRatingScale.back();
  return snapped;
}

inline std::optional<std::size_t> rating_index(double rating) {
  for (std::size_t i = 0; i < kRatingCount; ++i) {
    if (kRatingScale[i] == rating) return i;
  }
  return std::nullopt;
}

}  // namespace gensim
