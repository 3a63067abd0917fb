#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>

#include "dot/points.hpp"

namespace dot {

/// Identifies one video frame: sequence name plus frame number.
struct FrameKey {
  std::string sequence;
  std::int64_t frame = 0;

  auto operator<=>(const FrameKey&) const = default;
  std::string str() const { return sequence + ":" + std::to_string(frame); }
};

using LabelMap = std::map<FrameKey, PointSet>;
using PredictionMap = std::map<FrameKey, ScoredPoints>;

}  // namespace dot
