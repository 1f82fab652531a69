#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corrkit/geometry.hpp"

namespace corrkit {

inline constexpr std::string_view kPropagatedSource = "propagated";

struct FrameId {
  std::string video;
  int index = 0;

  auto operator<=>(const FrameId&) const = default;
  bool operator==(const FrameId&) const = default;

  // "<video>:<index>"
  std::string to_string() const;
  static FrameId parse(std::string_view text);
};

// One correspondence between frame A and frame B, sub-pixel coordinates.
struct Match {
  Vec2 pa = Vec2::Zero();
  Vec2 pb = Vec2::Zero();
  double confidence = 1.0;
  std::string source;
};

// Sparse correspondence set between two frames, frame_a < frame_b.
struct CorrespondenceSet {
  FrameId frame_a;
  FrameId frame_b;
  std::vector<Match> matches;

  std::size_t size() const { return matches.size(); }
  bool empty() const { return matches.empty(); }
  int interval() const { return frame_b.index - frame_a.index; }
};

// Union of sets over the same pair with duplicate removal. Two matches are
// duplicates when both endpoints lie within dedup_radius. Among duplicates the
// highest confidence wins, ties go to the source listed first in
// method_order (unlisted sources rank after listed ones), then input order.
// Surviving matches keep their input order.
CorrespondenceSet fuse(std::span<const CorrespondenceSet> sets, double dedup_radius = 1.0,
                       std::span<const std::string> method_order = {});

// fuse semantics, but non-propagated matches win over propagated duplicates.
CorrespondenceSet merge(const CorrespondenceSet& c1, const CorrespondenceSet& c2,
                        double dedup_radius = 1.0);

// Composes A->B with B->C through middle points closer than pixel_threshold
// (exactly coincident points always qualify). Each A->B match links to its
// nearest qualifying middle point, lowest index on ties.
CorrespondenceSet propagate(const CorrespondenceSet& c_ab, const CorrespondenceSet& c_bc,
                            double pixel_threshold = 1.0);

// Strictly more than min_count matches.
inline bool meets_budget(const CorrespondenceSet& c, std::size_t min_count = 1024) {
  return c.size() > min_count;
}

std::map<std::string, std::size_t> source_histogram(const CorrespondenceSet& c);

}  // namespace corrkit
