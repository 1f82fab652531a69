#include "corrkit/correspondence.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>

namespace corrkit {

std::string FrameId::to_string() const { return video + ":" + std::to_string(index); }

FrameId FrameId::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error(ErrorCode::ParseError, "frame id must look like <video>:<index>");
  }
  FrameId id;
  id.video = std::string(text.substr(0, colon));
  const auto digits = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id.index);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || id.index < 0) {
    throw Error(ErrorCode::ParseError, "bad frame index in '" + std::string(text) + "'");
  }
  return id;
}

namespace {

// Uniform grid over 2D points; cell side slightly above the query radius so
// rounding in floor(x / cell) cannot separate two in-range points by more
// than one cell.
class GridIndex {
 public:
  explicit GridIndex(double radius)
      : cell_(radius > 0.0 ? radius * (1.0 + 1e-9) : 1.0) {}

  std::int64_t coord(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }

  static std::uint64_t key(std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx + (1LL << 31)) << 32) ^
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(cy + (1LL << 31)));
  }

  std::uint64_t key_of(const Vec2& p) const { return key(coord(p.x()), coord(p.y())); }

 private:
  double cell_;
};

struct Candidate {
  const Match* match;
  std::size_t order;  // position in the concatenated input
};

// Greedy duplicate suppression in priority order. Returns keep flags indexed
// by Candidate::order.
template <typename Less>
std::vector<bool> dedup(std::vector<Candidate> cands, double radius, Less less) {
  std::vector<bool> keep(cands.size(), false);
  std::stable_sort(cands.begin(), cands.end(), less);
  const GridIndex grid(radius);
  const double r2 = radius * radius;
  std::unordered_map<std::uint64_t, std::vector<const Match*>> accepted;
  for (const Candidate& c : cands) {
    const Vec2& pa = c.match->pa;
    const std::int64_t gx = grid.coord(pa.x());
    const std::int64_t gy = grid.coord(pa.y());
    bool duplicate = false;
    for (std::int64_t dx = -1; dx <= 1 && !duplicate; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && !duplicate; ++dy) {
        const auto it = accepted.find(GridIndex::key(gx + dx, gy + dy));
        if (it == accepted.end()) continue;
        for (const Match* m : it->second) {
          if ((m->pa - pa).squaredNorm() <= r2 && (m->pb - c.match->pb).squaredNorm() <= r2) {
            duplicate = true;
            break;
          }
        }
      }
    }
    if (!duplicate) {
      keep[c.order] = true;
      accepted[GridIndex::key(gx, gy)].push_back(c.match);
    }
  }
  return keep;
}

void check_same_pair(const CorrespondenceSet& a, const CorrespondenceSet& b) {
  if (a.frame_a != b.frame_a || a.frame_b != b.frame_b) {
    throw Error(ErrorCode::MismatchedPair, "sets cover different frame pairs: " +
                                               a.frame_a.to_string() + "/" + a.frame_b.to_string() +
                                               " vs " + b.frame_a.to_string() + "/" +
                                               b.frame_b.to_string());
  }
}

}  // namespace

CorrespondenceSet fuse(std::span<const CorrespondenceSet> sets, double dedup_radius,
                       std::span<const std::string> method_order) {
  if (sets.empty()) throw Error(ErrorCode::InvalidArgument, "fuse needs at least one set");
  if (!(dedup_radius >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative dedup radius");
  for (const auto& s : sets) check_same_pair(sets.front(), s);

  std::vector<Candidate> cands;
  for (const auto& s : sets) {
    for (const auto& m : s.matches) cands.push_back({&m, cands.size()});
  }
  auto rank_of = [&](const std::string& source) {
    const auto it = std::find(method_order.begin(), method_order.end(), source);
    return static_cast<std::size_t>(it - method_order.begin());
  };
  const auto keep = dedup(cands, dedup_radius, [&](const Candidate& x, const Candidate& y) {
    if (x.match->confidence != y.match->confidence) return x.match->confidence > y.match->confidence;
    const std::size_t rx = rank_of(x.match->source);
    const std::size_t ry = rank_of(y.match->source);
    if (rx != ry) return rx < ry;
    return x.order < y.order;
  });

  CorrespondenceSet out{sets.front().frame_a, sets.front().frame_b, {}};
  for (const auto& c : cands) {
    if (keep[c.order]) out.matches.push_back(*c.match);
  }
  return out;
}

CorrespondenceSet merge(const CorrespondenceSet& c1, const CorrespondenceSet& c2,
                        double dedup_radius) {
  check_same_pair(c1, c2);
  std::vector<Candidate> cands;
  for (const auto& m : c1.matches) cands.push_back({&m, cands.size()});
  for (const auto& m : c2.matches) cands.push_back({&m, cands.size()});
  const auto keep = dedup(cands, dedup_radius, [](const Candidate& x, const Candidate& y) {
    const bool px = x.match->source == kPropagatedSource;
    const bool py = y.match->source == kPropagatedSource;
    if (px != py) return !px;
    if (x.match->confidence != y.match->confidence) return x.match->confidence > y.match->confidence;
    return x.order < y.order;
  });
  CorrespondenceSet out{c1.frame_a, c1.frame_b, {}};
  for (const auto& c : cands) {
    if (keep[c.order]) out.matches.push_back(*c.match);
  }
  return out;
}

CorrespondenceSet propagate(const CorrespondenceSet& c_ab, const CorrespondenceSet& c_bc,
                            double pixel_threshold) {
  if (c_ab.frame_b != c_bc.frame_a) {
    throw Error(ErrorCode::ChainMismatch, "middle frames differ: " + c_ab.frame_b.to_string() +
                                              " vs " + c_bc.frame_a.to_string());
  }
  if (!(pixel_threshold >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative pixel threshold");

  const GridIndex grid(pixel_threshold);
  std::vector<std::pair<std::uint64_t, std::uint32_t>> cells;
  cells.reserve(c_bc.size());
  for (std::size_t k = 0; k < c_bc.size(); ++k) {
    cells.emplace_back(grid.key_of(c_bc.matches[k].pa), static_cast<std::uint32_t>(k));
  }
  std::sort(cells.begin(), cells.end());

  const double t2 = pixel_threshold * pixel_threshold;
  CorrespondenceSet out{c_ab.frame_a, c_bc.frame_b, {}};
  for (const Match& m : c_ab.matches) {
    const std::int64_t gx = grid.coord(m.pb.x());
    const std::int64_t gy = grid.coord(m.pb.y());
    std::size_t best = c_bc.size();
    double best_d2 = 0.0;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const std::uint64_t key = GridIndex::key(gx + dx, gy + dy);
        auto it = std::lower_bound(cells.begin(), cells.end(), std::make_pair(key, std::uint32_t{0}));
        for (; it != cells.end() && it->first == key; ++it) {
          const Vec2& mid = c_bc.matches[it->second].pa;
          const double ex = m.pb.x() - mid.x();
          const double ey = m.pb.y() - mid.y();
          const double d2 = ex * ex + ey * ey;
          if (!(d2 < t2 || d2 == 0.0)) continue;
          if (best == c_bc.size() || d2 < best_d2 || (d2 == best_d2 && it->second < best)) {
            best = it->second;
            best_d2 = d2;
          }
        }
      }
    }
    if (best == c_bc.size()) continue;
    const Match& next = c_bc.matches[best];
    out.matches.push_back(
        {m.pa, next.pb, std::min(m.confidence, next.confidence), std::string(kPropagatedSource)});
  }
  return out;
}

std::map<std::string, std::size_t> source_histogram(const CorrespondenceSet& c) {
  std::map<std::string, std::size_t> h;
  for (const auto& m : c.matches) ++h[m.source];
  return h;
}

}  // namespace corrkit
