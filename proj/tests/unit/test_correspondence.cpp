#include <gtest/gtest.h>

#include <algorithm>

#include "corrkit/correspondence.hpp"
#include "scenes.hpp"

using namespace corrkit;
using namespace corrkit::testing;

namespace {

const FrameId kA{"v", 0};
const FrameId kB{"v", 20};
const FrameId kC{"v", 40};

CorrespondenceSet one(const FrameId& a, const FrameId& b, Vec2 pa, Vec2 pb, double conf = 1.0,
                      std::string src = "m") {
  return {a, b, {{pa, pb, conf, std::move(src)}}};
}

}  // namespace

TEST(FrameIdTest, FormatAndParse) {
  EXPECT_EQ((FrameId{"clip:7", 40}).to_string(), "clip:7:40");
  const FrameId p = FrameId::parse("clip:7:40");
  EXPECT_EQ(p.video, "clip:7");
  EXPECT_EQ(p.index, 40);
  EXPECT_THROW(FrameId::parse("novideo"), Error);
  EXPECT_THROW(FrameId::parse("v:-1"), Error);
  EXPECT_THROW(FrameId::parse("v:1x"), Error);
  EXPECT_LT((FrameId{"a", 5}), (FrameId{"a", 6}));
}

TEST(Budget, StrictInequality) {
  CorrespondenceSet s{kA, kB, {}};
  EXPECT_FALSE(meets_budget(s));
  s.matches.resize(1024);
  EXPECT_FALSE(meets_budget(s, 1024));
  s.matches.resize(1025);
  EXPECT_TRUE(meets_budget(s, 1024));
}

TEST(Propagate, SingleLinkAndThreshold) {
  const auto ab = one(kA, kB, {10, 10}, {50, 50}, 0.8);
  const auto out = propagate(ab, one(kB, kC, {50.4, 50.3}, {90, 90}, 0.6), 1.0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.matches[0].pa, Vec2(10, 10));
  EXPECT_EQ(out.matches[0].pb, Vec2(90, 90));
  EXPECT_EQ(out.matches[0].confidence, 0.6);
  EXPECT_EQ(out.matches[0].source, kPropagatedSource);
  EXPECT_EQ(out.frame_a, kA);
  EXPECT_EQ(out.frame_b, kC);
  EXPECT_EQ(out.interval(), 40);

  EXPECT_TRUE(propagate(ab, one(kB, kC, {51.2, 50}, {90, 90}), 1.0).empty());
  EXPECT_THROW(propagate(ab, one(kA, kC, {50, 50}, {90, 90}), 1.0), Error);
}

TEST(Propagate, NearestThenLowestIndex) {
  const auto ab = one(kA, kB, {1, 1}, {50, 50});
  CorrespondenceSet bc{kB, kC, {{{50.5, 50}, {1, 1}, 1, "m"}, {{50, 50.2}, {2, 2}, 1, "m"}, {{50, 49.8}, {3, 3}, 1, "m"}}};
  const auto out = propagate(ab, bc, 1.0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.matches[0].pb, Vec2(2, 2));
}

TEST(Propagate, ZeroThresholdOnlyCoincident) {
  CorrespondenceSet ab{kA, kB, {{{1, 1}, {5.25, 7.5}, 1, "m"}, {{2, 2}, {9, 9}, 1, "m"}}};
  CorrespondenceSet bc{kB, kC, {{{5.25, 7.5}, {3, 3}, 1, "m"}, {{9.0000001, 9}, {4, 4}, 1, "m"}}};
  const auto out = propagate(ab, bc, 0.0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.matches[0].pb, Vec2(3, 3));
}

TEST(Propagate, MatchesBruteForceOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const double thr = std::array<double, 3>{0.0, 0.5, 1.0}[trial % 3];
    const ImageBounds b{64, 48};  // dense enough that many middles fall within threshold
    auto ab = random_set(rng, 500, b, b, kA, kB);
    auto bc = random_set(rng, 500, b, b, kB, kC);
    // Plant exact and near hits.
    for (std::size_t i = 0; i < 50; ++i) bc.matches[i].pa = ab.matches[i].pb;
    for (std::size_t i = 50; i < 100; ++i) bc.matches[i].pa = ab.matches[i].pb + Vec2(0.3, -0.4);
    const auto fast = propagate(ab, bc, thr);
    const auto slow = propagate_oracle(ab, bc, thr);
    EXPECT_EQ(canonical_rows(fast), canonical_rows(slow));
    EXPECT_LE(fast.size(), ab.size());
  }
}

TEST(Fuse, SingletonDisjointAndIdempotent) {
  Rng rng(22);
  const auto s1 = random_set(rng, 300, {640, 480}, {640, 480}, kA, kB);
  const auto s2 = random_set(rng, 400, {640, 480}, {640, 480}, kA, kB);
  const std::vector<CorrespondenceSet> single{s1};
  EXPECT_EQ(canonical_rows(fuse(single, 1.0)), canonical_rows(s1));
  // Random endpoints over 640x480 are 1-px duplicates with negligible probability.
  const std::vector<CorrespondenceSet> both{s1, s2};
  const auto fused = fuse(both, 1.0);
  EXPECT_EQ(fused.size(), 700u);

  const std::vector<CorrespondenceSet> twice{s1, s1};
  EXPECT_EQ(canonical_rows(fuse(twice, 1.0)), canonical_rows(s1));

  const std::vector<CorrespondenceSet> bad{s1, random_set(rng, 3, {10, 10}, {10, 10}, kA, kC)};
  EXPECT_THROW(fuse(bad, 1.0), Error);
}

TEST(Fuse, OverlapCountMatchesQuadraticOracle) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto s1 = random_set(rng, 300, {100, 80}, {100, 80}, kA, kB);
    auto s2 = random_set(rng, 300, {100, 80}, {100, 80}, kA, kB);
    for (auto& m : s1.matches) m.source = "first";
    for (auto& m : s2.matches) m.source = "second";
    const std::size_t k = 40;
    for (std::size_t i = 0; i < k; ++i) {
      s2.matches[i].pa = s1.matches[i].pa + Vec2(0.3, 0.2);
      s2.matches[i].pb = s1.matches[i].pb + Vec2(-0.1, 0.5);
    }
    const std::vector<std::string> order{"first", "second"};
    const std::vector<CorrespondenceSet> sets{s1, s2};
    const auto fused = fuse(sets, 1.0, order);

    std::vector<Match> prio(s1.matches);
    prio.insert(prio.end(), s2.matches.begin(), s2.matches.end());
    std::stable_sort(prio.begin(), prio.end(), [&](const Match& x, const Match& y) {
      if (x.confidence != y.confidence) return x.confidence > y.confidence;
      return (x.source == "first") > (y.source == "first");
    });
    EXPECT_EQ(fused.size(), dedup_count_oracle(prio, 1.0));
    EXPECT_LE(fused.size(), 600u);
  }
}

TEST(Fuse, HigherConfidenceThenMethodOrderWins) {
  const auto lo = one(kA, kB, {5, 5}, {6, 6}, 0.4, "first");
  const auto hi = one(kA, kB, {5.5, 5}, {6, 6.5}, 0.9, "second");
  const std::vector<CorrespondenceSet> sets{lo, hi};
  const std::vector<std::string> order{"first", "second"};
  auto out = fuse(sets, 1.0, order);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.matches[0].source, "second");

  const auto tie_a = one(kA, kB, {5, 5}, {6, 6}, 0.5, "second");
  const auto tie_b = one(kA, kB, {5, 5}, {6, 6}, 0.5, "first");
  const std::vector<CorrespondenceSet> ties{tie_a, tie_b};
  out = fuse(ties, 1.0, order);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.matches[0].source, "first");
}

TEST(Merge, BasePriorityAndCounts) {
  Rng rng(24);
  const auto base = random_set(rng, 200, {640, 480}, {640, 480}, kA, kB);
  const CorrespondenceSet empty{kA, kB, {}};
  EXPECT_EQ(canonical_rows(merge(base, empty, 1.0)), canonical_rows(base));

  auto b1 = one(kA, kB, {5, 5}, {6, 6}, 0.1, "builtin");
  auto p1 = one(kA, kB, {5.2, 5}, {6, 6.3}, 0.99, std::string(kPropagatedSource));
  const auto out = merge(p1, b1, 1.0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.matches[0].source, "builtin");

  for (int trial = 0; trial < 10; ++trial) {
    auto c1 = random_set(rng, 300, {80, 60}, {80, 60}, kA, kB);
    auto c2 = random_set(rng, 300, {80, 60}, {80, 60}, kA, kB);
    for (auto& m : c1.matches) m.source = "base";
    for (auto& m : c2.matches) m.source = std::string(kPropagatedSource);
    const auto merged = merge(c1, c2, 1.0);
    std::vector<Match> prio(c1.matches);
    std::stable_sort(prio.begin(), prio.end(), [](const Match& x, const Match& y) { return x.confidence > y.confidence; });
    std::vector<Match> second(c2.matches);
    std::stable_sort(second.begin(), second.end(), [](const Match& x, const Match& y) { return x.confidence > y.confidence; });
    prio.insert(prio.end(), second.begin(), second.end());
    EXPECT_EQ(merged.size(), dedup_count_oracle(prio, 1.0));
    EXPECT_LE(merged.size(), c1.size() + c2.size());
  }
}

TEST(Provenance, HistogramSumsToCount) {
  Rng rng(25);
  const auto s = random_set(rng, 321, {64, 64}, {64, 64}, kA, kB);
  std::size_t total = 0;
  for (const auto& [k, v] : source_histogram(s)) total += v;
  EXPECT_EQ(total, s.size());
}
