#include "corrkit/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "corrkit/kernels.hpp"
#include "corrkit/parallel.hpp"
#include "corrkit/random.hpp"

namespace corrkit {

double directional_overlap(const EvalFrame& a, const EvalFrame& b, double depth_tolerance) {
  if (!a.depth || !b.depth) throw Error(ErrorCode::NoValidDepth, "frame without a depth map");
  const DepthMap& da = *a.depth;
  const DepthMap& db = *b.depth;
  const Pose rel = relative_pose(a.pose, b.pose);

  kernels::ReprojectParams p{};
  p.inv_fx_a = 1.0 / a.k.fx;
  p.inv_fy_a = 1.0 / a.k.fy;
  p.cx_a = a.k.cx;
  p.cy_a = a.k.cy;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.r[r * 3 + c] = rel.rotation(r, c);
    p.t[r] = rel.translation(r);
  }
  p.fx_b = b.k.fx;
  p.fy_b = b.k.fy;
  p.cx_b = b.k.cx;
  p.cy_b = b.k.cy;

  const auto& kt = kernels::active();
  const auto w = static_cast<std::size_t>(da.width);
  std::vector<double> u(w), v(w), z(w);
  const double max_x = db.width - 1.0;
  const double max_y = db.height - 1.0;
  std::size_t valid = 0;
  std::size_t visible = 0;
  for (int y = 0; y < da.height; ++y) {
    const auto row = da.row(y);
    kt.reproject(p, static_cast<double>(y), row, u, v, z);
    for (std::size_t x = 0; x < w; ++x) {
      if (!(row[x] > 0.0f)) continue;
      ++valid;
      if (!(z[x] > 0.0) || !(u[x] >= 0.0 && u[x] <= max_x && v[x] >= 0.0 && v[x] <= max_y)) continue;
      const auto d = sample_depth_bilinear(db, Vec2(u[x], v[x]));
      if (!d) continue;
      if (std::fabs(z[x] - *d) / *d < depth_tolerance) ++visible;
    }
  }
  if (valid == 0) throw Error(ErrorCode::NoValidDepth, a.id.to_string() + " has no valid depth");
  return static_cast<double>(visible) / static_cast<double>(valid);
}

double overlap_ratio(const EvalFrame& a, const EvalFrame& b, double depth_tolerance) {
  return std::min(directional_overlap(a, b, depth_tolerance), directional_overlap(b, a, depth_tolerance));
}

int overlap_bin(double ratio) {
  // Literal edges: 0.1 + 0.08 * k in floating point overshoots 0.42.
  static constexpr std::array<double, kOverlapBins> kLowerEdges{0.1, 0.18, 0.26, 0.34, 0.42};
  if (!(ratio >= kOverlapMin && ratio <= kOverlapMax)) return -1;
  for (int k = kOverlapBins - 1; k >= 0; --k) {
    if (ratio >= kLowerEdges[static_cast<std::size_t>(k)]) return k;
  }
  return 0;
}

SampledPairs sample_eval_pairs(std::span<const EvalPair> pool, std::size_t per_bin, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kOverlapBins> members;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int bin = overlap_bin(pool[i].overlap_ratio);
    if (bin >= 0) members[static_cast<std::size_t>(bin)].push_back(i);
  }
  SampledPairs out;
  for (int k = 0; k < kOverlapBins; ++k) {
    const auto& m = members[static_cast<std::size_t>(k)];
    std::vector<std::size_t> chosen;
    if (m.size() <= per_bin) {
      chosen = m;
      if (m.size() < per_bin) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "bin %d [%.2f, %.2f%c has %zu of %zu requested pairs", k,
                      kOverlapMin + kOverlapBinWidth * k, kOverlapMin + kOverlapBinWidth * (k + 1),
                      k == kOverlapBins - 1 ? ']' : ')', m.size(), per_bin);
        out.warnings.emplace_back(buf);
        spdlog::warn("{}", buf);
      }
    } else {
      Rng rng(SeedHasher(seed).add("bins").add(static_cast<std::uint64_t>(k)).finish());
      for (std::size_t j : rng.sample_without_replacement(m.size(), per_bin)) chosen.push_back(m[j]);
      std::sort(chosen.begin(), chosen.end());
    }
    for (std::size_t i : chosen) {
      EvalPair p = pool[i];
      p.bin = k;
      out.pairs.push_back(std::move(p));
    }
    out.per_bin_counts[static_cast<std::size_t>(k)] = chosen.size();
  }
  return out;
}

PairEvaluation evaluate_pair_detailed(const CorrespondenceSet& corrs, const EvalPair& pair,
                                      const RansacConfig& config) {
  PairEvaluation out;
  const Calibration calib{pair.a.k, pair.b.k};
  try {
    const TwoViewModel model = ransac(ModelKind::Essential, corrs.matches, config, &calib);
    const Mat3 ka_inv = pair.a.k.inverse_matrix();
    const Mat3 kb_inv = pair.b.k.inverse_matrix();
    std::vector<NormalizedMatch> normalized;
    for (std::size_t i = 0; i < corrs.matches.size(); ++i) {
      if (!model.inlier_mask[i]) continue;
      const auto& m = corrs.matches[i];
      const Vec3 a = ka_inv * Vec3(m.pa.x(), m.pa.y(), 1.0);
      const Vec3 b = kb_inv * Vec3(m.pb.x(), m.pb.y(), 1.0);
      normalized.push_back({a.head<2>() / a.z(), b.head<2>() / b.z()});
    }
    const auto candidates = decompose_essential(EssentialMatrix::project(model.matrix));
    const auto chosen = cheirality_select(candidates, normalized);
    const PoseError err = pose_error(chosen.pose, relative_pose(pair.a.pose, pair.b.pose));
    out.error_deg = err.degrees;
    out.failed = err.degenerate;
    if (err.degenerate) out.reason = "DegenerateTranslation";
  } catch (const Error& e) {
    out.error_deg = kFailureScore;
    out.failed = true;
    out.reason = to_string(e.code());
  }
  return out;
}

double evaluate_pair(const CorrespondenceSet& corrs, const EvalPair& pair, const RansacConfig& config) {
  return evaluate_pair_detailed(corrs, pair, config).error_deg;
}

double auc(std::span<const double> errors, double threshold) {
  if (errors.empty()) throw Error(ErrorCode::EmptyErrors, "auc of an empty error list");
  if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "auc threshold must be positive");
  std::vector<double> e(errors.begin(), errors.end());
  for (double x : e) {
    if (std::isnan(x) || x < 0.0 || (x > 180.0 && !std::isinf(x))) {
      throw Error(ErrorCode::InvalidArgument, "errors must lie in [0, 180] or be +inf");
    }
  }
  std::sort(e.begin(), e.end());
  const auto n = static_cast<double>(e.size());
  // Recall is i/n on [e_(i), e_(i+1)); integrate the step function up to threshold.
  double area = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double lo = std::min(e[i], threshold);
    const double hi = i + 1 < e.size() ? std::min(e[i + 1], threshold) : threshold;
    area += static_cast<double>(i + 1) * (hi - lo);
  }
  return area / (n * threshold);
}

std::vector<double> auc(std::span<const double> errors, std::span<const double> thresholds) {
  std::vector<double> out;
  for (double t : thresholds) out.push_back(auc(errors, t));
  return out;
}

std::vector<double> ScoreTable::mean_auc() const {
  std::vector<double> out;
  for (const auto& row : auc) {
    double s = 0.0;
    for (double v : row) s += v;
    out.push_back(row.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(row.size()));
  }
  return out;
}

std::vector<double> mean_rank(const ScoreTable& table) {
  const std::size_t nm = table.methods.size();
  const std::size_t nd = table.datasets.size();
  if (nm == 0 || nd == 0 || table.auc.size() != nm) throw Error(ErrorCode::IncompleteGrid, "empty score table");
  for (const auto& row : table.auc) {
    if (row.size() != nd) throw Error(ErrorCode::IncompleteGrid, "ragged score table");
    for (double v : row) {
      if (std::isnan(v)) throw Error(ErrorCode::IncompleteGrid, "missing score table cell");
    }
  }
  std::vector<double> sum(nm, 0.0);
  std::vector<std::size_t> order(nm);
  for (std::size_t d = 0; d < nd; ++d) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return table.auc[x][d] > table.auc[y][d]; });
    for (std::size_t i = 0; i < nm;) {
      std::size_t j = i;
      while (j + 1 < nm && table.auc[order[j + 1]][d] == table.auc[order[i]][d]) ++j;
      // Positions i..j share the average of ranks i+1..j+1.
      const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) sum[order[k]] += rank;
      i = j + 1;
    }
  }
  for (double& s : sum) s /= static_cast<double>(nd);
  return sum;
}

double corner_error(const Homography& h_est, const Homography& h_gt, ImageBounds size) {
  const double w = size.width - 1.0;
  const double h = size.height - 1.0;
  const std::array<Vec2, 4> corners{Vec2(0, 0), Vec2(w, 0), Vec2(w, h), Vec2(0, h)};
  double total = 0.0;
  try {
    for (const auto& c : corners) total += (apply_homography(h_est, c) - apply_homography(h_gt, c)).norm();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::PointAtInfinity) return std::numeric_limits<double>::infinity();
    throw;
  }
  return total / 4.0;
}

std::vector<double> homography_corner_auc(std::span<const HomographyCase> cases,
                                          std::span<const double> thresholds) {
  std::vector<double> errors;
  errors.reserve(cases.size());
  for (const auto& c : cases) errors.push_back(corner_error(c.estimate, c.truth, c.size));
  // Corner errors are pixels and may exceed 180; clamp finite values so the
  // shared validation accepts them without changing any thresholded area.
  const double cap = *std::max_element(thresholds.begin(), thresholds.end());
  for (double& e : errors) {
    if (std::isfinite(e)) e = std::min(e, std::min(cap, 180.0));
  }
  return auc(errors, thresholds);
}

namespace {

FrameSource frame_source(const EvalFrame& f) {
  FrameSource s;
  s.id = f.id;
  s.path = f.image;
  s.intrinsics = f.k;
  s.size = {f.k.width, f.k.height};
  return s;
}

}  // namespace

BenchmarkResult run_benchmark(std::span<const EvalDataset> datasets, std::span<const MatcherSpec> methods,
                              const BenchmarkConfig& cfg) {
  if (methods.empty()) throw Error(ErrorCode::ConfigError, "no methods to evaluate");
  if (datasets.empty()) throw Error(ErrorCode::ConfigError, "no datasets to evaluate");
  cfg.ransac.validate();
  BenchmarkResult result;
  ScoreTable& table = result.table;
  for (const auto& m : methods) {
    m.validate();
    table.methods.push_back(m.name);
  }
  for (const auto& d : datasets) table.datasets.push_back(d.name);
  table.auc.assign(methods.size(), std::vector<double>(datasets.size(), 0.0));
  table.flagged.assign(methods.size(), std::vector<bool>(datasets.size(), false));
  result.errors.assign(methods.size(), std::vector<std::vector<double>>(datasets.size()));

  static constexpr std::array<double, 3> kPoseThresholds{5.0, 10.0, 20.0};
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MatcherSpec spec = methods[mi];
    if (auto* s = std::get_if<SyntheticParams>(&spec.params)) s->seed = SeedHasher(cfg.seed).add(s->seed).finish();
    for (std::size_t di = 0; di < datasets.size(); ++di) {
      const auto& ds = datasets[di];
      std::vector<PairEvaluation> evals(ds.pairs.size());
      parallel_for(ds.pairs.size(), cfg.parallelism, [&](std::size_t pi) {
        const EvalPair& pair = ds.pairs[pi];
        std::optional<GroundTruth> gt;
        if (pair.a.depth) {
          gt = GroundTruth{DepthPoseTruth{pair.a.k, pair.b.k, pair.a.pose, pair.b.pose, pair.a.depth}};
        }
        const MatchOutcome outcome = run_matcher(spec, frame_source(pair.a), frame_source(pair.b), gt ? &*gt : nullptr);
        if (outcome.status != MatchStatus::Ok) {
          evals[pi] = {kFailureScore, true, std::string(to_string(outcome.status))};
          return;
        }
        RansacConfig rc = cfg.ransac;
        rc.seed = SeedHasher(cfg.seed)
                      .add("evaluate")
                      .add(cfg.ransac.seed)
                      .add(spec.name)
                      .add(ds.name)
                      .add(pair.id)
                      .finish();
        evals[pi] = evaluate_pair_detailed(outcome.set, pair, rc);
      });

      ReportRecord rec;
      rec.method = spec.name;
      rec.dataset = ds.name;
      rec.n_pairs = evals.size();
      auto& errors = result.errors[mi][di];
      for (const auto& e : evals) {
        errors.push_back(e.error_deg);
        if (e.failed) ++rec.n_failures;
      }
      if (!errors.empty()) {
        const auto a = auc(errors, kPoseThresholds);
        rec.auc5 = a[0];
        rec.auc10 = a[1];
        rec.auc20 = a[2];
      }
      table.auc[mi][di] = rec.auc5;
      table.flagged[mi][di] =
          rec.n_pairs == 0 ||
          static_cast<double>(rec.n_pairs - rec.n_failures) < cfg.min_coverage * static_cast<double>(rec.n_pairs);
      spdlog::info("{} on {}: AUC@5 {:.4f} ({} pairs, {} failures)", rec.method, rec.dataset, rec.auc5, rec.n_pairs,
                   rec.n_failures);
      result.records.push_back(std::move(rec));
    }
  }
  return result;
}

nlohmann::json report_to_json(std::span<const ReportRecord> records) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : records) {
    out.push_back({{"method", r.method},
                   {"dataset", r.dataset},
                   {"auc5", r.auc5},
                   {"auc10", r.auc10},
                   {"auc20", r.auc20},
                   {"n_pairs", r.n_pairs},
                   {"n_failures", r.n_failures}});
  }
  return out;
}

std::vector<ReportRecord> report_from_json(const nlohmann::json& j) {
  std::vector<ReportRecord> out;
  try {
    for (const auto& r : j) {
      ReportRecord rec;
      rec.method = r.at("method").get<std::string>();
      rec.dataset = r.at("dataset").get<std::string>();
      rec.auc5 = r.at("auc5").get<double>();
      rec.auc10 = r.at("auc10").get<double>();
      rec.auc20 = r.at("auc20").get<double>();
      rec.n_pairs = r.at("n_pairs").get<std::size_t>();
      rec.n_failures = r.at("n_failures").get<std::size_t>();
      out.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report: ") + e.what());
  }
  return out;
}

ScoreTable score_table(std::span<const ReportRecord> records, double min_coverage) {
  ScoreTable t;
  std::map<std::string, std::size_t> mi;
  std::map<std::string, std::size_t> di;
  for (const auto& r : records) {
    if (mi.emplace(r.method, t.methods.size()).second) t.methods.push_back(r.method);
    if (di.emplace(r.dataset, t.datasets.size()).second) t.datasets.push_back(r.dataset);
  }
  t.auc.assign(t.methods.size(), std::vector<double>(t.datasets.size(), std::numeric_limits<double>::quiet_NaN()));
  t.flagged.assign(t.methods.size(), std::vector<bool>(t.datasets.size(), false));
  for (const auto& r : records) {
    const std::size_t m = mi[r.method];
    const std::size_t d = di[r.dataset];
    t.auc[m][d] = r.auc5;
    t.flagged[m][d] = r.n_pairs == 0 || static_cast<double>(r.n_pairs - r.n_failures) <
                                            min_coverage * static_cast<double>(r.n_pairs);
  }
  return t;
}

std::string format_table(const ScoreTable& table) {
  const auto ranks = mean_rank(table);
  const auto means = table.mean_auc();
  std::size_t name_w = 6;
  for (const auto& m : table.methods) name_w = std::max(name_w, m.size());
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s  %9s  %11s", static_cast<int>(name_w), "Method", "Mean Rank", "Mean AUC@5");
  os << buf;
  for (const auto& d : table.datasets) os << "  " << std::string(std::max<std::size_t>(0, 8 - std::min<std::size_t>(8, d.size())), ' ') << d;
  os << '\n';
  std::vector<std::size_t> order(table.methods.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });
  for (std::size_t m : order) {
    std::snprintf(buf, sizeof(buf), "%-*s  %9.2f  %10.1f%%", static_cast<int>(name_w), table.methods[m].c_str(),
                  ranks[m], 100.0 * means[m]);
    os << buf;
    for (std::size_t d = 0; d < table.datasets.size(); ++d) {
      const int w = static_cast<int>(std::max<std::size_t>(8, table.datasets[d].size()));
      std::snprintf(buf, sizeof(buf), "%.1f%s", 100.0 * table.auc[m][d], table.flagged[m][d] ? "*" : "");
      std::string cell(buf);
      os << "  " << std::string(static_cast<std::size_t>(std::max(0, w - static_cast<int>(cell.size()))), ' ') << cell;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace corrkit
