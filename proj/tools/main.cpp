// corrkit command line: label | propagate | augment | evaluate | rank
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 completed with dropped pairs or matcher failures, 4 I/O or input data error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "corrkit/benchmark.hpp"
#include "corrkit/interchange.hpp"
#include "corrkit/pipeline.hpp"

namespace {

using namespace corrkit;

constexpr int kExitOk = 0;
constexpr int kExitUnexpected = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;
constexpr int kExitIo = 4;

struct PipelineFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
  std::optional<std::size_t> min_corrs;
  std::vector<std::string> matchers;
  std::string filter_kind;
  bool no_augment = false;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--config", f.config, "Pipeline config JSON");
  cmd->add_option("--out", f.out, "Output directory (overrides config output_dir)");
  cmd->add_option("--seed", f.seed, "Global seed");
  cmd->add_option("--parallelism", f.parallelism, "Worker threads");
  cmd->add_option("--min-corrs", f.min_corrs, "Correspondence budget (pairs need strictly more)");
  cmd->add_option("--matcher", f.matchers, "Matcher spec (JSON file or kind:name,key=value,...), repeatable");
  cmd->add_option("--filter-kind", f.filter_kind, "Robust filter model: fundamental|homography|essential");
  cmd->add_flag("--no-augment", f.no_augment, "Disable perspective augmentation");
}

PipelineConfig resolve_config(const PipelineFlags& f) {
  PipelineConfig cfg = f.config.empty() ? PipelineConfig{} : load_pipeline_config(f.config);
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.parallelism) cfg.parallelism = *f.parallelism;
  if (f.min_corrs) cfg.min_correspondences = *f.min_corrs;
  for (const auto& m : f.matchers) cfg.matchers.push_back(parse_matcher_spec(m));
  if (!f.filter_kind.empty()) cfg.filter_kind = parse_model_kind(f.filter_kind);
  if (f.no_augment) cfg.augmentation.enabled = false;
  cfg.validate();
  return cfg;
}

int summarize(const LabelReport& r) {
  std::printf("pairs %zu  base_pairs %zu  dropped %zu  matcher_failures %zu  augment_flags %zu\n", r.pairs.size(),
              r.base_pairs, r.dropped_pairs, r.matcher_failures, r.augment_flags);
  return (r.dropped_pairs > 0 || r.matcher_failures > 0) ? kExitPartial : kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
      return kExitConfig;
    case ErrorCode::IoError:
    case ErrorCode::ParseError:
    case ErrorCode::NoValidDepth:
    case ErrorCode::IncompleteGrid:
      return kExitIo;
    default:
      return kExitUnexpected;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correspondence labeling and zero-shot matching evaluation toolkit"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  PipelineFlags label_flags;
  std::string frames_dir;
  auto* label = app.add_subcommand("label", "Label a frame directory: base labels, propagation, augmentation");
  label->add_option("--frames", frames_dir, "Directory of %08d.pgm frames")->required();
  add_pipeline_flags(label, label_flags);

  PipelineFlags prop_flags;
  std::string base_dir;
  auto* propagate = app.add_subcommand("propagate", "Re-run propagation from cached base labels");
  propagate->add_option("--base", base_dir, "Base-label cache directory (<label out>/base)")->required();
  add_pipeline_flags(propagate, prop_flags);

  PipelineFlags aug_flags;
  std::string aug_in;
  auto* augment = app.add_subcommand("augment", "Apply perspective augmentation to an emitted dataset");
  augment->add_option("--in", aug_in, "Dataset directory with manifest.json")->required();
  add_pipeline_flags(augment, aug_flags);

  std::vector<std::string> eval_datasets;
  std::vector<std::string> eval_methods;
  double ransac_threshold = RansacConfig{}.threshold;
  std::uint64_t eval_seed = 0;
  int eval_parallelism = 1;
  std::size_t per_bin = 0;
  std::string report_path;
  auto* evaluate = app.add_subcommand("evaluate", "Relative pose AUC of matchers on evaluation datasets");
  evaluate->add_option("--dataset", eval_datasets, "Dataset directory with pairs.json")->required();
  evaluate->add_option("--method", eval_methods, "Matcher spec, repeatable");
  evaluate->add_option("--ransac-threshold", ransac_threshold, "Essential RANSAC threshold (px)")->capture_default_str();
  evaluate->add_option("--seed", eval_seed, "Seed")->capture_default_str();
  evaluate->add_option("--parallelism", eval_parallelism, "Worker threads")->capture_default_str();
  evaluate->add_option("--per-bin", per_bin, "Sample this many pairs per overlap bin (0 keeps every pair)");
  evaluate->add_option("--report", report_path, "Report JSON path (a .txt table is written alongside)");

  std::vector<std::string> rank_reports;
  auto* rank = app.add_subcommand("rank", "Mean rank table across report files");
  rank->add_option("--reports", rank_reports, "Report JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    if (*label) {
      const auto cfg = resolve_config(label_flags);
      return summarize(run_label(scan_frames(frames_dir), cfg));
    }
    if (*propagate) {
      return summarize(run_propagate(base_dir, resolve_config(prop_flags)));
    }
    if (*augment) {
      auto cfg = resolve_config(aug_flags);
      cfg.augmentation.enabled = true;
      return summarize(run_augment(aug_in, cfg));
    }
    if (*evaluate) {
      if (eval_methods.empty()) throw Error(ErrorCode::ConfigError, "at least one --method is required");
      std::vector<MatcherSpec> methods;
      for (const auto& m : eval_methods) methods.push_back(parse_matcher_spec(m));
      std::vector<EvalDataset> datasets;
      for (const auto& d : eval_datasets) {
        auto ds = load_eval_dataset(d);
        if (per_bin > 0) ds.pairs = sample_eval_pairs(ds.pairs, per_bin, eval_seed).pairs;
        datasets.push_back(std::move(ds));
      }
      BenchmarkConfig cfg;
      cfg.ransac.threshold = ransac_threshold;
      cfg.seed = eval_seed;
      cfg.parallelism = eval_parallelism;
      const auto result = run_benchmark(datasets, methods, cfg);
      const std::string table = format_table(result.table);
      std::cout << table;
      if (!report_path.empty()) {
        write_text_file_atomic(report_path, report_to_json(result.records).dump(2) + "\n");
        write_text_file_atomic(report_path + ".txt", table);
      }
      return kExitOk;
    }
    if (*rank) {
      std::vector<ReportRecord> records;
      for (const auto& path : rank_reports) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(read_text_file(path));
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::ParseError, path + ": " + e.what());
        }
        const auto r = report_from_json(j);
        records.insert(records.end(), r.begin(), r.end());
      }
      std::cout << format_table(score_table(records));
      return kExitOk;
    }
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitUnexpected;
  }
  return kExitUnexpected;
}
