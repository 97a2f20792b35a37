#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gvvad/config.hpp"
#include "gvvad/eval.hpp"
#include "gvvad/milcore.hpp"
#include "gvvad/promptgen.hpp"
#include "gvvad/worldsim.hpp"

namespace gvvad {

enum class AblationKind { lambda_sweep, data_scale_sweep, module_ablation };

std::string to_string(AblationKind kind);
AblationKind parse_ablation_kind(const std::string& text);

struct AblationSpec {
  AblationKind kind = AblationKind::lambda_sweep;
  /// lambda_sweep: λ values or `learnable`; data_scale_sweep: real-data
  /// fractions, each run without and with synthetic data; module_ablation:
  /// names from module_ablation_grid().
  std::vector<std::string> grid;
  std::vector<std::uint64_t> seeds;
  WorldConfig world;
  TrainConfig base_train;
  std::vector<DescriptionPair> pairs;
  std::size_t real_per_class = 80;
  std::size_t synthetic_per_class = 60;
  std::size_t test_per_class = 100;
  double filter_percentile = 95.0;

  void validate() const;
};

std::vector<std::string> lambda_sweep_grid();       // 0.1 0.25 0.5 1 2 learnable
std::vector<std::string> data_scale_grid();         // 0.25 0.5 0.75 1
std::vector<std::string> module_ablation_grid();    // baseline +VG +VG+VF +VG+SSLS +VG+VF+SSLS
std::vector<std::string> default_grid(AblationKind kind);

struct AblationRow {
  std::string setting;
  std::uint64_t seed = 0;
  double auc = 0.0;
};

struct AblationSummary {
  std::string setting;
  double mean_auc = 0.0;
  double std_auc = 0.0;  // sample standard deviation; 0 for one seed
  std::size_t n_seeds = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;        // grid order, then seed order
  std::vector<AblationSummary> summary; // grid order

  const AblationSummary& at(const std::string& setting) const;
  /// AUC of one setting for one seed.
  double auc(const std::string& setting, std::uint64_t seed) const;
};

/// The four world sets plus a real test split for one seed.
struct SeedWorld {
  WorldSets train;
  std::vector<VideoSample> test;
};

SeedWorld build_seed_world(const AblationSpec& spec, std::uint64_t seed);

AblationTable run_ablation(const AblationSpec& spec);

/// Ablation-only config keys (kind, grid, seeds, counts, filter_percentile).
std::vector<std::pair<std::string, std::string>> ablation_config_keys();
AblationSpec ablation_from_config(const RunConfig& cfg, std::vector<DescriptionPair> pairs);

/// Writes ablation.csv (`setting,seed,auc`) and summary.csv
/// (`setting,mean_auc,std_auc,n_seeds`).
void write_ablation_csv(const AblationTable& table, const std::filesystem::path& dir);

}  // namespace gvvad
