#include "gvvad/ablation.hpp"

#include <cmath>
#include <fstream>

#include "gvvad/errors.hpp"
#include "text_util.hpp"

namespace gvvad {

namespace fs = std::filesystem;

std::string to_string(AblationKind kind) {
  switch (kind) {
    case AblationKind::lambda_sweep: return "lambda_sweep";
    case AblationKind::data_scale_sweep: return "data_scale_sweep";
    case AblationKind::module_ablation: return "module_ablation";
  }
  return "?";
}

AblationKind parse_ablation_kind(const std::string& text) {
  if (text == "lambda_sweep") return AblationKind::lambda_sweep;
  if (text == "data_scale_sweep") return AblationKind::data_scale_sweep;
  if (text == "module_ablation") return AblationKind::module_ablation;
  throw ValidationError("ablation kind must be lambda_sweep, data_scale_sweep or module_ablation, got '" + text + "'");
}

std::vector<std::string> lambda_sweep_grid() { return {"0.1", "0.25", "0.5", "1", "2", "learnable"}; }
std::vector<std::string> data_scale_grid() { return {"0.25", "0.5", "0.75", "1"}; }
std::vector<std::string> module_ablation_grid() { return {"baseline", "+VG", "+VG+VF", "+VG+SSLS", "+VG+VF+SSLS"}; }

std::vector<std::string> default_grid(AblationKind kind) {
  switch (kind) {
    case AblationKind::lambda_sweep: return lambda_sweep_grid();
    case AblationKind::data_scale_sweep: return data_scale_grid();
    case AblationKind::module_ablation: return module_ablation_grid();
  }
  return {};
}

namespace {

struct ModuleFlags {
  bool generation = false;
  bool filtering = false;
  bool scaling = false;
};

ModuleFlags parse_module_setting(const std::string& setting) {
  if (setting == "baseline") return {};
  if (setting == "+VG") return {true, false, false};
  if (setting == "+VG+VF") return {true, true, false};
  if (setting == "+VG+SSLS") return {true, false, true};
  if (setting == "+VG+VF+SSLS") return {true, true, true};
  throw ValidationError("unknown module-ablation setting '" + setting + "'");
}

double parse_fraction(const std::string& setting) {
  const auto f = detail::parse_double(setting);
  if (!f || !(*f > 0.0 && *f <= 1.0)) throw ValidationError("data-scale setting must be in (0, 1], got '" + setting + "'");
  return *f;
}

std::string percent_label(double fraction) { return detail::format_double(fraction * 100.0) + "%"; }

}  // namespace

void AblationSpec::validate() const {
  if (grid.empty()) throw ValidationError("ablation grid is empty");
  if (seeds.empty()) throw ValidationError("ablation needs at least one seed");
  if (pairs.empty()) throw ValidationError("ablation needs description pairs");
  if (real_per_class == 0 || test_per_class == 0) throw ValidationError("ablation needs real training and test videos");
  world.validate();
  base_train.validate();
  for (const auto& g : grid) {
    switch (kind) {
      case AblationKind::lambda_sweep:
        if (g != "learnable" && !(detail::parse_double(g) && *detail::parse_double(g) >= 0.0)) {
          throw ValidationError("lambda setting must be a non-negative number or 'learnable', got '" + g + "'");
        }
        break;
      case AblationKind::data_scale_sweep: parse_fraction(g); break;
      case AblationKind::module_ablation: parse_module_setting(g); break;
    }
  }
}

const AblationSummary& AblationTable::at(const std::string& setting) const {
  for (const auto& s : summary) {
    if (s.setting == setting) return s;
  }
  throw ValidationError("no ablation setting '" + setting + "'");
}

double AblationTable::auc(const std::string& setting, std::uint64_t seed) const {
  for (const auto& r : rows) {
    if (r.setting == setting && r.seed == seed) return r.auc;
  }
  throw ValidationError("no ablation row for '" + setting + "' seed " + std::to_string(seed));
}

SeedWorld build_seed_world(const AblationSpec& spec, std::uint64_t seed) {
  SeedWorld w;
  w.train = generate_dataset(spec.world, spec.pairs,
                             {spec.real_per_class, spec.real_per_class, spec.synthetic_per_class, spec.synthetic_per_class},
                             derive_seed(seed, "train-world"), "train");
  auto test = generate_dataset(spec.world, spec.pairs, {spec.test_per_class, spec.test_per_class, 0, 0},
                               derive_seed(seed, "test-world"), "test");
  w.test = std::move(test.real_anomalous);
  w.test.insert(w.test.end(), test.real_normal.begin(), test.real_normal.end());
  return w;
}

namespace {

double train_and_score(const MixedDataset& data, TrainConfig config, std::uint64_t seed, const SeedWorld& world,
                       const AblationSpec& spec) {
  config.seed = derive_seed(seed, "train");
  const auto result = train(data, config);
  return evaluate(result.params, world.test, spec.world.clip_len).auc;
}

}  // namespace

AblationTable run_ablation(const AblationSpec& spec) {
  spec.validate();

  std::vector<std::string> settings;
  if (spec.kind == AblationKind::data_scale_sweep) {
    for (const auto& g : spec.grid) {
      const auto label = percent_label(parse_fraction(g));
      settings.push_back(label);
      settings.push_back(label + "+VG");
    }
  } else if (spec.kind == AblationKind::lambda_sweep) {
    for (const auto& g : spec.grid) settings.push_back("lambda=" + g);
  } else {
    settings = spec.grid;
  }

  // rows[setting][seed]
  std::vector<std::vector<double>> aucs(settings.size());
  for (const auto seed : spec.seeds) {
    const SeedWorld world = build_seed_world(spec, seed);
    const auto& sets = world.train;

    switch (spec.kind) {
      case AblationKind::lambda_sweep: {
        const auto data = mix_datasets(sets.real_anomalous, sets.real_normal, sets.synthetic_anomalous, sets.synthetic_normal);
        for (std::size_t i = 0; i < spec.grid.size(); ++i) {
          TrainConfig config = spec.base_train;
          config.ssls_enabled = true;
          config.lambda_learnable = spec.grid[i] == "learnable";
          if (!config.lambda_learnable) config.lambda = *detail::parse_double(spec.grid[i]);
          aucs[i].push_back(train_and_score(data, config, seed, world, spec));
        }
        break;
      }
      case AblationKind::data_scale_sweep: {
        const auto real_only = mix_datasets(sets.real_anomalous, sets.real_normal, {}, {});
        const auto mixed = mix_datasets(sets.real_anomalous, sets.real_normal, sets.synthetic_anomalous, sets.synthetic_normal);
        for (std::size_t i = 0; i < spec.grid.size(); ++i) {
          const double fraction = parse_fraction(spec.grid[i]);
          const auto subsample_seed = derive_seed(seed, "subsample");
          aucs[2 * i].push_back(
              train_and_score(subsample_real(real_only, fraction, subsample_seed), spec.base_train, seed, world, spec));
          aucs[2 * i + 1].push_back(
              train_and_score(subsample_real(mixed, fraction, subsample_seed), spec.base_train, seed, world, spec));
        }
        break;
      }
      case AblationKind::module_ablation: {
        for (std::size_t i = 0; i < spec.grid.size(); ++i) {
          const auto flags = parse_module_setting(spec.grid[i]);
          std::vector<VideoSample> synth_a, synth_n;
          if (flags.generation) {
            const FilterConfig filter{flags.filtering ? FilterPolicy::centroid_distance : FilterPolicy::none,
                                      spec.filter_percentile};
            auto kept = filter_synthetic(sets.real_anomalous, sets.real_normal, sets.synthetic_anomalous,
                                         sets.synthetic_normal, filter);
            synth_a = std::move(kept.synthetic_anomalous);
            synth_n = std::move(kept.synthetic_normal);
          }
          const auto data = mix_datasets(sets.real_anomalous, sets.real_normal, std::move(synth_a), std::move(synth_n));
          TrainConfig config = spec.base_train;
          config.ssls_enabled = flags.scaling;
          aucs[i].push_back(train_and_score(data, config, seed, world, spec));
        }
        break;
      }
    }
  }

  AblationTable table;
  for (std::size_t i = 0; i < settings.size(); ++i) {
    AblationSummary s;
    s.setting = settings[i];
    s.n_seeds = aucs[i].size();
    double sum = 0.0;
    for (std::size_t j = 0; j < aucs[i].size(); ++j) {
      table.rows.push_back({settings[i], spec.seeds[j], aucs[i][j]});
      sum += aucs[i][j];
    }
    s.mean_auc = sum / static_cast<double>(s.n_seeds);
    double ss = 0.0;
    for (const double a : aucs[i]) ss += (a - s.mean_auc) * (a - s.mean_auc);
    s.std_auc = s.n_seeds > 1 ? std::sqrt(ss / static_cast<double>(s.n_seeds - 1)) : 0.0;
    table.summary.push_back(s);
  }
  return table;
}

std::vector<std::pair<std::string, std::string>> ablation_config_keys() {
  return {
      {"kind", "lambda_sweep"},
      {"grid", ""},
      {"seeds", "1..10"},
      {"real_per_class", "80"},
      {"synthetic_per_class", "60"},
      {"test_per_class", "100"},
      {"filter_percentile", "95"},
  };
}

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto lo = detail::parse_uint(text.substr(0, dots));
    const auto hi = detail::parse_uint(text.substr(dots + 2));
    if (!lo || !hi || *lo > *hi) throw ValidationError("seeds range must be <lo>..<hi>, got '" + text + "'");
    for (auto s = *lo; s <= *hi; ++s) seeds.push_back(s);
    return seeds;
  }
  for (const auto& item : detail::split(text, ',')) {
    const auto v = detail::parse_uint(item);
    if (!v) throw ValidationError("seeds must be a list of integers or <lo>..<hi>, got '" + text + "'");
    seeds.push_back(*v);
  }
  return seeds;
}

}  // namespace

AblationSpec ablation_from_config(const RunConfig& cfg, std::vector<DescriptionPair> pairs) {
  AblationSpec spec;
  spec.kind = parse_ablation_kind(cfg.get("kind"));
  spec.grid = cfg.get_list("grid");
  if (spec.grid.empty()) spec.grid = default_grid(spec.kind);
  spec.seeds = parse_seeds(cfg.get("seeds"));
  spec.world = world_from_config(cfg);
  spec.base_train = train_from_config(cfg);
  spec.pairs = std::move(pairs);
  spec.real_per_class = cfg.get_uint("real_per_class");
  spec.synthetic_per_class = cfg.get_uint("synthetic_per_class");
  spec.test_per_class = cfg.get_uint("test_per_class");
  spec.filter_percentile = cfg.get_double("filter_percentile");
  spec.validate();
  return spec;
}

void write_ablation_csv(const AblationTable& table, const fs::path& dir) {
  std::ofstream rows(dir / "ablation.csv", std::ios::trunc);
  std::ofstream summary(dir / "summary.csv", std::ios::trunc);
  if (!rows || !summary) throw IoError("cannot write ablation tables under " + dir.string());
  rows << "setting,seed,auc\n";
  for (const auto& r : table.rows) rows << r.setting << ',' << r.seed << ',' << detail::format_double(r.auc) << '\n';
  summary << "setting,mean_auc,std_auc,n_seeds\n";
  for (const auto& s : table.summary) {
    summary << s.setting << ',' << detail::format_double(s.mean_auc) << ',' << detail::format_double(s.std_auc) << ','
            << s.n_seeds << '\n';
  }
}

}  // namespace gvvad
