// gvvad command-line front end: prompts, world, train, eval, ablate, gradcheck.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gvvad/ablation.hpp"
#include "gvvad/config.hpp"
#include "gvvad/datamodel.hpp"
#include "gvvad/errors.hpp"
#include "gvvad/eval.hpp"
#include "gvvad/gradcheck.hpp"
#include "gvvad/milcore.hpp"
#include "gvvad/promptgen.hpp"
#include "gvvad/worldsim.hpp"

namespace fs = std::filesystem;
using namespace gvvad;

namespace {

/// Per-subcommand state: the key schema plus whatever the user passed.
struct Command {
  std::string name;
  RunConfig cfg;
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
  // (config key, value given on the command line)
  std::list<std::pair<std::string, std::optional<std::string>>> flags;

  CLI::App* app = nullptr;

  void flag(const std::string& option, const std::string& key, const std::string& help) {
    flags.emplace_back(key, std::nullopt);
    app->add_option("--" + option, flags.back().second, help);
  }
};

void add_common(Command& cmd, bool out_required) {
  cmd.app->add_option("--config", cmd.config_path, "key=value config file");
  auto* out = cmd.app->add_option("--out", cmd.out, "output directory");
  if (out_required) out->required();
  cmd.app->add_option("--set", cmd.overrides, "override one key (key=value), repeatable");
}

/// defaults <- --config file <- named flags <- --set overrides.
void resolve(Command& cmd) {
  if (!cmd.config_path.empty()) cmd.cfg.load_file(cmd.config_path);
  for (const auto& [key, value] : cmd.flags) {
    if (value) cmd.cfg.set(key, *value, Provenance::flag);
  }
  for (const auto& o : cmd.overrides) cmd.cfg.apply_override(o);
}

fs::path prepare_out(const Command& cmd) {
  const fs::path out(cmd.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  cmd.cfg.write_resolved(out, cmd.name);
  return out;
}

std::vector<DescriptionPair> load_pairs(const std::string& path) {
  if (path.empty()) return build_repository(ElementInventory::standard(), std::nullopt, 0);
  return import_repository(path);
}

std::vector<std::size_t> parse_counts(const RunConfig& cfg, const std::string& key, std::size_t n) {
  const auto values = cfg.get_list(key);
  if (values.size() != n) {
    throw ValidationError(key + " needs " + std::to_string(n) + " comma-separated counts, got '" + cfg.get(key) + "'");
  }
  std::vector<std::size_t> out;
  for (const auto& v : values) {
    std::size_t pos = 0;
    unsigned long long parsed = 0;
    try {
      parsed = std::stoull(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ValidationError(key + ": '" + v + "' is not a count");
    out.push_back(static_cast<std::size_t>(parsed));
  }
  return out;
}

// ---- prompts ---------------------------------------------------------------

int run_prompts(Command& cmd) {
  resolve(cmd);
  const auto& inv_path = cmd.cfg.get("inventory");
  const auto inventory = inv_path.empty() ? ElementInventory::standard() : load_inventory(inv_path);
  std::optional<std::size_t> limit;
  if (!cmd.cfg.get("limit").empty()) limit = cmd.cfg.get_uint("limit");
  const auto pairs = build_repository(inventory, limit, cmd.cfg.get_uint("seed"));
  const auto out = prepare_out(cmd);
  export_repository(pairs, out / "prompts.tsv");
  std::cout << "wrote " << pairs.size() << " description pairs to " << (out / "prompts.tsv").string() << '\n';
  return 0;
}

// ---- world -----------------------------------------------------------------

int run_world(Command& cmd) {
  resolve(cmd);
  const WorldConfig world = world_from_config(cmd.cfg);
  const auto pairs = load_pairs(cmd.cfg.get("prompts"));
  const auto counts = parse_counts(cmd.cfg, "counts", 4);
  const auto test_counts = parse_counts(cmd.cfg, "test_counts", 2);
  const auto seed = cmd.cfg.get_uint("seed");

  const auto out = prepare_out(cmd);
  {
    std::ofstream f(out / "world.cfg", std::ios::trunc);
    if (!f) throw IoError("cannot write " + (out / "world.cfg").string());
    f << serialize_world(world);
  }

  const auto train = generate_dataset(world, pairs, {counts[0], counts[1], counts[2], counts[3]},
                                      derive_seed(seed, "train-world"), "train");
  std::vector<VideoSample> train_samples;
  for (const auto* set : {&train.real_anomalous, &train.real_normal, &train.synthetic_anomalous, &train.synthetic_normal}) {
    train_samples.insert(train_samples.end(), set->begin(), set->end());
  }
  save_manifest(write_samples(train_samples, out / "train", world.dim, world.clip_len), out / "train" / "manifest.txt");

  std::size_t n_test = 0;
  if (test_counts[0] + test_counts[1] > 0) {
    auto test = generate_dataset(world, pairs, {test_counts[0], test_counts[1], 0, 0}, derive_seed(seed, "test-world"),
                                 "test");
    std::vector<VideoSample> test_samples = std::move(test.real_anomalous);
    test_samples.insert(test_samples.end(), test.real_normal.begin(), test.real_normal.end());
    n_test = test_samples.size();
    save_manifest(write_samples(test_samples, out / "test", world.dim, world.clip_len), out / "test" / "manifest.txt");
  }
  std::cout << "wrote " << train_samples.size() << " training and " << n_test << " test videos under " << out.string()
            << '\n';
  return 0;
}

// ---- train -----------------------------------------------------------------

FilterPolicy parse_filter(const std::string& text) {
  if (text == "none") return FilterPolicy::none;
  if (text == "centroid_distance") return FilterPolicy::centroid_distance;
  throw ValidationError("filter must be none or centroid_distance, got '" + text + "'");
}

int run_train(Command& cmd) {
  resolve(cmd);
  if (cmd.cfg.get("train").empty()) throw ValidationError("train: no training manifest (--train)");
  TrainConfig config = train_from_config(cmd.cfg);
  const FilterConfig filter{parse_filter(cmd.cfg.get("filter")), cmd.cfg.get_double("filter_percentile")};

  const auto manifest = load_manifest(cmd.cfg.get("train"));
  const auto samples = load_samples(manifest);
  std::vector<VideoSample> real_a, real_n, synth_a, synth_n;
  for (const auto& s : samples) {
    auto& bucket = s.y == Label::anomalous ? (s.source == Source::real ? real_a : synth_a)
                                           : (s.source == Source::real ? real_n : synth_n);
    bucket.push_back(s);
  }
  auto kept = filter_synthetic(real_a, real_n, synth_a, synth_n, filter);
  const auto data = mix_datasets(std::move(real_a), std::move(real_n), std::move(kept.synthetic_anomalous),
                                 std::move(kept.synthetic_normal));

  Validator validator;
  std::vector<VideoSample> val_set;
  std::size_t val_clip_len = manifest.clip_len;
  if (!cmd.cfg.get("val").empty()) {
    const auto val_manifest = load_manifest(cmd.cfg.get("val"));
    val_set = load_samples(val_manifest);
    val_clip_len = val_manifest.clip_len;
    validator = [&](const ScorerParams& p) { return evaluate(p, val_set, val_clip_len).auc; };
  }

  const auto out = prepare_out(cmd);
  const auto result = train(data, config, {}, validator);
  save_params(result.params, out / "params.gvpm");
  write_history_csv(result.history, out / "history.csv");
  if (filter.policy != FilterPolicy::none) {
    std::ofstream f(out / "filter.txt", std::ios::trunc);
    if (!f) throw IoError("cannot write " + (out / "filter.txt").string());
    f << "rejected " << kept.rejected.size() << '\n';
    for (const auto& r : kept.rejected) f << r.id << ' ' << r.distance << ' ' << r.threshold << '\n';
  }
  const auto& last = result.history.back();
  std::cout << "trained " << last.epoch << " epochs, final L_total " << last.loss_total;
  if (last.val_auc) std::cout << ", val AUC " << *last.val_auc;
  std::cout << '\n';
  return 0;
}

// ---- eval ------------------------------------------------------------------

int run_eval(Command& cmd) {
  resolve(cmd);
  if (cmd.cfg.get("params").empty()) throw ValidationError("eval: no parameter file (--params)");
  if (cmd.cfg.get("test").empty()) throw ValidationError("eval: no test manifest (--test)");
  const auto& avg = cmd.cfg.get("averaging");
  Averaging averaging = Averaging::micro;
  if (avg == "macro") averaging = Averaging::macro;
  else if (avg != "micro") throw ValidationError("averaging must be micro or macro, got '" + avg + "'");

  const auto params = load_params(cmd.cfg.get("params"));
  const auto manifest = load_manifest(cmd.cfg.get("test"));
  const auto test_set = load_samples(manifest);
  const auto curves = cmd.cfg.get_list("curves");
  const bool svg = cmd.cfg.get_bool("svg");

  const auto result = evaluate(params, test_set, manifest.clip_len, averaging);
  const auto out = prepare_out(cmd);
  write_metrics(result, out / "metrics.txt");
  if (!curves.empty()) fs::create_directories(out / "curves");
  for (const auto& id : curves) {
    const auto base = out / "curves" / id;
    export_score_curve(result, id, fs::path(base.string() + ".csv"), svg ? fs::path(base.string() + ".svg") : fs::path{});
  }
  std::cout << "frame AUC (" << avg << ") " << result.auc << " over " << result.num_frames << " frames\n";
  return 0;
}

// ---- ablate ----------------------------------------------------------------

int run_ablate(Command& cmd) {
  resolve(cmd);
  // --seed narrows the sweep to a single replicate.
  if (cmd.cfg.provenance("seed") != Provenance::default_value) {
    cmd.cfg.set("seeds", cmd.cfg.get("seed"), cmd.cfg.provenance("seed"));
  }
  const auto spec = ablation_from_config(cmd.cfg, load_pairs(cmd.cfg.get("prompts")));
  const auto out = prepare_out(cmd);
  const auto table = run_ablation(spec);
  write_ablation_csv(table, out);
  for (const auto& s : table.summary) {
    std::cout << s.setting << "  mean AUC " << s.mean_auc << "  std " << s.std_auc << "  (" << s.n_seeds << " seeds)\n";
  }
  return 0;
}

// ---- gradcheck -------------------------------------------------------------

int run_gradcheck_cmd(Command& cmd, bool corrupt) {
  resolve(cmd);
  const auto report = run_gradcheck(cmd.cfg.get_uint("seed"), cmd.cfg.get_uint("batches"), corrupt);
  print_report(report, std::cout);
  if (!cmd.out.empty()) {
    const auto out = prepare_out(cmd);
    std::ofstream f(out / "gradcheck.txt", std::ios::trunc);
    if (!f) throw IoError("cannot write " + (out / "gradcheck.txt").string());
    print_report(report, f);
  }
  return report.passed() ? 0 : static_cast<int>(ExitCode::numeric);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gvvad: synthetic-video augmented weakly supervised anomaly detection"};
  app.require_subcommand(1);

  Command prompts{.name = "prompts"};
  prompts.app = app.add_subcommand("prompts", "build the description-pair repository");
  prompts.cfg.declare({{"inventory", ""}, {"limit", ""}, {"seed", "0"}});
  add_common(prompts, true);
  prompts.flag("inventory", "inventory", "element inventory file (default: built-in inventory)");
  prompts.flag("limit", "limit", "sample this many pairs instead of the full product");
  prompts.flag("seed", "seed", "seed for sampling");

  Command world{.name = "world"};
  world.app = app.add_subcommand("world", "simulate real and synthetic feature sequences");
  world.cfg.declare(world_config_keys());
  world.cfg.declare({{"prompts", ""}, {"counts", "40,40,30,30"}, {"test_counts", "50,50"}, {"seed", "0"}});
  add_common(world, true);
  world.flag("prompts", "prompts", "repository file (default: full built-in repository)");
  world.flag("counts", "counts", "real_anomalous,real_normal,synthetic_anomalous,synthetic_normal");
  world.flag("test-counts", "test_counts", "real test videos: anomalous,normal");
  world.flag("seed", "seed", "world seed");

  Command trainc{.name = "train"};
  trainc.app = app.add_subcommand("train", "train the clip scorer");
  trainc.cfg.declare(train_config_keys());
  trainc.cfg.declare({{"train", ""}, {"val", ""}, {"filter", "none"}, {"filter_percentile", "95"}, {"seed", "0"}});
  add_common(trainc, true);
  trainc.flag("train", "train", "training manifest");
  trainc.flag("val", "val", "validation manifest (frame labels required)");
  trainc.flag("filter", "filter", "synthetic video filter: none or centroid_distance");
  trainc.flag("seed", "seed", "training seed");

  Command evalc{.name = "eval"};
  evalc.app = app.add_subcommand("eval", "frame-level AUC on a labelled test set");
  evalc.cfg.declare({{"params", ""}, {"test", ""}, {"averaging", "micro"}, {"curves", ""}, {"svg", "false"}, {"seed", "0"}});
  add_common(evalc, true);
  evalc.flag("params", "params", "trained parameter file");
  evalc.flag("test", "test", "test manifest");
  evalc.flag("averaging", "averaging", "micro or macro");
  evalc.flag("curves", "curves", "comma-separated video ids to export score curves for");
  evalc.flag("seed", "seed", "unused; recorded for completeness");
  bool want_svg = false;
  evalc.app->add_flag("--svg", want_svg, "also render curves as SVG");

  Command ablate{.name = "ablate"};
  ablate.app = app.add_subcommand("ablate", "run a lambda, data-scale or module ablation sweep");
  ablate.cfg.declare(ablation_config_keys());
  ablate.cfg.declare(world_config_keys());
  ablate.cfg.declare(train_config_keys());
  ablate.cfg.declare({{"prompts", ""}, {"seed", "0"}});
  add_common(ablate, true);
  ablate.flag("seed", "seed", "run a single replicate with this seed");

  Command grad{.name = "gradcheck"};
  grad.app = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  grad.cfg.declare({{"seed", "0"}, {"batches", "10"}});
  add_common(grad, false);
  grad.flag("seed", "seed", "seed for the random batches");
  bool corrupt = false;
  grad.app->add_flag("--corrupt-gradient", corrupt)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::validation);
  }

  try {
    if (*prompts.app) return run_prompts(prompts);
    if (*world.app) return run_world(world);
    if (*trainc.app) return run_train(trainc);
    if (*evalc.app) {
      if (want_svg) evalc.overrides.insert(evalc.overrides.begin(), "svg=true");
      return run_eval(evalc);
    }
    if (*ablate.app) return run_ablate(ablate);
    if (*grad.app) return run_gradcheck_cmd(grad, corrupt);
  } catch (const Error& e) {
    std::cerr << "gvvad: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "gvvad: " << e.what() << '\n';
    return static_cast<int>(ExitCode::io);
  } catch (const std::exception& e) {
    std::cerr << "gvvad: " << e.what() << '\n';
    return static_cast<int>(ExitCode::numeric);
  }
  return static_cast<int>(ExitCode::validation);
}
