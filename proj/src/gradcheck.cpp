#include "gvvad/gradcheck.hpp"

#include <algorithm>
#include <iomanip>

#include "gvvad/milcore.hpp"
#include "gvvad/rng.hpp"
#include "gvvad/worldsim.hpp"

namespace gvvad {

namespace {

constexpr double fd_step = 1e-5;

std::vector<VideoSample> random_batch_videos(Rng& rng, std::size_t dim, std::size_t pairs) {
  WorldConfig world = WorldConfig::with_gaps(dim, 2.0, 1.0);
  world.clips_min = 5;
  world.clips_max = 12;
  world.clip_len = 1;
  const DescriptionPair pair{0, "a", "n", {"v", "l", "s", "e"}};
  std::vector<VideoSample> videos;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto src_a = rng.below(2) ? Source::synthetic : Source::real;
    const auto src_n = rng.below(2) ? Source::synthetic : Source::real;
    videos.push_back(generate_video(world, pair, Label::anomalous, src_a, rng.next_u64(), "a" + std::to_string(i)).sample);
    videos.push_back(generate_video(world, pair, Label::normal, src_n, rng.next_u64(), "n" + std::to_string(i)).sample);
  }
  return videos;
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t seed, std::size_t batches, bool corrupt) {
  GradcheckReport report;
  report.batches = batches;
  report.blocks = {{"w1", 0, 0}, {"b1", 0, 0}, {"w2", 0, 0}, {"b2", 0, 0}, {"rho", 0, 0}};

  for (std::size_t b = 0; b < batches; ++b) {
    Rng rng(derive_seed(seed, b));
    const std::size_t dim = 3 + rng.below(4);
    const std::size_t hidden = 2 + rng.below(5);
    const auto videos = random_batch_videos(rng, dim, 3);
    std::vector<VideoPair> batch;
    for (std::size_t i = 0; i + 1 < videos.size(); i += 2) batch.push_back({&videos[i], &videos[i + 1]});

    TrainConfig config;
    config.k_rule = TopKRule{TopKRule::Kind::fraction, 0.3};
    config.lambda = 0.1 + 1.9 * rng.uniform();
    config.lambda_learnable = b % 2 == 1;
    config.granularity = b % 3 == 2 ? SslsGranularity::sample : SslsGranularity::pair;
    const LapHook hook = b % 2 == 0 ? smoothness_hook(0.3) : LapHook{};
    const double rho = rng.normal();

    ScorerParams params = ScorerParams::initialize(hidden, dim, rng.next_u64());
    for (auto& v : params.w2) v = rng.normal();
    for (auto& v : params.b1) v = 0.5 * rng.normal();
    params.b2 = 0.5 * rng.normal();

    const auto analytic = total_loss_and_grads(params, batch, config, hook, rho);
    VectorXd grad_analytic = analytic.grad;
    if (corrupt && b == 0) grad_analytic[0] += 1e-2 * std::max(1.0, std::abs(grad_analytic[0]));

    const auto loss_at = [&](const VectorXd& theta) {
      return total_loss_and_grads(ScorerParams::unflatten(theta, hidden, dim), batch, config, hook, rho).loss.total;
    };
    const VectorXd grad_numeric = finite_diff_grad(loss_at, params.flatten(), fd_step);

    const std::size_t offsets[] = {0, hidden * dim, hidden * dim + hidden, hidden * dim + 2 * hidden,
                                   hidden * dim + 2 * hidden + 1};
    for (std::size_t blk = 0; blk < 4; ++blk) {
      for (std::size_t i = offsets[blk]; i < offsets[blk + 1]; ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        const double err = relative_error(grad_analytic[idx], grad_numeric[idx]);
        report.blocks[blk].max_rel_error = std::max(report.blocks[blk].max_rel_error, err);
        ++report.blocks[blk].count;
      }
    }
    if (config.lambda_learnable) {
      const auto rho_loss = [&](const VectorXd& r) {
        return total_loss_and_grads(params, batch, config, hook, r[0]).loss.total;
      };
      const VectorXd numeric_rho = finite_diff_grad(rho_loss, VectorXd::Constant(1, rho), fd_step);
      const double err = relative_error(analytic.grad_rho, numeric_rho[0]);
      report.blocks[4].max_rel_error = std::max(report.blocks[4].max_rel_error, err);
      ++report.blocks[4].count;
    }
  }
  for (const auto& blk : report.blocks) report.max_rel_error = std::max(report.max_rel_error, blk.max_rel_error);
  return report;
}

void print_report(const GradcheckReport& report, std::ostream& os) {
  os << "gradcheck: " << report.batches << " batches, central differences h=" << fd_step << '\n';
  for (const auto& blk : report.blocks) {
    os << "  " << std::left << std::setw(4) << blk.name << " entries=" << std::setw(5) << blk.count
       << " max_rel_error=" << std::scientific << std::setprecision(3) << blk.max_rel_error << std::defaultfloat << '\n';
  }
  os << "max_rel_error " << std::scientific << std::setprecision(3) << report.max_rel_error << std::defaultfloat
     << " tolerance " << report.tolerance << '\n'
     << (report.passed() ? "PASS" : "FAIL") << '\n';
}

}  // namespace gvvad
