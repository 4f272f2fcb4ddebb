// Minimal end-to-end library walkthrough: train a small ICFM data predictor
// on the 1-D standard Gaussian world, then compare one-step DDP inference
// against the analytic conditional mean E[x0 | y] = y / 2.

#include <cstdio>

#include "flowse/flowse.hpp"

int main() {
  using namespace flowse;

  const GaussianWorld world = GaussianWorld::standard_1d();

  TrainConfig cfg;
  cfg.path = {PathFamily::Icfm, 2.6, 0.1};
  cfg.loss_kind = LossKind::Dp;
  cfg.n_steps = 1500;
  cfg.batch_size = 64;
  cfg.hidden = {64, 64};
  cfg.seed = 7;

  const BatchSource source = [&world](int n, Rng& rng) {
    return sample_batch(world, static_cast<std::size_t>(n), rng);
  };
  const TrainResult result = train(cfg, source);
  std::printf("trained %d steps, final loss %.5f\n", cfg.n_steps, result.loss_trace.back());

  Rng rng(99);
  const std::size_t n_eval = 2000;
  const PairedBatch eval = sample_batch(world, n_eval, rng);
  double mse_model = 0.0, mse_oracle = 0.0;
  for (std::size_t i = 0; i < n_eval; ++i) {
    const double xhat = ddp_infer(result.model, eval.y[i])[0];
    const double xstar = conditional_mean_x0_given_y(world, eval.y[i])[0];
    mse_model += (xhat - eval.x0[i][0]) * (xhat - eval.x0[i][0]);
    mse_oracle += (xstar - eval.x0[i][0]) * (xstar - eval.x0[i][0]);
  }
  mse_model /= static_cast<double>(n_eval);
  mse_oracle /= static_cast<double>(n_eval);

  std::printf("ddp mse       %.5f\n", mse_model);
  std::printf("oracle mse    %.5f\n", mse_oracle);
  std::printf("analytic mmse %.5f\n", conditional_mmse(world));
  return 0;
}
