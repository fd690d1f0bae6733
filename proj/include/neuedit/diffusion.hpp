#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "neuedit/codec.hpp"
#include "neuedit/common.hpp"
#include "neuedit/denoiser.hpp"
#include "neuedit/matrix.hpp"
#include "neuedit/schedule.hpp"

namespace neuedit {

inline LatentVideo gaussian_latent(int frames, int wp, int hp, int d_lat, std::uint64_t seed) {
  LatentVideo out(frames, wp, hp, d_lat);
  Rng rng(seed);
  rng.fill_gaussian(out.z);
  return out;
}

// Closed-form forward diffusion: z_t = sqrt(ab_t) z0 + sqrt(1 - ab_t) eps.
// t = 0 is the identity boundary.
inline LatentVideo forward_diffuse(const LatentVideo& z0, int t, const LatentVideo& eps,
                                   const NoiseSchedule& sched) {
  require(z0.same_shape(eps), "shape-mismatch", "forward_diffuse: z0/eps shapes differ");
  require(t >= 0 && t <= sched.t_steps, "t-out-of-range", "forward_diffuse: t outside [0, T]");
  const double ab = sched.alpha_bar_at(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  LatentVideo out = z0;
  for (std::size_t i = 0; i < out.z.size(); ++i) out.z[i] = a * z0.z[i] + b * eps.z[i];
  return out;
}

namespace detail {

// Deterministic DDIM move between two arbitrary schedule positions via the
// x0-prediction form. Exact mutual inverse for a fixed eps_hat.
inline LatentVideo ddim_between(const LatentVideo& z, const LatentVideo& eps_hat, int t_from,
                                int t_to, const NoiseSchedule& sched) {
  require(z.same_shape(eps_hat), "shape-mismatch", "ddim: z/eps_hat shapes differ");
  const double ab_f = sched.alpha_bar_at(t_from);
  const double ab_t = sched.alpha_bar_at(t_to);
  const double sf = std::sqrt(ab_f), nf = std::sqrt(1.0 - ab_f);
  const double st = std::sqrt(ab_t), nt = std::sqrt(1.0 - ab_t);
  LatentVideo out = z;
  for (std::size_t i = 0; i < z.z.size(); ++i) {
    const double x0 = (z.z[i] - nf * eps_hat.z[i]) / sf;
    out.z[i] = st * x0 + nt * eps_hat.z[i];
  }
  return out;
}

// Uniformly spaced sub-sequence of timesteps T = ts[0] > ... > ts[n] = 0.
inline std::vector<int> ddim_timesteps(int t_steps, int n_steps) {
  require(n_steps >= 1 && n_steps <= t_steps, "bad-config",
          "ddim_timesteps: need 1 <= n_steps <= T");
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(n_steps) + 1);
  for (int k = n_steps; k >= 0; --k) {
    const int t = static_cast<int>(std::lround(static_cast<double>(t_steps) * k / n_steps));
    if (ts.empty() || ts.back() != t) ts.push_back(t);
  }
  return ts;
}

}  // namespace detail

inline LatentVideo ddim_step(const LatentVideo& z_t, const LatentVideo& eps_hat, int t,
                             const NoiseSchedule& sched) {
  require(t >= 1 && t <= sched.t_steps, "t-out-of-range", "ddim_step: t outside [1, T]");
  return detail::ddim_between(z_t, eps_hat, t, t - 1, sched);
}

inline LatentVideo ddim_invert_step(const LatentVideo& z_t, const LatentVideo& eps_hat, int t,
                                    const NoiseSchedule& sched) {
  require(t >= 0 && t <= sched.t_steps - 1, "t-out-of-range",
          "ddim_invert_step: t outside [0, T-1]");
  return detail::ddim_between(z_t, eps_hat, t, t + 1, sched);
}

using EpsFn = std::function<LatentVideo(const LatentVideo&, int)>;

struct DenoiseResult {
  LatentVideo z0_estimate;
  std::vector<LatentVideo> trajectory;  // length n_steps + 1 when requested
};

// Gradual denoising from z_init at t = T down to 0. The predictor is
// evaluated at the upper end of each edge.
inline DenoiseResult denoise_with(const EpsFn& eps_fn, const LatentVideo& z_init,
                                  const NoiseSchedule& sched, int n_steps,
                                  bool keep_trajectory = false) {
  const auto ts = detail::ddim_timesteps(sched.t_steps, n_steps);
  DenoiseResult res;
  LatentVideo z = z_init;
  if (keep_trajectory) res.trajectory.push_back(z);
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const int t_from = ts[i], t_to = ts[i + 1];
    const LatentVideo eps_hat = eps_fn(z, t_from);
    z = detail::ddim_between(z, eps_hat, t_from, t_to, sched);
    if (keep_trajectory) res.trajectory.push_back(z);
  }
  res.z0_estimate = std::move(z);
  return res;
}

// DDIM inversion from data latents toward t = T. The predictor is evaluated
// at the destination (upper) timestep of each edge — the same conditioning
// point the denoising pass uses for that edge, so a predictor that is fixed
// per step inverts exactly.
inline LatentVideo invert_with(const EpsFn& eps_fn, const LatentVideo& z0,
                               const NoiseSchedule& sched, int n_steps) {
  auto ts = detail::ddim_timesteps(sched.t_steps, n_steps);
  std::reverse(ts.begin(), ts.end());  // 0 ... T
  LatentVideo z = z0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const int t_from = ts[i], t_to = ts[i + 1];
    const LatentVideo eps_hat = eps_fn(z, t_to);
    z = detail::ddim_between(z, eps_hat, t_from, t_to, sched);
  }
  return z;
}

inline EpsFn model_eps_fn(const DenoiserModel& model, const Matrix& cond) {
  return [&model, cond](const LatentVideo& z, int t) { return model.forward(z, t, cond).eps_hat; };
}

inline DenoiseResult denoise(const DenoiserModel& model, const LatentVideo& z_init,
                             const Matrix& cond, const NoiseSchedule& sched, int n_steps,
                             bool keep_trajectory = false) {
  return denoise_with(model_eps_fn(model, cond), z_init, sched, n_steps, keep_trajectory);
}

inline LatentVideo invert(const DenoiserModel& model, const LatentVideo& z0, const Matrix& cond,
                          const NoiseSchedule& sched, int n_steps) {
  return invert_with(model_eps_fn(model, cond), z0, sched, n_steps);
}

// ---------------------------------------------------------------------------
// Variational-bound oracle

struct GaussianPosterior {
  std::vector<double> mean;
  double variance = 0.0;
};

// Parameters of q(x_t | x_{t+1}, x_0) from the schedule, 1 <= t <= T-1.
inline GaussianPosterior diffusion_posterior(const std::vector<double>& z0,
                                             const std::vector<double>& z_tplus1, int t,
                                             const NoiseSchedule& sched) {
  require(z0.size() == z_tplus1.size(), "shape-mismatch", "posterior: size mismatch");
  require(t >= 1 && t <= sched.t_steps - 1, "t-out-of-range", "posterior: t outside [1, T-1]");
  const double ab_t = sched.alpha_bar_at(t);
  const double ab_t1 = sched.alpha_bar_at(t + 1);
  const double a_t1 = ab_t1 / ab_t;
  const double beta_t1 = 1.0 - a_t1;
  const double c0 = std::sqrt(ab_t) * beta_t1 / (1.0 - ab_t1);
  const double c1 = std::sqrt(a_t1) * (1.0 - ab_t) / (1.0 - ab_t1);
  GaussianPosterior post;
  post.mean.resize(z0.size());
  for (std::size_t i = 0; i < z0.size(); ++i) post.mean[i] = c0 * z0[i] + c1 * z_tplus1[i];
  post.variance = (1.0 - ab_t) / (1.0 - ab_t1) * beta_t1;
  return post;
}

// Mean per-dimension KL( q(x_t | x_{t+1}, x_0) || N(mu_theta, var_theta) ).
inline double kl_oracle(const std::vector<double>& z0, const std::vector<double>& z_tplus1,
                        const std::vector<double>& mu_theta, double var_theta, int t,
                        const NoiseSchedule& sched) {
  require(var_theta > 0.0, "nonpositive-variance", "kl_oracle: var_theta must be > 0");
  require(mu_theta.size() == z0.size(), "shape-mismatch", "kl_oracle: mu_theta size mismatch");
  const auto post = diffusion_posterior(z0, z_tplus1, t, sched);
  const double log_ratio = std::log(var_theta / post.variance);
  double acc = 0.0;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    const double d = post.mean[i] - mu_theta[i];
    acc += d * d;
  }
  const double n = static_cast<double>(z0.size());
  return 0.5 * (log_ratio + post.variance / var_theta - 1.0) + acc / (2.0 * var_theta * n);
}

inline double kl_oracle(const LatentVideo& z0, const LatentVideo& z_tplus1,
                        const LatentVideo& mu_theta, double var_theta, int t,
                        const NoiseSchedule& sched) {
  return kl_oracle(z0.z, z_tplus1.z, mu_theta.z, var_theta, t, sched);
}

// Model-implied reverse-transition mean at step t+1: the DDPM posterior mean
// with x0 eliminated via the model's noise prediction.
inline std::vector<double> model_posterior_mean(const std::vector<double>& z_tplus1,
                                                const std::vector<double>& eps_hat, int t,
                                                const NoiseSchedule& sched) {
  require(z_tplus1.size() == eps_hat.size(), "shape-mismatch", "model_posterior_mean: size mismatch");
  const double ab_t1 = sched.alpha_bar_at(t + 1);
  const double a_t1 = sched.alpha_at(t + 1);
  const double beta_t1 = 1.0 - a_t1;
  const double c = beta_t1 / std::sqrt(1.0 - ab_t1);
  const double inv = 1.0 / std::sqrt(a_t1);
  std::vector<double> mu(z_tplus1.size());
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = inv * (z_tplus1[i] - c * eps_hat[i]);
  return mu;
}

// ---------------------------------------------------------------------------
// Training

struct TrainExample {
  LatentVideo z0;
  Matrix cond;
};

// One seeded draw of the denoising objective: t ~ U{1..T}, eps ~ N(0, I),
// loss = mean squared error between eps and the prediction at z_t.
inline double training_loss_with(const EpsFn& eps_fn, const LatentVideo& z0,
                                 const NoiseSchedule& sched, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "loss.draw"));
  const int t = static_cast<int>(rng.uniform_int(1, sched.t_steps));
  LatentVideo eps(z0.frames, z0.wp, z0.hp, z0.d_lat);
  rng.fill_gaussian(eps.z);
  const LatentVideo z_t = forward_diffuse(z0, t, eps, sched);
  const LatentVideo eps_hat = eps_fn(z_t, t);
  double acc = 0.0;
  for (std::size_t i = 0; i < eps.z.size(); ++i) {
    const double d = eps_hat.z[i] - eps.z[i];
    acc += d * d;
  }
  return acc / static_cast<double>(eps.z.size());
}

inline double training_loss(const DenoiserModel& model, const LatentVideo& z0, const Matrix& cond,
                            const NoiseSchedule& sched, std::uint64_t seed) {
  require(cond.rows() >= 1, "dim-mismatch", "training_loss: cond must have at least one row");
  return training_loss_with(model_eps_fn(model, cond), z0, sched, seed);
}

struct TrainOptions {
  int epochs = 1;
  double lr = 2e-3;
  std::uint64_t seed = 0;
  // Adam moments; fixed defaults.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Global L2 gradient clip; the epsilon objective is heavy-tailed in t.
  double grad_clip = 5.0;
};

struct TrainResult {
  std::vector<double> loss_curve;  // one entry per optimization step
};

// Deterministic Adam training over the dataset: example order, timestep and
// noise draws all derive from the seed. Throws on non-finite loss.
inline TrainResult train(DenoiserModel& model, const std::vector<TrainExample>& dataset,
                         const NoiseSchedule& sched, const TrainOptions& opt) {
  require(!dataset.empty(), "empty-dataset", "train: dataset must be nonempty");
  TrainResult result;
  const int n = model.param_count();
  std::vector<double> m(static_cast<std::size_t>(n), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  DenoiserModel::Cache cache;
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    // Fixed-order pass: seeded Fisher-Yates shuffle per epoch.
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(opt.seed, "train.order", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    for (const std::size_t idx : order) {
      const TrainExample& ex = dataset[idx];
      Rng rng(derive_seed(opt.seed, "train.step", step));
      const int t = static_cast<int>(rng.uniform_int(1, sched.t_steps));
      LatentVideo eps(ex.z0.frames, ex.z0.wp, ex.z0.hp, ex.z0.d_lat);
      rng.fill_gaussian(eps.z);
      const LatentVideo z_t = forward_diffuse(ex.z0, t, eps, sched);

      const DenoiserOutput out = model.forward(z_t, t, ex.cond, &cache);
      double loss = 0.0;
      LatentVideo d_eps(eps.frames, eps.wp, eps.hp, eps.d_lat);
      const double inv_n = 1.0 / static_cast<double>(eps.z.size());
      for (std::size_t i = 0; i < eps.z.size(); ++i) {
        const double d = out.eps_hat.z[i] - eps.z[i];
        loss += d * d * inv_n;
        d_eps.z[i] = 2.0 * d * inv_n;
      }
      require(std::isfinite(loss), "divergence", "train: loss became non-finite");
      result.loss_curve.push_back(loss);

      std::vector<double> grad = model.backward(z_t, ex.cond, cache, d_eps);
      if (opt.grad_clip > 0.0) {
        const double gn = norm2(grad.data(), static_cast<int>(grad.size()));
        if (gn > opt.grad_clip) {
          const double scale = opt.grad_clip / gn;
          for (double& g : grad) g *= scale;
        }
      }

      ++step;
      const double b1c = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
      const double b2c = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
      auto& params = model.params();
      for (int i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        m[ui] = opt.beta1 * m[ui] + (1.0 - opt.beta1) * grad[ui];
        v[ui] = opt.beta2 * v[ui] + (1.0 - opt.beta2) * grad[ui] * grad[ui];
        const double mh = m[ui] / b1c;
        const double vh = v[ui] / b2c;
        params[ui] -= opt.lr * mh / (std::sqrt(vh) + opt.adam_eps);
      }
    }
  }
  return result;
}

}  // namespace neuedit
