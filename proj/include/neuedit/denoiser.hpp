#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "neuedit/codec.hpp"
#include "neuedit/common.hpp"
#include "neuedit/matrix.hpp"
#include "neuedit/schedule.hpp"

namespace neuedit {

struct DenoiserConfig {
  int d_lat = 192;
  int d_model = 64;
  int d_text = 32;  // prompt feature dimension (keys/values project from it)
  int wp = 8;
  int hp = 8;
  int frames = 8;
  bool temporal_mixing = true;

  int patches() const { return wp * hp; }

  bool operator==(const DenoiserConfig& o) const {
    return d_lat == o.d_lat && d_model == o.d_model && d_text == o.d_text && wp == o.wp &&
           hp == o.hp && frames == o.frames && temporal_mixing == o.temporal_mixing;
  }
};

struct DenoiserOutput {
  LatentVideo eps_hat;
  std::vector<Matrix> attention;  // per frame, patches x M, row-stochastic
};

// Epsilon predictor: patch/time input projection, one single-head
// cross-attention block over the prompt features, optional temporal mixing,
// output projection. The projection head emits a clean-latent estimate which
// the schedule converts to the noise prediction; an additive-only time
// conditioning cannot express the 1/sqrt(1 - ab_t) gain the epsilon target
// carries, while the clean-latent target is nearly step-independent.
// Parameters live in one flat vector so training, checkpointing and
// finite-difference probes all see the same layout.
class DenoiserModel {
 public:
  DenoiserModel() = default;

  DenoiserModel(const DenoiserConfig& cfg, const NoiseSchedule& sched)
      : cfg_(cfg), sched_(sched) {
    offs_.w_in = 0;
    offs_.b_in = offs_.w_in + cfg.d_model * cfg.d_lat;
    offs_.w_q = offs_.b_in + cfg.d_model;
    offs_.w_k = offs_.w_q + cfg.d_model * cfg.d_model;
    offs_.w_v = offs_.w_k + cfg.d_model * cfg.d_text;
    offs_.w_o = offs_.w_v + cfg.d_model * cfg.d_text;
    offs_.w_out = offs_.w_o + cfg.d_model * cfg.d_model;
    offs_.b_out = offs_.w_out + cfg.d_lat * cfg.d_model;
    n_params_ = offs_.b_out + cfg.d_lat;
    params_.assign(static_cast<std::size_t>(n_params_), 0.0);
    build_position_table();
  }

  const DenoiserConfig& config() const { return cfg_; }
  int param_count() const { return n_params_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  void init_params(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "denoiser.init"));
    auto fill = [&](int off, int rows, int cols, double scale) {
      for (int i = 0; i < rows * cols; ++i)
        params_[static_cast<std::size_t>(off + i)] = scale * rng.gaussian();
    };
    fill(offs_.w_in, cfg_.d_model, cfg_.d_lat, 1.0 / std::sqrt(static_cast<double>(cfg_.d_lat)));
    fill(offs_.b_in, 1, cfg_.d_model, 0.0);
    const double sm = 1.0 / std::sqrt(static_cast<double>(cfg_.d_model));
    const double st = 1.0 / std::sqrt(static_cast<double>(cfg_.d_text));
    fill(offs_.w_q, cfg_.d_model, cfg_.d_model, 2.0 * sm);
    fill(offs_.w_k, cfg_.d_model, cfg_.d_text, 2.0 * st);
    fill(offs_.w_v, cfg_.d_model, cfg_.d_text, st);
    fill(offs_.w_o, cfg_.d_model, cfg_.d_model, sm);
    fill(offs_.w_out, cfg_.d_lat, cfg_.d_model, sm);
    fill(offs_.b_out, 1, cfg_.d_lat, 0.0);
  }

  // Intermediate activations kept for the hand-derived backward pass.
  struct Cache {
    std::vector<double> h0, q, ctx, h1, h2;  // (L*P) x d_model, flattened
    std::vector<double> attn;                // (L*P) x M
    std::vector<double> keys, vals;          // M x d_model
    int m_words = 0;
    double x0_to_eps = 0.0;  // sqrt(ab_t) / sqrt(1 - ab_t) at the forward t
  };

  DenoiserOutput forward(const LatentVideo& z, int t, const Matrix& w, Cache* cache = nullptr) const {
    require(z.d_lat == cfg_.d_lat && z.wp == cfg_.wp && z.hp == cfg_.hp,
            "shape-mismatch", "denoiser: latent shape does not match model config");
    require(z.frames == cfg_.frames, "shape-mismatch", "denoiser: frame count mismatch");
    require(w.rows() >= 1 && w.cols() == cfg_.d_text, "dim-mismatch",
            "denoiser: prompt features must be M x d_text with M >= 1");
    require(t >= 1 && t <= sched_.t_steps, "t-out-of-range", "denoiser: t outside [1, T]");

    const int L = z.frames, P = z.patches(), D = cfg_.d_model, DT = cfg_.d_text, M = w.rows();
    const int n_states = L * P;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(D));

    std::vector<double> te(static_cast<std::size_t>(D));
    time_features(t, te.data());

    Cache local;
    Cache& c = cache != nullptr ? *cache : local;
    c.m_words = M;
    c.h0.assign(static_cast<std::size_t>(n_states) * D, 0.0);
    c.q.assign(static_cast<std::size_t>(n_states) * D, 0.0);
    c.ctx.assign(static_cast<std::size_t>(n_states) * D, 0.0);
    c.h1.assign(static_cast<std::size_t>(n_states) * D, 0.0);
    c.h2.assign(static_cast<std::size_t>(n_states) * D, 0.0);
    c.attn.assign(static_cast<std::size_t>(n_states) * M, 0.0);
    c.keys.assign(static_cast<std::size_t>(M) * D, 0.0);
    c.vals.assign(static_cast<std::size_t>(M) * D, 0.0);

    const double* w_in = params_.data() + offs_.w_in;
    const double* b_in = params_.data() + offs_.b_in;
    const double* w_q = params_.data() + offs_.w_q;
    const double* w_k = params_.data() + offs_.w_k;
    const double* w_v = params_.data() + offs_.w_v;
    const double* w_o = params_.data() + offs_.w_o;
    const double* w_out = params_.data() + offs_.w_out;
    const double* b_out = params_.data() + offs_.b_out;

    // Keys/values from the prompt, shared by every patch.
    for (int j = 0; j < M; ++j) {
      const double* wj = w.row(j);
      for (int r = 0; r < D; ++r) {
        c.keys[static_cast<std::size_t>(j) * D + r] = dot(w_k + static_cast<std::size_t>(r) * DT, wj, DT);
        c.vals[static_cast<std::size_t>(j) * D + r] = dot(w_v + static_cast<std::size_t>(r) * DT, wj, DT);
      }
    }

    for (int l = 0; l < L; ++l) {
      for (int p = 0; p < P; ++p) {
        const int s = l * P + p;
        const double* x = z.z.data() + z.index(l, p, 0);
        double* h0 = c.h0.data() + static_cast<std::size_t>(s) * D;
        const double* pe = pos_table_.data() + static_cast<std::size_t>(s) * D;
        for (int r = 0; r < D; ++r)
          h0[r] = dot(w_in + static_cast<std::size_t>(r) * cfg_.d_lat, x, cfg_.d_lat) + b_in[r] +
                  te[static_cast<std::size_t>(r)] + pe[r];

        double* q = c.q.data() + static_cast<std::size_t>(s) * D;
        for (int r = 0; r < D; ++r) q[r] = dot(w_q + static_cast<std::size_t>(r) * D, h0, D);

        // Softmax attention over prompt words.
        double* a = c.attn.data() + static_cast<std::size_t>(s) * M;
        double max_logit = -1e300;
        for (int j = 0; j < M; ++j) {
          a[j] = att_scale * dot(q, c.keys.data() + static_cast<std::size_t>(j) * D, D);
          max_logit = std::max(max_logit, a[j]);
        }
        double denom = 0.0;
        for (int j = 0; j < M; ++j) {
          a[j] = std::exp(a[j] - max_logit);
          denom += a[j];
        }
        for (int j = 0; j < M; ++j) a[j] /= denom;

        double* ctx = c.ctx.data() + static_cast<std::size_t>(s) * D;
        for (int j = 0; j < M; ++j) {
          const double* vj = c.vals.data() + static_cast<std::size_t>(j) * D;
          for (int r = 0; r < D; ++r) ctx[r] += a[j] * vj[r];
        }

        double* h1 = c.h1.data() + static_cast<std::size_t>(s) * D;
        for (int r = 0; r < D; ++r) h1[r] = h0[r] + dot(w_o + static_cast<std::size_t>(r) * D, ctx, D);
      }
    }

    // Temporal mixing: average each patch state with the same patch in
    // adjacent frames (mean over existing neighbors).
    if (cfg_.temporal_mixing && L > 1) {
      for (int l = 0; l < L; ++l) {
        const int lo = std::max(0, l - 1), hi = std::min(L - 1, l + 1);
        const double inv = 1.0 / (hi - lo + 1);
        for (int p = 0; p < P; ++p) {
          double* h2 = c.h2.data() + (static_cast<std::size_t>(l) * P + p) * D;
          for (int m = lo; m <= hi; ++m) {
            const double* h1 = c.h1.data() + (static_cast<std::size_t>(m) * P + p) * D;
            for (int r = 0; r < D; ++r) h2[r] += inv * h1[r];
          }
        }
      }
    } else {
      c.h2 = c.h1;
    }

    // Head output y is the clean-latent estimate; eps_hat follows from the
    // schedule identity z_t = sqrt(ab) x0 + sqrt(1-ab) eps.
    const double ab = sched_.alpha_bar_at(t);
    const double inv_noise = 1.0 / std::sqrt(1.0 - ab);
    const double ratio = std::sqrt(ab) * inv_noise;
    c.x0_to_eps = ratio;

    DenoiserOutput out;
    out.eps_hat = LatentVideo(L, z.wp, z.hp, cfg_.d_lat);
    for (int s = 0; s < n_states; ++s) {
      const double* h2 = c.h2.data() + static_cast<std::size_t>(s) * D;
      const double* x = z.z.data() + static_cast<std::size_t>(s) * cfg_.d_lat;
      double* e = out.eps_hat.z.data() + static_cast<std::size_t>(s) * cfg_.d_lat;
      for (int r = 0; r < cfg_.d_lat; ++r) {
        const double y = dot(w_out + static_cast<std::size_t>(r) * D, h2, D) + b_out[r];
        e[r] = inv_noise * x[r] - ratio * y;
      }
    }

    out.attention.reserve(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
      Matrix m(P, M);
      std::memcpy(m.data().data(), c.attn.data() + static_cast<std::size_t>(l) * P * M,
                  static_cast<std::size_t>(P) * M * sizeof(double));
      out.attention.push_back(std::move(m));
    }
    return out;
  }

  // Gradient of a scalar loss with respect to all parameters, given
  // d_loss/d_eps_hat. Mirrors forward() exactly.
  std::vector<double> backward(const LatentVideo& z, const Matrix& w, const Cache& c,
                               const LatentVideo& d_eps) const {
    const int L = z.frames, P = z.patches(), D = cfg_.d_model, DT = cfg_.d_text, M = c.m_words;
    const int n_states = L * P;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(D));

    std::vector<double> grad(static_cast<std::size_t>(n_params_), 0.0);
    double* g_w_in = grad.data() + offs_.w_in;
    double* g_b_in = grad.data() + offs_.b_in;
    double* g_w_q = grad.data() + offs_.w_q;
    double* g_w_k = grad.data() + offs_.w_k;
    double* g_w_v = grad.data() + offs_.w_v;
    double* g_w_o = grad.data() + offs_.w_o;
    double* g_w_out = grad.data() + offs_.w_out;
    double* g_b_out = grad.data() + offs_.b_out;

    const double* w_q = params_.data() + offs_.w_q;
    const double* w_o = params_.data() + offs_.w_o;
    const double* w_out = params_.data() + offs_.w_out;

    // d(eps_hat)/d(head output y) = -x0_to_eps, elementwise.
    std::vector<double> dh2(static_cast<std::size_t>(n_states) * D, 0.0);
    for (int s = 0; s < n_states; ++s) {
      const double* de = d_eps.z.data() + static_cast<std::size_t>(s) * cfg_.d_lat;
      const double* h2 = c.h2.data() + static_cast<std::size_t>(s) * D;
      double* dh = dh2.data() + static_cast<std::size_t>(s) * D;
      for (int r = 0; r < cfg_.d_lat; ++r) {
        const double g = -c.x0_to_eps * de[r];
        if (g == 0.0) continue;
        g_b_out[r] += g;
        double* gw = g_w_out + static_cast<std::size_t>(r) * D;
        const double* wo = w_out + static_cast<std::size_t>(r) * D;
        for (int col = 0; col < D; ++col) {
          gw[col] += g * h2[col];
          dh[col] += g * wo[col];
        }
      }
    }

    // Temporal mixing transpose.
    std::vector<double> dh1(static_cast<std::size_t>(n_states) * D, 0.0);
    if (cfg_.temporal_mixing && L > 1) {
      for (int l = 0; l < L; ++l) {
        const int lo = std::max(0, l - 1), hi = std::min(L - 1, l + 1);
        const double inv = 1.0 / (hi - lo + 1);
        for (int p = 0; p < P; ++p) {
          const double* src = dh2.data() + (static_cast<std::size_t>(l) * P + p) * D;
          for (int m = lo; m <= hi; ++m) {
            double* dst = dh1.data() + (static_cast<std::size_t>(m) * P + p) * D;
            for (int r = 0; r < D; ++r) dst[r] += inv * src[r];
          }
        }
      }
    } else {
      dh1 = dh2;
    }

    std::vector<double> dkeys(static_cast<std::size_t>(M) * D, 0.0);
    std::vector<double> dvals(static_cast<std::size_t>(M) * D, 0.0);
    std::vector<double> dh0(static_cast<std::size_t>(D));
    std::vector<double> dctx(static_cast<std::size_t>(D));
    std::vector<double> dq(static_cast<std::size_t>(D));
    std::vector<double> da(static_cast<std::size_t>(M));
    std::vector<double> dlogit(static_cast<std::size_t>(M));

    for (int l = 0; l < L; ++l) {
      for (int p = 0; p < P; ++p) {
        const int s = l * P + p;
        const double* dh1_s = dh1.data() + static_cast<std::size_t>(s) * D;
        const double* h0 = c.h0.data() + static_cast<std::size_t>(s) * D;
        const double* q = c.q.data() + static_cast<std::size_t>(s) * D;
        const double* ctx = c.ctx.data() + static_cast<std::size_t>(s) * D;
        const double* a = c.attn.data() + static_cast<std::size_t>(s) * M;

        // h1 = h0 + W_o ctx
        std::copy(dh1_s, dh1_s + D, dh0.begin());
        std::fill(dctx.begin(), dctx.end(), 0.0);
        for (int r = 0; r < D; ++r) {
          const double g = dh1_s[r];
          if (g == 0.0) continue;
          double* gw = g_w_o + static_cast<std::size_t>(r) * D;
          const double* wo = w_o + static_cast<std::size_t>(r) * D;
          for (int col = 0; col < D; ++col) {
            gw[col] += g * ctx[col];
            dctx[static_cast<std::size_t>(col)] += g * wo[col];
          }
        }

        // ctx = sum_j a_j v_j
        double dot_a_da = 0.0;
        for (int j = 0; j < M; ++j) {
          const double* vj = c.vals.data() + static_cast<std::size_t>(j) * D;
          double* dvj = dvals.data() + static_cast<std::size_t>(j) * D;
          double s_da = 0.0;
          for (int r = 0; r < D; ++r) {
            s_da += dctx[static_cast<std::size_t>(r)] * vj[r];
            dvj[r] += a[j] * dctx[static_cast<std::size_t>(r)];
          }
          da[static_cast<std::size_t>(j)] = s_da;
          dot_a_da += a[j] * s_da;
        }

        // Softmax backward.
        for (int j = 0; j < M; ++j)
          dlogit[static_cast<std::size_t>(j)] = a[j] * (da[static_cast<std::size_t>(j)] - dot_a_da);

        // logits_j = att_scale * q . k_j
        std::fill(dq.begin(), dq.end(), 0.0);
        for (int j = 0; j < M; ++j) {
          const double g = att_scale * dlogit[static_cast<std::size_t>(j)];
          if (g == 0.0) continue;
          const double* kj = c.keys.data() + static_cast<std::size_t>(j) * D;
          double* dkj = dkeys.data() + static_cast<std::size_t>(j) * D;
          for (int r = 0; r < D; ++r) {
            dq[static_cast<std::size_t>(r)] += g * kj[r];
            dkj[r] += g * q[r];
          }
        }

        // q = W_q h0
        for (int r = 0; r < D; ++r) {
          const double g = dq[static_cast<std::size_t>(r)];
          if (g == 0.0) continue;
          double* gw = g_w_q + static_cast<std::size_t>(r) * D;
          const double* wq = w_q + static_cast<std::size_t>(r) * D;
          for (int col = 0; col < D; ++col) {
            gw[col] += g * h0[col];
            dh0[static_cast<std::size_t>(col)] += g * wq[col];
          }
        }

        // h0 = W_in x + b_in + te + pe
        const double* x = z.z.data() + z.index(l, p, 0);
        for (int r = 0; r < D; ++r) {
          const double g = dh0[static_cast<std::size_t>(r)];
          if (g == 0.0) continue;
          g_b_in[r] += g;
          double* gw = g_w_in + static_cast<std::size_t>(r) * cfg_.d_lat;
          for (int col = 0; col < cfg_.d_lat; ++col) gw[col] += g * x[col];
        }
      }
    }

    // keys_j = W_k w_j, vals_j = W_v w_j
    for (int j = 0; j < M; ++j) {
      const double* wj = w.row(j);
      const double* dkj = dkeys.data() + static_cast<std::size_t>(j) * D;
      const double* dvj = dvals.data() + static_cast<std::size_t>(j) * D;
      for (int r = 0; r < D; ++r) {
        double* gk = g_w_k + static_cast<std::size_t>(r) * DT;
        double* gv = g_w_v + static_cast<std::size_t>(r) * DT;
        const double gkr = dkj[r];
        const double gvr = dvj[r];
        for (int col = 0; col < DT; ++col) {
          gk[col] += gkr * wj[col];
          gv[col] += gvr * wj[col];
        }
      }
    }
    return grad;
  }

 private:
  struct Offsets {
    int w_in = 0, b_in = 0, w_q = 0, w_k = 0, w_v = 0, w_o = 0, w_out = 0, b_out = 0;
  };

  void time_features(int t, double* out) const {
    const int D = cfg_.d_model;
    for (int i = 0; i < D / 2; ++i) {
      const double freq = std::pow(1.0 / 10000.0, static_cast<double>(i) / (D / 2));
      out[2 * i] = std::sin(t * freq);
      out[2 * i + 1] = std::cos(t * freq);
    }
  }

  // Fixed sinusoidal features for (frame, patch-x, patch-y), one row per
  // state. Gives patches an identity so per-position content and trajectories
  // are learnable.
  void build_position_table() {
    const int D = cfg_.d_model, L = cfg_.frames, P = cfg_.patches();
    pos_table_.assign(static_cast<std::size_t>(L) * P * D, 0.0);
    const int third = D / 3;
    for (int l = 0; l < L; ++l) {
      for (int py = 0; py < cfg_.hp; ++py) {
        for (int px = 0; px < cfg_.wp; ++px) {
          double* row = pos_table_.data() +
                        (static_cast<std::size_t>(l) * P + static_cast<std::size_t>(py) * cfg_.wp + px) * D;
          auto put = [&](int base, int count, double coord) {
            for (int i = 0; i < count; ++i) {
              const double freq = M_PI * std::pow(0.5, i / 2);
              row[base + i] = (i % 2 == 0) ? std::sin(coord * freq) : std::cos(coord * freq);
            }
          };
          put(0, third, static_cast<double>(px));
          put(third, third, static_cast<double>(py));
          put(2 * third, D - 2 * third, static_cast<double>(l));
        }
      }
    }
  }

  DenoiserConfig cfg_;
  NoiseSchedule sched_;
  Offsets offs_;
  int n_params_ = 0;
  std::vector<double> params_;
  std::vector<double> pos_table_;
};

}  // namespace neuedit
