#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "neuedit/codec.hpp"
#include "neuedit/common.hpp"
#include "neuedit/denoiser.hpp"
#include "neuedit/diffusion.hpp"
#include "neuedit/matrix.hpp"
#include "neuedit/neutral_text.hpp"
#include "neuedit/video.hpp"

namespace neuedit {

// Patch-resolution factor scores, one grid per frame.
struct PatchScores {
  int frames = 0;
  int wp = 0;
  int hp = 0;
  std::vector<double> data;  // [l][py][px]

  PatchScores() = default;
  PatchScores(int l, int wp_, int hp_)
      : frames(l), wp(wp_), hp(hp_), data(static_cast<std::size_t>(l) * wp_ * hp_, 0.0) {}

  std::size_t index(int l, int py, int px) const {
    return (static_cast<std::size_t>(l) * hp + py) * wp + px;
  }

  double& at(int l, int py, int px) { return data[index(l, py, px)]; }
  double at(int l, int py, int px) const { return data[index(l, py, px)]; }
};

// Raw per-patch scores m^i . z_T (no normalization).
inline PatchScores raw_visual_scores(const std::vector<Matrix>& attention,
                                     const std::vector<double>& z_t, int wp, int hp) {
  require(!attention.empty(), "dim-mismatch", "visual scores: no attention maps");
  PatchScores out(static_cast<int>(attention.size()), wp, hp);
  for (std::size_t l = 0; l < attention.size(); ++l) {
    const Matrix& m = attention[l];
    require(m.rows() == wp * hp, "dim-mismatch", "visual scores: patch count mismatch");
    require(m.cols() == static_cast<int>(z_t.size()), "dim-mismatch",
            "visual scores: word count mismatch");
    for (int p = 0; p < m.rows(); ++p) {
      double s = 0.0;
      for (int j = 0; j < m.cols(); ++j) s += m.at(p, j) * z_t[static_cast<std::size_t>(j)];
      out.data[l * static_cast<std::size_t>(wp) * hp + static_cast<std::size_t>(p)] = s;
    }
  }
  return out;
}

// Per-patch scores normalized per video to land in [0,1]. Attention rows are
// stochastic, so raw scores inherit a floor of min(z_T) regardless of where
// the editing factor sits; affine min-max normalization removes that floor so
// the threshold can establish a real boundary. A constant raw field maps to
// all ones (nothing distinguishes the patches) unless it is identically zero.
inline PatchScores visual_factor_score(const std::vector<Matrix>& attention,
                                       const std::vector<double>& z_t, int wp, int hp) {
  PatchScores out = raw_visual_scores(attention, z_t, wp, hp);
  double lo = 1e300, hi = -1e300;
  for (double v : out.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi <= 0.0) {
    for (double& v : out.data) v = 0.0;
  } else if (hi - lo < 1e-12) {
    for (double& v : out.data) v = 1.0;
  } else {
    for (double& v : out.data) v = std::min(1.0, std::max(0.0, (v - lo) / (hi - lo)));
  }
  return out;
}

namespace detail {

inline double catmull_rom(double t, double pm1, double p0, double p1, double p2) {
  return 0.5 * ((2.0 * p0) + (-pm1 + p1) * t + (2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2) * t * t +
                (-pm1 + 3.0 * p0 - 3.0 * p1 + p2) * t * t * t);
}

}  // namespace detail

// Bicubic (Catmull-Rom, edge-clamped) restoration of patch scores to pixel
// resolution, clamped to [0,1].
inline ScalarField upsample_scores(const PatchScores& scores, int height, int width) {
  require(height >= scores.hp && width >= scores.wp, "invalid-dimension",
          "upsample_scores: target smaller than patch grid");
  ScalarField out(scores.frames, height, width);
  const double sx = static_cast<double>(scores.wp) / width;
  const double sy = static_cast<double>(scores.hp) / height;
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };

  for (int l = 0; l < scores.frames; ++l) {
    for (int y = 0; y < height; ++y) {
      const double src_y = (y + 0.5) * sy - 0.5;
      const int iy = static_cast<int>(std::floor(src_y));
      const double ty = src_y - iy;
      for (int x = 0; x < width; ++x) {
        const double src_x = (x + 0.5) * sx - 0.5;
        const int ix = static_cast<int>(std::floor(src_x));
        const double tx = src_x - ix;
        double col[4];
        for (int r = -1; r <= 2; ++r) {
          const int yy = clampi(iy + r, 0, scores.hp - 1);
          double row[4];
          for (int q = -1; q <= 2; ++q) {
            const int xx = clampi(ix + q, 0, scores.wp - 1);
            row[q + 1] = scores.at(l, yy, xx);
          }
          col[r + 1] = detail::catmull_rom(tx, row[0], row[1], row[2], row[3]);
        }
        double v = detail::catmull_rom(ty, col[0], col[1], col[2], col[3]);
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        out.at(l, y, x) = v;
      }
    }
  }
  return out;
}

// Entries strictly below tau become exactly zero.
inline ScalarField threshold_scores(const ScalarField& scores, double tau) {
  require(tau >= 0.0 && tau <= 1.0, "bad-threshold", "threshold_scores: tau must be in [0,1]");
  ScalarField out = scores;
  for (double& v : out.data)
    if (v < tau) v = 0.0;
  return out;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  require(sigma > 0.0, "bad-sigma", "gaussian kernel: sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable 2D Gaussian blur per frame, reflected edges (no edge repeat).
inline VideoClip gaussian_blur(const VideoClip& video, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int H = video.height, W = video.width, C = video.channels;
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
  };

  VideoClip tmp = video;
  VideoClip out = video;
  for (int l = 0; l < video.frames; ++l) {
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < C; ++c) {
          double s = 0.0;
          for (int i = -radius; i <= radius; ++i)
            s += kernel[static_cast<std::size_t>(i + radius)] * video.at(l, y, reflect(x + i, W), c);
          tmp.at(l, y, x, c) = s;
        }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < C; ++c) {
          double s = 0.0;
          for (int i = -radius; i <= radius; ++i)
            s += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(l, reflect(y + i, H), x, c);
          out.at(l, y, x, c) = s;
        }
  }
  return out;
}

struct NeutralVideo {
  VideoClip frames;
  double sigma = 0.0;
  std::string video_hash;
  std::string score_hash;
};

// V_n = z_V o blur(V) + (1 - z_V) o V; pixels with z_V = 0 stay bit-identical.
inline NeutralVideo make_neutral_video(const VideoClip& video, const ScalarField& z_v,
                                       double sigma) {
  require(video.frames == z_v.frames && video.height == z_v.height && video.width == z_v.width,
          "shape-mismatch", "make_neutral_video: score field shape mismatch");
  const VideoClip blurred = gaussian_blur(video, sigma);
  NeutralVideo out;
  out.sigma = sigma;
  out.frames = video;
  for (int l = 0; l < video.frames; ++l)
    for (int y = 0; y < video.height; ++y)
      for (int x = 0; x < video.width; ++x) {
        const double z = z_v.at(l, y, x);
        if (z == 0.0) continue;  // keep input bits
        for (int c = 0; c < video.channels; ++c)
          out.frames.at(l, y, x, c) =
              z * blurred.at(l, y, x, c) + (1.0 - z) * video.at(l, y, x, c);
      }
  out.video_hash = hash_hex(fnv1a(video.data));
  out.score_hash = hash_hex(fnv1a(z_v.data));
  return out;
}

// Cross-attention probe: encodes the video, forward-diffuses with seeded noise
// to each probe timestep, and averages the denoiser's attention maps.
inline std::vector<Matrix> extract_attention(const DenoiserModel& model, const VideoClip& video,
                                             const Matrix& prompt_features,
                                             const NoiseSchedule& sched,
                                             const std::vector<int>& probe_timesteps,
                                             const CodecConfig& codec, std::uint64_t probe_seed) {
  require(!probe_timesteps.empty(), "bad-config", "extract_attention: no probe timesteps");
  const LatentVideo z0 = encode(video, codec);
  std::vector<Matrix> acc;
  for (std::size_t idx = 0; idx < probe_timesteps.size(); ++idx) {
    const int t = probe_timesteps[idx];
    require(t >= 1 && t <= sched.t_steps, "t-out-of-range",
            "extract_attention: probe timestep outside [1, T]");
    LatentVideo eps(z0.frames, z0.wp, z0.hp, z0.d_lat);
    // Seed per probe index: repeated timesteps average independent draws.
    Rng rng(derive_seed(probe_seed, "attention.probe",
                        (idx << 32) ^ static_cast<std::uint64_t>(t)));
    rng.fill_gaussian(eps.z);
    const LatentVideo z_t = forward_diffuse(z0, t, eps, sched);
    DenoiserOutput out = model.forward(z_t, t, prompt_features);
    if (acc.empty()) {
      acc = std::move(out.attention);
    } else {
      for (std::size_t l = 0; l < acc.size(); ++l)
        for (std::size_t i = 0; i < acc[l].data().size(); ++i)
          acc[l].data()[i] += out.attention[l].data()[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(probe_timesteps.size());
  for (auto& m : acc)
    for (double& v : m.data()) v *= inv;
  return acc;
}

}  // namespace neuedit
