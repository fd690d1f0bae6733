#pragma once

#include <cmath>
#include <vector>

#include "neuedit/common.hpp"
#include "neuedit/matrix.hpp"
#include "neuedit/video.hpp"

namespace neuedit {

// Latent tensor: frames x patches x d_lat, patch grid (wp, hp) row-major.
struct LatentVideo {
  int frames = 0;
  int wp = 0;
  int hp = 0;
  int d_lat = 0;
  std::vector<double> z;

  LatentVideo() = default;
  LatentVideo(int l, int wp_, int hp_, int d)
      : frames(l), wp(wp_), hp(hp_), d_lat(d),
        z(static_cast<std::size_t>(l) * wp_ * hp_ * d, 0.0) {}

  int patches() const { return wp * hp; }

  std::size_t index(int l, int p, int k) const {
    return (static_cast<std::size_t>(l) * patches() + p) * d_lat + k;
  }

  double& at(int l, int p, int k) { return z[index(l, p, k)]; }
  double at(int l, int p, int k) const { return z[index(l, p, k)]; }

  bool same_shape(const LatentVideo& o) const {
    return frames == o.frames && wp == o.wp && hp == o.hp && d_lat == o.d_lat;
  }
};

// Exactly invertible pixel <-> latent map: non-overlapping p x p patches,
// fixed affine centering, then a seeded orthogonal mixing matrix.
struct CodecConfig {
  int patch = 8;
  int d_lat = 8 * 8 * 3;
  std::uint64_t seed = 0;
  Matrix q;  // d_lat x d_lat, orthogonal

  std::string hash() const {
    std::uint64_t h = fnv1a("codec-v1");
    h = fnv1a(&patch, sizeof(patch), h);
    h = fnv1a(&seed, sizeof(seed), h);
    h = fnv1a(q.data(), h);
    return hash_hex(h);
  }
};

inline CodecConfig make_codec(int patch, std::uint64_t seed) {
  require(patch >= 1, "bad-config", "make_codec: patch must be >= 1");
  CodecConfig cfg;
  cfg.patch = patch;
  cfg.d_lat = patch * patch * 3;
  cfg.seed = seed;
  cfg.q = Matrix(cfg.d_lat, cfg.d_lat);
  Rng rng(derive_seed(seed, "codec.q"));
  rng.fill_gaussian(cfg.q.data());
  orthonormalize_rows(cfg.q);
  return cfg;
}

inline double codec_orthogonality_error(const CodecConfig& cfg) {
  double worst = 0.0;
  for (int r = 0; r < cfg.q.rows(); ++r) {
    for (int c = r; c < cfg.q.rows(); ++c) {
      const double d = dot(cfg.q.row(r), cfg.q.row(c), cfg.q.cols());
      worst = std::max(worst, std::abs(d - (r == c ? 1.0 : 0.0)));
    }
  }
  return worst;
}

inline LatentVideo encode(const VideoClip& video, const CodecConfig& cfg) {
  require(video.channels == 3, "dim-mismatch", "encode: expected 3 channels");
  require(video.height % cfg.patch == 0 && video.width % cfg.patch == 0, "invalid-dimension",
          "encode: frame dims must be divisible by the patch size");
  const int p = cfg.patch;
  const int wp = video.width / p;
  const int hp = video.height / p;
  LatentVideo out(video.frames, wp, hp, cfg.d_lat);

  std::vector<double> u(static_cast<std::size_t>(cfg.d_lat));
  for (int l = 0; l < video.frames; ++l) {
    for (int py = 0; py < hp; ++py) {
      for (int px = 0; px < wp; ++px) {
        int k = 0;
        for (int y = 0; y < p; ++y)
          for (int x = 0; x < p; ++x)
            for (int c = 0; c < 3; ++c)
              u[static_cast<std::size_t>(k++)] = 2.0 * (video.at(l, py * p + y, px * p + x, c) - 0.5);
        const int patch_idx = py * wp + px;
        for (int r = 0; r < cfg.d_lat; ++r)
          out.at(l, patch_idx, r) = dot(cfg.q.row(r), u.data(), cfg.d_lat);
      }
    }
  }
  return out;
}

struct DecodeResult {
  VideoClip video;
  double preclamp_min = 0.0;
  double preclamp_max = 0.0;
  bool clamped = false;
};

inline DecodeResult decode(const LatentVideo& latent, const CodecConfig& cfg) {
  require(latent.d_lat == cfg.d_lat, "shape-mismatch", "decode: latent dim mismatch");
  const int p = cfg.patch;
  DecodeResult res;
  res.video = VideoClip(latent.frames, latent.hp * p, latent.wp * p);
  res.preclamp_min = 1e300;
  res.preclamp_max = -1e300;

  std::vector<double> u(static_cast<std::size_t>(cfg.d_lat));
  for (int l = 0; l < latent.frames; ++l) {
    for (int py = 0; py < latent.hp; ++py) {
      for (int px = 0; px < latent.wp; ++px) {
        const int patch_idx = py * latent.wp + px;
        // u = Q^T z
        for (int j = 0; j < cfg.d_lat; ++j) {
          double s = 0.0;
          for (int r = 0; r < cfg.d_lat; ++r) s += cfg.q.at(r, j) * latent.at(l, patch_idx, r);
          u[static_cast<std::size_t>(j)] = s;
        }
        int k = 0;
        for (int y = 0; y < p; ++y) {
          for (int x = 0; x < p; ++x) {
            for (int c = 0; c < 3; ++c) {
              const double v = u[static_cast<std::size_t>(k++)] / 2.0 + 0.5;
              res.preclamp_min = std::min(res.preclamp_min, v);
              res.preclamp_max = std::max(res.preclamp_max, v);
              double clamped = v;
              if (clamped < 0.0) clamped = 0.0, res.clamped = true;
              if (clamped > 1.0) clamped = 1.0, res.clamped = true;
              res.video.at(l, py * p + y, px * p + x, c) = clamped;
            }
          }
        }
      }
    }
  }
  return res;
}

}  // namespace neuedit
