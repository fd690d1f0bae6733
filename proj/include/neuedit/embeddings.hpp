#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "neuedit/common.hpp"
#include "neuedit/matrix.hpp"
#include "neuedit/video.hpp"
#include "neuedit/world.hpp"

namespace neuedit {

// ---------------------------------------------------------------------------
// Tokenization

inline std::vector<std::string> tokenize(const std::string& text) {
  require(!text.empty(), "empty-text", "tokenize: empty input");
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (std::isspace(u)) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    }
    // Punctuation is stripped entirely.
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  require(!tokens.empty(), "empty-text", "tokenize: no tokens after normalization");
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Codebook

inline constexpr const char* kDummyToken = "<DMY>";
inline constexpr const char* kBaseWord = "<BASE>";

// Function words shared by every prompt template. They embed to the generic
// scene direction, which every frame feature also contains, so their factor
// scores land mid-range rather than at 1.
inline bool is_stop_word(const std::string& w) {
  return w == "a" || w == "an" || w == "on" || w == "the" || w == "background";
}

// Closed vocabulary of concept words plus one generic scene direction. The
// rows are exactly orthonormalized so similarity margins are constructed, not
// hoped for.
class Codebook {
 public:
  Codebook() = default;

  Codebook(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    for (int i = 0; i < kNumColors; ++i) words_.push_back(color_word(static_cast<Color>(i)));
    for (int i = 0; i < kNumShapes; ++i) words_.push_back(shape_word(static_cast<Shape>(i)));
    for (int i = 0; i < kNumMotions; ++i) words_.push_back(motion_word(static_cast<Motion>(i)));
    for (int i = 0; i < kNumBackgrounds; ++i) words_.push_back(background_word(static_cast<Background>(i)));
    words_.push_back(kBaseWord);
    require(static_cast<int>(words_.size()) <= dim, "dim-mismatch",
            "Codebook: dim too small for vocabulary");

    features_ = Matrix(static_cast<int>(words_.size()), dim);
    Rng rng(derive_seed(seed, "codebook"));
    rng.fill_gaussian(features_.data());
    orthonormalize_rows(features_);
  }

  int dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::string>& words() const { return words_; }

  bool is_content_word(const std::string& w) const {
    return w != kBaseWord && index_of(w) >= 0;
  }

  // Feature row for any token: concept row for vocabulary words, the shared
  // scene direction for function/out-of-vocabulary words, exact zeros for the
  // dummy token.
  std::vector<double> feature(const std::string& token) const {
    if (token == kDummyToken) return std::vector<double>(static_cast<std::size_t>(dim_), 0.0);
    const int idx = index_of(token);
    const int row = idx >= 0 ? idx : index_of(kBaseWord);
    const double* r = features_.row(row);
    return std::vector<double>(r, r + dim_);
  }

  const double* concept_row(const std::string& word) const {
    const int idx = index_of(word);
    require(idx >= 0, "unknown-word", "Codebook: not a vocabulary word: " + word);
    return features_.row(idx);
  }

  // Canonical content hash over (dim, word list, features).
  std::string hash() const {
    std::uint64_t h = fnv1a("codebook-v1");
    h = fnv1a(&dim_, sizeof(dim_), h);
    for (const auto& w : words_) h = fnv1a(w, h);
    h = fnv1a(features_.data(), h);
    return hash_hex(h);
  }

  // Construction hook for deserialization.
  static Codebook from_parts(int dim, std::uint64_t seed, std::vector<std::string> words,
                             Matrix features) {
    Codebook cb;
    cb.dim_ = dim;
    cb.seed_ = seed;
    cb.words_ = std::move(words);
    cb.features_ = std::move(features);
    return cb;
  }

  const Matrix& features() const { return features_; }

 private:
  int index_of(const std::string& w) const {
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (words_[i] == w) return static_cast<int>(i);
    return -1;
  }

  int dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::string> words_;
  Matrix features_;
};

// ---------------------------------------------------------------------------
// Text embedding

struct TokenizedPrompt {
  std::vector<std::string> tokens;
  Matrix w;  // M x d, unit rows

  int word_count() const { return static_cast<int>(tokens.size()); }
};

inline TokenizedPrompt embed_text(const std::vector<std::string>& tokens, const Codebook& cb) {
  require(!tokens.empty(), "empty-text", "embed_text: no tokens");
  require(tokens.size() <= 32, "prompt-too-long", "embed_text: more than 32 tokens");
  TokenizedPrompt out;
  out.tokens = tokens;
  out.w = Matrix(static_cast<int>(tokens.size()), cb.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto f = cb.feature(tokens[i]);
    double* row = out.w.row(static_cast<int>(i));
    std::copy(f.begin(), f.end(), row);
    const double n = norm2(row, cb.dim());
    if (n > 0.0)
      for (int c = 0; c < cb.dim(); ++c) row[c] /= n;
  }
  return out;
}

inline TokenizedPrompt embed_prompt(const std::string& text, const Codebook& cb) {
  return embed_text(tokenize(text), cb);
}

// ---------------------------------------------------------------------------
// Frame analysis (pixel-space detector)

struct FrameFeatures {
  Matrix v;  // L x d, unit rows (zero rows only on the lenient path)
};

namespace detail {

// Shape thresholds on the first moment invariant (mu20+mu02)/mu00^2.
// Ideal values: disk 1/(2*pi) ~ 0.1592, square 1/6 ~ 0.1667, equilateral
// triangle sqrt(3)/9 ~ 0.1925.
constexpr double kPhiCircleMax = 0.1630;
constexpr double kPhiSquareMax = 0.1800;
constexpr double kPhiTriangleMax = 0.2400;

struct FrameAnalysis {
  bool ok = false;
  std::optional<Color> color;
  std::optional<Shape> shape;
  Background background = Background::kDark;
  double area = 0.0;  // weighted object area (pixels)
  double cx = 0.0, cy = 0.0;
  double phi1 = 0.0;
  // Third/fourth order complex moment angles for rotation tracking.
  double psi3 = 0.0, psi4 = 0.0;
  double c3_mag = 0.0, c4_mag = 0.0;
};

inline FrameAnalysis analyze_frame(const VideoClip& clip, int l) {
  FrameAnalysis fa;
  const int H = clip.height, W = clip.width;

  // Background estimate from a 2-pixel border ring.
  double border_sum[3] = {0, 0, 0};
  int border_n = 0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (y >= 2 && y < H - 2 && x >= 2 && x < W - 2) continue;
      for (int c = 0; c < 3; ++c) border_sum[c] += clip.at(l, y, x, c);
      ++border_n;
    }
  }
  double border_mean[3];
  double border_gray = 0.0;
  for (int c = 0; c < 3; ++c) {
    border_mean[c] = border_sum[c] / border_n;
    border_gray += border_mean[c] / 3.0;
  }
  fa.background = border_gray < 0.5 ? Background::kDark : Background::kLight;

  // Deviation-from-background field.
  std::vector<double> diff(static_cast<std::size_t>(H) * W, 0.0);
  double max_diff = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double d = 0.0;
      for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(clip.at(l, y, x, c) - border_mean[c]));
      diff[static_cast<std::size_t>(y) * W + x] = d;
      max_diff = std::max(max_diff, d);
    }
  }
  if (max_diff < 0.12) return fa;  // nothing distinguishable from background

  // Solid-object contrast: mean deviation over strongly deviating pixels.
  double solid_sum = 0.0;
  int solid_n = 0;
  for (double d : diff)
    if (d >= 0.8 * max_diff) solid_sum += d, ++solid_n;
  const double solid = solid_sum / solid_n;

  // Candidate mask with a contrast-proportional cutoff (captures the
  // anti-aliased fringe at a uniform coverage level for every palette color).
  const double cut = 0.35 * solid;
  std::vector<std::uint8_t> cand(static_cast<std::size_t>(H) * W, 0);
  std::size_t cand_n = 0;
  for (std::size_t i = 0; i < diff.size(); ++i)
    if (diff[i] >= cut) cand[i] = 1, ++cand_n;

  const double coverage = static_cast<double>(cand_n) / (static_cast<double>(H) * W);
  if (coverage < 0.015 || coverage > 0.60) return fa;

  // Largest 4-connected component must dominate; rejects speckle fields.
  std::vector<int> comp(static_cast<std::size_t>(H) * W, -1);
  int best_comp = -1;
  std::size_t best_size = 0;
  int n_comp = 0;
  std::vector<int> stack;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int i0 = y * W + x;
      if (!cand[static_cast<std::size_t>(i0)] || comp[static_cast<std::size_t>(i0)] >= 0) continue;
      const int id = n_comp++;
      std::size_t size = 0;
      stack.push_back(i0);
      comp[static_cast<std::size_t>(i0)] = id;
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        ++size;
        const int yy = i / W, xx = i % W;
        const int nbr[4][2] = {{yy - 1, xx}, {yy + 1, xx}, {yy, xx - 1}, {yy, xx + 1}};
        for (const auto& nb : nbr) {
          if (nb[0] < 0 || nb[0] >= H || nb[1] < 0 || nb[1] >= W) continue;
          const int j = nb[0] * W + nb[1];
          if (cand[static_cast<std::size_t>(j)] && comp[static_cast<std::size_t>(j)] < 0) {
            comp[static_cast<std::size_t>(j)] = id;
            stack.push_back(j);
          }
        }
      }
      if (size > best_size) best_size = size, best_comp = id;
    }
  }
  if (best_comp < 0 || static_cast<double>(best_size) < 0.6 * static_cast<double>(cand_n)) return fa;

  // Coverage-weighted moments over the dominant component.
  double m00 = 0, mx = 0, my = 0;
  double col_sum[3] = {0, 0, 0};
  double col_w = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      if (comp[i] != best_comp) continue;
      const double w = std::min(1.0, diff[i] / solid);
      m00 += w;
      mx += w * x;
      my += w * y;
      if (diff[i] >= 0.8 * solid) {
        for (int c = 0; c < 3; ++c) col_sum[c] += clip.at(l, y, x, c);
        col_w += 1.0;
      }
    }
  }
  if (m00 < 8.0 || col_w < 1.0) return fa;
  fa.cx = mx / m00;
  fa.cy = my / m00;
  fa.area = m00;

  double mu20 = 0, mu02 = 0;
  double c3r = 0, c3i = 0, c4r = 0, c4i = 0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      if (comp[i] != best_comp) continue;
      const double w = std::min(1.0, diff[i] / solid);
      const double dx = x - fa.cx;
      const double dy = y - fa.cy;
      mu20 += w * dx * dx;
      mu02 += w * dy * dy;
      // (dx + i dy)^3 and ^4
      const double r2 = dx * dx - dy * dy;
      const double i2 = 2.0 * dx * dy;
      const double r3 = r2 * dx - i2 * dy;
      const double i3 = r2 * dy + i2 * dx;
      const double r4 = r3 * dx - i3 * dy;
      const double i4 = r3 * dy + i3 * dx;
      c3r += w * r3;
      c3i += w * i3;
      c4r += w * r4;
      c4i += w * i4;
    }
  }
  fa.phi1 = (mu20 + mu02) / (m00 * m00);
  fa.c3_mag = std::hypot(c3r, c3i) / std::pow(m00, 2.5);
  fa.c4_mag = std::hypot(c4r, c4i) / std::pow(m00, 3.0);
  fa.psi3 = std::atan2(c3i, c3r);
  fa.psi4 = std::atan2(c4i, c4r);

  if (fa.phi1 < kPhiCircleMax) fa.shape = Shape::kCircle;
  else if (fa.phi1 < kPhiSquareMax) fa.shape = Shape::kSquare;
  else if (fa.phi1 < kPhiTriangleMax) fa.shape = Shape::kTriangle;

  // Color from solid pixels.
  double rgb[3];
  for (int c = 0; c < 3; ++c) rgb[c] = col_sum[c] / col_w;
  const double mx_c = std::max({rgb[0], rgb[1], rgb[2]});
  const double mn_c = std::min({rgb[0], rgb[1], rgb[2]});
  if (mn_c > 0.7 && mx_c - mn_c < 0.2) {
    fa.color = Color::kWhite;
  } else if (rgb[0] >= rgb[1] && rgb[0] >= rgb[2]) {
    fa.color = Color::kRed;
  } else if (rgb[1] >= rgb[2]) {
    fa.color = Color::kGreen;
  } else {
    fa.color = Color::kBlue;
  }

  fa.ok = true;
  return fa;
}

inline double circular_diff(double a, double b) {
  double d = std::fmod(a - b, 2.0 * M_PI);
  if (d > M_PI) d -= 2.0 * M_PI;
  if (d < -M_PI) d += 2.0 * M_PI;
  return std::abs(d);
}

}  // namespace detail

// Per-motion evidence in [0,1] from the clip trajectory. Continuous by
// design: the winning motion of a clean render scores ~1 and the rest ~0,
// while perturbed trajectories earn partial credit, so alignment metrics
// respond smoothly to actual pixel changes instead of snapping between
// classes.
struct MotionEvidence {
  std::array<double, kNumMotions> e{};  // indexed by Motion

  double of(Motion m) const { return e[static_cast<std::size_t>(m)]; }
  double& of(Motion m) { return e[static_cast<std::size_t>(m)]; }
};

inline std::optional<MotionEvidence> motion_evidence(
    const std::vector<detail::FrameAnalysis>& frames) {
  if (frames.size() < 2) return std::nullopt;
  for (const auto& f : frames)
    if (!f.ok) return std::nullopt;

  auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };

  const auto& first = frames.front();
  const auto& last = frames.back();
  const double area_ratio = std::max(1e-9, last.area / first.area);

  double min_cx = first.cx, max_cx = first.cx, min_cy = first.cy, max_cy = first.cy;
  for (const auto& f : frames) {
    min_cx = std::min(min_cx, f.cx);
    max_cx = std::max(max_cx, f.cx);
    min_cy = std::min(min_cy, f.cy);
    max_cy = std::max(max_cy, f.cy);
  }
  const double rx = max_cx - min_cx;
  const double ry = max_cy - min_cy;

  double rot = 0.0;
  const bool use_c3 = first.c3_mag > 0.004;
  const bool use_c4 = first.c4_mag > 0.006;
  if (use_c3 || use_c4) {
    for (std::size_t i = 1; i < frames.size(); ++i)
      rot = std::max(rot, use_c3 ? detail::circular_diff(frames[i].psi3, frames[i - 1].psi3)
                                 : detail::circular_diff(frames[i].psi4, frames[i - 1].psi4));
  }

  MotionEvidence ev;
  // Translation: strength gates at ~3 px, direction splits the credit.
  const double trans = rx + ry;
  const double strength = clamp01(trans / 3.0);
  if (trans > 1e-9) {
    ev.of(Motion::kSlide) = strength * rx / (trans + 0.5);
    ev.of(Motion::kBounce) = strength * ry / (trans + 0.5);
  }
  // Scale change: full credit at the renderer's nominal grow/shrink ratios.
  if (area_ratio > 1.0)
    ev.of(Motion::kGrow) = clamp01(std::log(area_ratio) / std::log(2.1));
  else
    ev.of(Motion::kShrink) = clamp01(std::log(1.0 / area_ratio) / std::log(1.0 / 0.42));
  // Rotation: gated below sensor noise, saturating at the renderer's step.
  const double centered = clamp01(1.0 - (std::max(rx, ry) - 1.0) / 2.0);
  ev.of(Motion::kSpin) = clamp01((rot - 0.10) / 0.25) * centered;
  // Stillness: whatever motion energy is left.
  double peak = 0.0;
  for (const double v : ev.e) peak = std::max(peak, v);
  ev.of(Motion::kStill) = clamp01(1.0 - peak / 0.55);
  return ev;
}

// Hard clip-level motion label: the dominant evidence (kept for detector-style
// consumers; feature building uses the soft evidence directly).
inline std::optional<Motion> classify_motion(const std::vector<detail::FrameAnalysis>& frames) {
  const auto ev = motion_evidence(frames);
  if (!ev) return std::nullopt;
  int best = static_cast<int>(Motion::kStill);
  for (int m = 0; m < kNumMotions; ++m)
    if (ev->e[static_cast<std::size_t>(m)] >
        ev->e[static_cast<std::size_t>(best)])
      best = m;
  return static_cast<Motion>(best);
}

// Per-frame concept feature: normalized sum of the detected concepts' codebook
// rows (color, shape when classifiable, clip motion when L >= 2, background,
// plus the generic scene direction).
inline FrameFeatures embed_frames(const VideoClip& video, const Codebook& cb) {
  require(video.frames >= 1, "shape-mismatch", "embed_frames: empty clip");
  std::vector<detail::FrameAnalysis> analyses;
  analyses.reserve(static_cast<std::size_t>(video.frames));
  for (int l = 0; l < video.frames; ++l) {
    auto fa = detail::analyze_frame(video, l);
    require(fa.ok, "detection-failure", "embed_frames: no object found in frame " + std::to_string(l));
    analyses.push_back(fa);
  }
  const auto motion = motion_evidence(analyses);

  FrameFeatures out;
  out.v = Matrix(video.frames, cb.dim());
  for (int l = 0; l < video.frames; ++l) {
    const auto& fa = analyses[static_cast<std::size_t>(l)];
    double* row = out.v.row(l);
    auto add = [&](const char* word, double weight = 1.0) {
      if (weight <= 0.0) return;
      const double* f = cb.concept_row(word);
      for (int c = 0; c < cb.dim(); ++c) row[c] += weight * f[c];
    };
    if (fa.color) add(color_word(*fa.color));
    if (fa.shape) add(shape_word(*fa.shape));
    if (motion)
      for (int m = 0; m < kNumMotions; ++m)
        add(motion_word(static_cast<Motion>(m)), motion->e[static_cast<std::size_t>(m)]);
    add(background_word(fa.background));
    add(kBaseWord);
    const double n = norm2(row, cb.dim());
    for (int c = 0; c < cb.dim(); ++c) row[c] /= n;
  }
  return out;
}

// Lenient variant used by evaluation metrics: frames where detection fails
// contribute an exact zero feature instead of raising.
inline FrameFeatures embed_frames_lenient(const VideoClip& video, const Codebook& cb) {
  std::vector<detail::FrameAnalysis> analyses;
  analyses.reserve(static_cast<std::size_t>(video.frames));
  for (int l = 0; l < video.frames; ++l) analyses.push_back(detail::analyze_frame(video, l));

  std::vector<detail::FrameAnalysis> ok_frames;
  for (const auto& fa : analyses)
    if (fa.ok) ok_frames.push_back(fa);
  std::optional<MotionEvidence> motion;
  if (ok_frames.size() == analyses.size()) motion = motion_evidence(analyses);

  FrameFeatures out;
  out.v = Matrix(video.frames, cb.dim());
  for (int l = 0; l < video.frames; ++l) {
    const auto& fa = analyses[static_cast<std::size_t>(l)];
    if (!fa.ok) continue;  // zero row
    double* row = out.v.row(l);
    auto add = [&](const char* word, double weight = 1.0) {
      if (weight <= 0.0) return;
      const double* f = cb.concept_row(word);
      for (int c = 0; c < cb.dim(); ++c) row[c] += weight * f[c];
    };
    if (fa.color) add(color_word(*fa.color));
    if (fa.shape) add(shape_word(*fa.shape));
    if (motion)
      for (int m = 0; m < kNumMotions; ++m)
        add(motion_word(static_cast<Motion>(m)), motion->e[static_cast<std::size_t>(m)]);
    add(background_word(fa.background));
    add(kBaseWord);
    const double n = norm2(row, cb.dim());
    for (int c = 0; c < cb.dim(); ++c) row[c] /= n;
  }
  return out;
}

}  // namespace neuedit
