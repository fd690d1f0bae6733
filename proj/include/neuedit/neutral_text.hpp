#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "neuedit/common.hpp"
#include "neuedit/embeddings.hpp"
#include "neuedit/matrix.hpp"

namespace neuedit {

// Textual editing-factor score: per word, 1 - mean frame similarity, clamped
// into [0,1] so it can weight convex blends.
struct TextFactorScore {
  std::vector<double> z;

  int argmax() const {
    int best = 0;
    for (std::size_t i = 1; i < z.size(); ++i)
      if (z[i] > z[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
  }
};

inline TextFactorScore identify_text_factors(const Matrix& w, const Matrix& v) {
  require(w.cols() == v.cols(), "dim-mismatch", "identify_text_factors: feature dims differ");
  require(w.rows() >= 1 && v.rows() >= 1, "dim-mismatch", "identify_text_factors: empty inputs");
  for (int i = 0; i < w.rows(); ++i)
    require(std::abs(norm2(w.row(i), w.cols()) - 1.0) <= 1e-6, "not-unit-norm",
            "identify_text_factors: word rows must be unit norm");
  for (int l = 0; l < v.rows(); ++l)
    require(std::abs(norm2(v.row(l), v.cols()) - 1.0) <= 1e-6, "not-unit-norm",
            "identify_text_factors: frame rows must be unit norm");

  TextFactorScore out;
  out.z.resize(static_cast<std::size_t>(w.rows()));
  for (int i = 0; i < w.rows(); ++i) {
    double mean = 0.0;
    for (int l = 0; l < v.rows(); ++l) mean += dot(w.row(i), v.row(l), w.cols());
    mean /= v.rows();
    double z = 1.0 - mean;
    if (z < 0.0) z = 0.0;
    if (z > 1.0) z = 1.0;
    out.z[static_cast<std::size_t>(i)] = z;
  }
  return out;
}

enum class NeutralVariant { kSwap, kDeform, kDeformableSwap, kBlur };

inline const char* neutral_variant_name(NeutralVariant v) {
  switch (v) {
    case NeutralVariant::kSwap: return "swap";
    case NeutralVariant::kDeform: return "deform";
    case NeutralVariant::kDeformableSwap: return "deformable_swap";
    case NeutralVariant::kBlur: return "blur";
  }
  return "";
}

inline NeutralVariant neutral_variant_from_name(const std::string& s) {
  if (s == "swap") return NeutralVariant::kSwap;
  if (s == "deform") return NeutralVariant::kDeform;
  if (s == "deformable_swap") return NeutralVariant::kDeformableSwap;
  if (s == "blur") return NeutralVariant::kBlur;
  fail("bad-config", "unknown neutral variant: " + s);
}

struct NeutralPrompt {
  NeutralVariant variant = NeutralVariant::kDeform;
  std::vector<std::string> tokens;  // swap variants carry <DMY> markers
  Matrix w_n;                       // M x d
  std::vector<double> z_t;
  double s = 0.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  int swap_count = 0;
  bool zero_swaps = false;  // swap requested but no score cleared the threshold
};

namespace detail {

// Rows with z == 0 must stay bit-identical to the input, so the blend
// branches instead of multiplying through.
inline void blend_rows(const Matrix& w, const Matrix& deformed, const std::vector<double>& z,
                       Matrix& out) {
  for (int i = 0; i < w.rows(); ++i) {
    const double zi = z[static_cast<std::size_t>(i)];
    const double* src = w.row(i);
    double* dst = out.row(i);
    if (zi == 0.0) {
      std::copy(src, src + w.cols(), dst);
      continue;
    }
    const double* def = deformed.row(i);
    for (int c = 0; c < w.cols(); ++c) dst[c] = zi * def[c] + (1.0 - zi) * src[c];
  }
}

}  // namespace detail

// Replaces every token whose score exceeds s with the dummy token; dummy rows
// embed to exact zeros.
inline NeutralPrompt factor_swap(const std::vector<std::string>& tokens, const Matrix& w,
                                 const TextFactorScore& score, double s) {
  require(s > 0.0 && s < 1.0, "bad-threshold", "factor_swap: s must be in (0,1)");
  require(static_cast<int>(tokens.size()) == w.rows() && tokens.size() == score.z.size(),
          "dim-mismatch", "factor_swap: token/feature/score lengths differ");
  NeutralPrompt out;
  out.variant = NeutralVariant::kSwap;
  out.tokens = tokens;
  out.w_n = w;
  out.z_t = score.z;
  out.s = s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (score.z[i] > s) {
      out.tokens[i] = kDummyToken;
      double* row = out.w_n.row(static_cast<int>(i));
      std::fill(row, row + w.cols(), 0.0);
      ++out.swap_count;
    }
  }
  out.zero_swaps = out.swap_count == 0;
  return out;
}

// w_n = z o (alpha w) + (1 - z) o w, rowwise.
inline NeutralPrompt factor_deform(const std::vector<std::string>& tokens, const Matrix& w,
                                   const TextFactorScore& score, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, "bad-alpha", "factor_deform: alpha must be in [0,1]");
  require(static_cast<int>(tokens.size()) == w.rows() && tokens.size() == score.z.size(),
          "dim-mismatch", "factor_deform: token/feature/score lengths differ");
  NeutralPrompt out;
  out.variant = NeutralVariant::kDeform;
  out.tokens = tokens;
  out.z_t = score.z;
  out.alpha = alpha;
  out.w_n = Matrix(w.rows(), w.cols());
  Matrix deformed(w.rows(), w.cols());
  for (int i = 0; i < w.rows(); ++i)
    for (int c = 0; c < w.cols(); ++c) deformed.at(i, c) = alpha * w.at(i, c);
  if (alpha == 1.0) {
    out.w_n = w;  // exact identity as promised
    return out;
  }
  detail::blend_rows(w, deformed, score.z, out.w_n);
  return out;
}

// w_n = z o w_swap + (1 - z) o w: dummy rows scale with their factor score so
// swapped words stay distinguishable.
inline NeutralPrompt deformable_swap(const std::vector<std::string>& tokens, const Matrix& w,
                                     const TextFactorScore& score, double s) {
  NeutralPrompt swapped = factor_swap(tokens, w, score, s);
  NeutralPrompt out;
  out.variant = NeutralVariant::kDeformableSwap;
  out.tokens = swapped.tokens;
  out.z_t = score.z;
  out.s = s;
  out.swap_count = swapped.swap_count;
  out.zero_swaps = swapped.zero_swaps;
  out.w_n = Matrix(w.rows(), w.cols());
  detail::blend_rows(w, swapped.w_n, score.z, out.w_n);
  return out;
}

// w_n = z o (w + eps) + (1 - z) o w with seeded standard normal eps.
inline NeutralPrompt factor_blur(const std::vector<std::string>& tokens, const Matrix& w,
                                 const TextFactorScore& score, std::uint64_t seed) {
  require(static_cast<int>(tokens.size()) == w.rows() && tokens.size() == score.z.size(),
          "dim-mismatch", "factor_blur: token/feature/score lengths differ");
  NeutralPrompt out;
  out.variant = NeutralVariant::kBlur;
  out.tokens = tokens;
  out.z_t = score.z;
  out.seed = seed;
  out.w_n = Matrix(w.rows(), w.cols());
  Matrix noised(w.rows(), w.cols());
  Rng rng(derive_seed(seed, "factor_blur"));
  for (int i = 0; i < w.rows(); ++i)
    for (int c = 0; c < w.cols(); ++c) noised.at(i, c) = w.at(i, c) + rng.gaussian();
  detail::blend_rows(w, noised, score.z, out.w_n);
  return out;
}

}  // namespace neuedit
