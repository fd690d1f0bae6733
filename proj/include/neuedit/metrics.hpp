#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "neuedit/common.hpp"
#include "neuedit/embeddings.hpp"
#include "neuedit/video.hpp"

namespace neuedit {

constexpr double kPsnrCapDb = 99.0;

// PSNR over pixels outside the mask (peak 1.0), capped at 99 dB so reports
// stay finite and sortable. Masked pixels are zeroed in both inputs per the
// identical-masking protocol, which is equivalent to excluding them.
inline double masked_psnr(const VideoClip& a, const VideoClip& b, const Mask& mask) {
  require(a.same_shape(b), "shape-mismatch", "masked_psnr: clip shapes differ");
  require(a.frames == mask.frames && a.height == mask.height && a.width == mask.width,
          "shape-mismatch", "masked_psnr: mask shape mismatch");
  double acc = 0.0;
  std::size_t n = 0;
  for (int l = 0; l < a.frames; ++l)
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        if (mask.at(l, y, x)) continue;
        for (int c = 0; c < a.channels; ++c) {
          const double d = a.at(l, y, x, c) - b.at(l, y, x, c);
          acc += d * d;
          ++n;
        }
      }
  require(n > 0, "empty-unmasked-region", "masked_psnr: mask covers every pixel");
  const double mse = acc / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

// SSIM with non-overlapping 8x8 windows, k1 = 0.01, k2 = 0.03, dynamic range
// 1.0; windows touching the mask are excluded; mean over channels and frames.
inline double masked_ssim(const VideoClip& a, const VideoClip& b, const Mask& mask) {
  require(a.same_shape(b), "shape-mismatch", "masked_ssim: clip shapes differ");
  require(a.frames == mask.frames && a.height == mask.height && a.width == mask.width,
          "shape-mismatch", "masked_ssim: mask shape mismatch");
  constexpr int kWin = 8;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;

  double total = 0.0;
  std::size_t n_windows = 0;
  for (int l = 0; l < a.frames; ++l) {
    for (int wy = 0; wy + kWin <= a.height; wy += kWin) {
      for (int wx = 0; wx + kWin <= a.width; wx += kWin) {
        bool masked = false;
        for (int y = wy; y < wy + kWin && !masked; ++y)
          for (int x = wx; x < wx + kWin; ++x)
            if (mask.at(l, y, x)) {
              masked = true;
              break;
            }
        if (masked) continue;
        for (int c = 0; c < a.channels; ++c) {
          double ma = 0, mb = 0;
          for (int y = wy; y < wy + kWin; ++y)
            for (int x = wx; x < wx + kWin; ++x) {
              ma += a.at(l, y, x, c);
              mb += b.at(l, y, x, c);
            }
          constexpr double inv = 1.0 / (kWin * kWin);
          ma *= inv;
          mb *= inv;
          double va = 0, vb = 0, cov = 0;
          for (int y = wy; y < wy + kWin; ++y)
            for (int x = wx; x < wx + kWin; ++x) {
              const double da = a.at(l, y, x, c) - ma;
              const double db = b.at(l, y, x, c) - mb;
              va += da * da;
              vb += db * db;
              cov += da * db;
            }
          va *= inv;
          vb *= inv;
          cov *= inv;
          total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
                   ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
          ++n_windows;
        }
      }
    }
  }
  require(n_windows > 0, "empty-window-set", "masked_ssim: every window intersects the mask");
  return total / static_cast<double>(n_windows);
}

// Mean cosine between content-word features and (lenient) frame features,
// scaled by 100. Prompts with no content words score 0.
inline double textual_alignment(const VideoClip& video, const std::string& prompt,
                                const Codebook& cb) {
  const auto tokens = tokenize(prompt);
  const TokenizedPrompt tp = embed_text(tokens, cb);
  const FrameFeatures ff = embed_frames_lenient(video, cb);

  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!cb.is_content_word(tokens[i]) || is_stop_word(tokens[i])) continue;
    for (int l = 0; l < ff.v.rows(); ++l) {
      acc += cosine(tp.w.row(static_cast<int>(i)), ff.v.row(l), cb.dim());
      ++n;
    }
  }
  if (n == 0) return 0.0;
  return 100.0 * acc / static_cast<double>(n);
}

// Mean cosine of consecutive (lenient) frame features.
inline double frame_consistency(const VideoClip& video, const Codebook& cb) {
  require(video.frames >= 2, "too-few-frames", "frame_consistency: needs L >= 2");
  const FrameFeatures ff = embed_frames_lenient(video, cb);
  double acc = 0.0;
  for (int l = 0; l + 1 < ff.v.rows(); ++l) acc += cosine(ff.v.row(l), ff.v.row(l + 1), cb.dim());
  return acc / (ff.v.rows() - 1);
}

// Support of z_V dilated by a Chebyshev radius, per frame.
inline Mask edit_region_mask_from_scores(const ScalarField& z_v, int dilation_radius) {
  require(dilation_radius >= 0, "bad-config", "edit_region_mask_from_scores: negative radius");
  Mask raw(z_v.frames, z_v.height, z_v.width);
  for (std::size_t i = 0; i < z_v.data.size(); ++i) raw.data[i] = z_v.data[i] > 0.0 ? 1 : 0;
  if (dilation_radius == 0) return raw;

  Mask out(z_v.frames, z_v.height, z_v.width);
  const int r = dilation_radius;
  for (int l = 0; l < raw.frames; ++l)
    for (int y = 0; y < raw.height; ++y)
      for (int x = 0; x < raw.width; ++x) {
        if (!raw.at(l, y, x)) continue;
        const int y0 = std::max(0, y - r), y1 = std::min(raw.height - 1, y + r);
        const int x0 = std::max(0, x - r), x1 = std::min(raw.width - 1, x + r);
        for (int yy = y0; yy <= y1; ++yy)
          for (int xx = x0; xx <= x1; ++xx) out.at(l, yy, xx) = 1;
      }
  return out;
}

// One evaluation row. Fidelity is reported against two masks: the automated
// z_V-support mask and the ground-truth edit region, bounding the truth from
// both sides.
struct MetricReport {
  std::string task_id;
  std::string arm;   // "neuedit" or "baseline"
  std::string kind;  // "motion" or "color"
  double alignment = 0.0;
  double masked_psnr_auto = 0.0;
  double masked_ssim_auto = 0.0;
  double masked_psnr_gt = 0.0;
  double masked_ssim_gt = 0.0;
  double frame_consistency = 0.0;
  std::string mask_provenance;

  static std::string csv_header() {
    return "task_id,arm,kind,alignment,masked_psnr_auto,masked_ssim_auto,"
           "masked_psnr_gt,masked_ssim_gt,frame_consistency,mask_provenance";
  }

  std::string csv_row() const;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

inline std::string MetricReport::csv_row() const {
  std::string s;
  s += task_id + ',' + arm + ',' + kind + ',';
  s += detail::fmt_double(alignment) + ',';
  s += detail::fmt_double(masked_psnr_auto) + ',';
  s += detail::fmt_double(masked_ssim_auto) + ',';
  s += detail::fmt_double(masked_psnr_gt) + ',';
  s += detail::fmt_double(masked_ssim_gt) + ',';
  s += detail::fmt_double(frame_consistency) + ',';
  s += mask_provenance;
  return s;
}

}  // namespace neuedit
