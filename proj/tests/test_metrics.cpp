#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "neuedit/neuedit.hpp"

using namespace neuedit;

namespace {

const Codebook& book() {
  static Codebook cb(32, 97);
  return cb;
}

}  // namespace

TEST_CASE("masked psnr: cap, hand value, precondition") {
  VideoClip a(1, 16, 16);
  Rng rng(1);
  for (double& v : a.data) v = 0.8 * rng.uniform();
  const Mask empty(1, 16, 16, 0);

  CHECK(masked_psnr(a, a, empty) == 99.0);

  // b = a + 0.1 outside the mask: MSE 0.01 -> exactly 20 dB.
  VideoClip b = a;
  for (double& v : b.data) v += 0.1;
  CHECK(masked_psnr(a, b, empty) == doctest::Approx(20.0).epsilon(1e-12));

  const Mask full(1, 16, 16, 1);
  CHECK_THROWS_AS((void)masked_psnr(a, b, full), Error);

  VideoClip c(1, 8, 8);
  CHECK_THROWS_AS((void)masked_psnr(a, c, empty), Error);
}

TEST_CASE("masked psnr ignores pixels inside the mask") {
  VideoClip a(1, 16, 16);
  Rng rng(2);
  for (double& v : a.data) v = rng.uniform();
  VideoClip b = a;
  Mask m(1, 16, 16, 0);
  for (int y = 4; y < 8; ++y)
    for (int x = 4; x < 8; ++x) {
      m.at(0, y, x) = 1;
      for (int c = 0; c < 3; ++c) b.at(0, y, x, c) = rng.uniform();  // garbage inside mask
    }
  CHECK(masked_psnr(a, b, m) == 99.0);
}

TEST_CASE("masked ssim: identity, inversion, symmetry, exclusion") {
  SceneSpec spec;
  spec.frames = 2;
  const VideoClip a = render_scene(spec, 3);
  const Mask empty(2, 64, 64, 0);

  CHECK(masked_ssim(a, a, empty) == doctest::Approx(1.0).epsilon(1e-12));

  VideoClip inv = a;
  for (double& v : inv.data) v = 1.0 - v;
  CHECK(masked_ssim(a, inv, empty) < 0.5);

  VideoClip b = a;
  Rng rng(4);
  for (double& v : b.data) v = std::min(1.0, std::max(0.0, v + 0.05 * rng.gaussian()));
  CHECK(masked_ssim(a, b, empty) == doctest::Approx(masked_ssim(b, a, empty)).epsilon(1e-12));

  const Mask full(2, 64, 64, 1);
  CHECK_THROWS_AS((void)masked_ssim(a, b, full), Error);

  // Windows intersecting the mask are excluded: corrupting only masked
  // windows leaves the score at 1.
  Mask window_mask(2, 64, 64, 0);
  VideoClip c = a;
  for (int l = 0; l < 2; ++l)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        window_mask.at(l, y, x) = 1;
        for (int ch = 0; ch < 3; ++ch) c.at(l, y, x, ch) = rng.uniform();
      }
  CHECK(masked_ssim(a, c, window_mask) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("textual alignment ranks the true description above a wrong color") {
  SceneSpec spec;
  spec.shape = Shape::kSquare;
  spec.color = Color::kRed;
  spec.motion = Motion::kSlide;
  spec.background = Background::kDark;
  const VideoClip clip = render_scene(spec, 6);

  const double right = textual_alignment(clip, describe(spec), book());
  SceneSpec wrong = spec;
  wrong.color = Color::kBlue;
  const double off = textual_alignment(clip, describe(wrong), book());
  CHECK(right > off);

  // Function-word-only prompt scores exactly zero.
  CHECK(textual_alignment(clip, "a on the a", book()) == 0.0);
}

TEST_CASE("frame consistency: still clip, noise clip, reversal invariance") {
  SceneSpec spec;
  spec.motion = Motion::kStill;
  const VideoClip still = render_scene(spec, 9);
  CHECK(frame_consistency(still, book()) == doctest::Approx(1.0).epsilon(1e-6));

  // Independent per-frame noise: no coherent object, lenient features are
  // zero, consecutive cosines are zero.
  VideoClip noise(4, 64, 64);
  Rng rng(12);
  for (double& v : noise.data) v = rng.uniform();
  CHECK(frame_consistency(noise, book()) < 0.5);

  SceneSpec moving;
  moving.motion = Motion::kSlide;
  const VideoClip fwd = render_scene(moving, 10);
  VideoClip rev = fwd;
  for (int l = 0; l < fwd.frames; ++l)
    for (int y = 0; y < fwd.height; ++y)
      for (int x = 0; x < fwd.width; ++x)
        for (int c = 0; c < 3; ++c) rev.at(l, y, x, c) = fwd.at(fwd.frames - 1 - l, y, x, c);
  CHECK(frame_consistency(rev, book()) == doctest::Approx(frame_consistency(fwd, book())).epsilon(1e-9));

  VideoClip single(1, 16, 16);
  CHECK_THROWS_AS((void)frame_consistency(single, book()), Error);
}

TEST_CASE("edit region mask from scores: support and monotone dilation") {
  ScalarField z(1, 16, 16, 0.0);
  CHECK(edit_region_mask_from_scores(z, 3).count_set() == 0);

  z.at(0, 8, 8) = 0.4;
  const Mask raw = edit_region_mask_from_scores(z, 0);
  CHECK(raw.count_set() == 1);
  CHECK(raw.at(0, 8, 8) == 1);

  std::size_t prev = 0;
  for (const int r : {0, 1, 2, 4}) {
    const Mask m = edit_region_mask_from_scores(z, r);
    CHECK(m.count_set() >= prev);
    // Dilated mask contains the raw support.
    CHECK(m.at(0, 8, 8) == 1);
    prev = m.count_set();
  }
  const Mask m2 = edit_region_mask_from_scores(z, 2);
  CHECK(m2.count_set() == 25);  // Chebyshev ball of radius 2

  CHECK_THROWS_AS((void)edit_region_mask_from_scores(z, -1), Error);
}

TEST_CASE("metric report serializes a fixed csv column order") {
  MetricReport r;
  r.task_id = "t1";
  r.arm = "neuedit";
  r.kind = "motion";
  r.alignment = 27.5;
  r.masked_psnr_auto = 21.0;
  r.masked_ssim_auto = 0.9;
  r.masked_psnr_gt = 20.5;
  r.masked_ssim_gt = 0.88;
  r.frame_consistency = 0.97;
  r.mask_provenance = "zv-support-dilated";
  CHECK(MetricReport::csv_header() ==
        "task_id,arm,kind,alignment,masked_psnr_auto,masked_ssim_auto,masked_psnr_gt,"
        "masked_ssim_gt,frame_consistency,mask_provenance");
  CHECK(r.csv_row() == "t1,neuedit,motion,27.5,21,0.9,20.5,0.88,0.97,zv-support-dilated");
}
