#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "neuedit/common.hpp"
#include "neuedit/video.hpp"

namespace neuedit {

enum class Shape { kSquare, kCircle, kTriangle };
enum class Color { kRed, kGreen, kBlue, kWhite };
enum class Motion { kSlide, kBounce, kSpin, kStill, kShrink, kGrow };
enum class Background { kDark, kLight };

inline const char* shape_word(Shape s) {
  switch (s) {
    case Shape::kSquare: return "square";
    case Shape::kCircle: return "circle";
    case Shape::kTriangle: return "triangle";
  }
  return "";
}

inline const char* color_word(Color c) {
  switch (c) {
    case Color::kRed: return "red";
    case Color::kGreen: return "green";
    case Color::kBlue: return "blue";
    case Color::kWhite: return "white";
  }
  return "";
}

inline const char* motion_word(Motion m) {
  switch (m) {
    case Motion::kSlide: return "slides";
    case Motion::kBounce: return "bounces";
    case Motion::kSpin: return "spins";
    case Motion::kStill: return "stays";
    case Motion::kShrink: return "shrinks";
    case Motion::kGrow: return "grows";
  }
  return "";
}

inline const char* background_word(Background b) {
  return b == Background::kDark ? "dark" : "light";
}

constexpr int kNumShapes = 3;
constexpr int kNumColors = 4;
constexpr int kNumMotions = 6;
constexpr int kNumBackgrounds = 2;

struct SceneSpec {
  Shape shape = Shape::kSquare;
  Color color = Color::kRed;
  Motion motion = Motion::kStill;
  Background background = Background::kDark;
  int frames = 8;
  int height = 64;
  int width = 64;
};

struct WorldConfig {
  int frames = 8;
  int height = 64;
  int width = 64;
  int patch = 8;  // frame dims must stay divisible by the codec patch size
};

// Object/background palette. Colors keep a strong contrast against both
// backgrounds so pixel-space detection has clean margins.
inline std::array<double, 3> color_rgb(Color c) {
  switch (c) {
    case Color::kRed: return {0.85, 0.13, 0.13};
    case Color::kGreen: return {0.13, 0.80, 0.13};
    case Color::kBlue: return {0.15, 0.20, 0.90};
    case Color::kWhite: return {0.98, 0.98, 0.98};
  }
  return {0.0, 0.0, 0.0};
}

inline double background_gray(Background b) { return b == Background::kDark ? 0.12 : 0.75; }

inline void validate_spec(const SceneSpec& spec, int patch = 8) {
  require(spec.frames >= 1, "invalid-dimension", "render_scene: frames must be >= 1");
  require(spec.height >= 16 && spec.width >= 16, "invalid-dimension",
          "render_scene: frames must be at least 16x16");
  require(spec.height % patch == 0 && spec.width % patch == 0, "invalid-dimension",
          "render_scene: frame dims must be divisible by the codec patch size");
}

namespace detail {

// Per-frame object pose used by the renderer.
struct Pose {
  double cx = 0.0;
  double cy = 0.0;
  double size = 0.0;   // half extent for square, radius for circle, circumradius for triangle
  double angle = 0.0;  // radians
};

// Signed inside test for the three shapes, angle-aware.
inline bool inside_shape(Shape shape, const Pose& p, double x, double y) {
  const double dx = x - p.cx;
  const double dy = y - p.cy;
  switch (shape) {
    case Shape::kCircle:
      return dx * dx + dy * dy <= p.size * p.size;
    case Shape::kSquare: {
      const double c = std::cos(-p.angle), s = std::sin(-p.angle);
      const double rx = c * dx - s * dy;
      const double ry = s * dx + c * dy;
      return std::abs(rx) <= p.size && std::abs(ry) <= p.size;
    }
    case Shape::kTriangle: {
      // Equilateral triangle, circumradius p.size, one vertex initially up.
      // Note image y grows downward; "up" means -y.
      std::array<double, 3> vx, vy;
      for (int k = 0; k < 3; ++k) {
        const double a = p.angle - M_PI / 2.0 + 2.0 * M_PI * k / 3.0;
        vx[static_cast<std::size_t>(k)] = p.cx + p.size * std::cos(a);
        vy[static_cast<std::size_t>(k)] = p.cy + p.size * std::sin(a);
      }
      // Inside if on the same side of all three edges.
      double sign = 0.0;
      for (int k = 0; k < 3; ++k) {
        const int j = (k + 1) % 3;
        const double ex = vx[static_cast<std::size_t>(j)] - vx[static_cast<std::size_t>(k)];
        const double ey = vy[static_cast<std::size_t>(j)] - vy[static_cast<std::size_t>(k)];
        const double cross = ex * (y - vy[static_cast<std::size_t>(k)]) - ey * (x - vx[static_cast<std::size_t>(k)]);
        if (cross == 0.0) continue;
        if (sign == 0.0) sign = cross > 0 ? 1.0 : -1.0;
        else if ((cross > 0 ? 1.0 : -1.0) != sign) return false;
      }
      return true;
    }
  }
  return false;
}

// Worst-case distance from center to any rendered point across the whole clip,
// used to keep the object inside the frame with a safety margin.
inline double shape_outer_radius(Shape shape, double size) {
  switch (shape) {
    case Shape::kCircle: return size;
    case Shape::kSquare: return size * std::sqrt(2.0);
    case Shape::kTriangle: return size;
  }
  return size;
}

inline std::vector<Pose> plan_trajectory(const SceneSpec& spec, std::uint64_t seed) {
  const int L = spec.frames;
  Rng rng(derive_seed(seed, "world.trajectory"));

  const double grow_rate = 0.45;    // total linear growth over the clip
  const double shrink_rate = 0.35;  // total linear shrink over the clip
  const double margin = 3.0;
  const double slide_step = 3.0;
  const double bounce_amp = 7.0;

  // Base size from a target coverage fraction of frame area. Motion-specific
  // ranges and caps keep per-frame coverage within [0.04, 0.5] for every
  // frame of the trajectory.
  const double frame_area = static_cast<double>(spec.height) * spec.width;
  double frac_lo = 0.08, frac_hi = 0.15;
  if (spec.motion == Motion::kShrink) frac_lo = 0.10;  // end coverage stays >= 4%
  if (spec.motion == Motion::kGrow) frac_lo = 0.07, frac_hi = 0.11;
  const double frac = rng.uniform(frac_lo, frac_hi);
  const double area = frac * frame_area;
  double size = 0.0;
  switch (spec.shape) {
    case Shape::kSquare: size = std::sqrt(area) / 2.0; break;
    case Shape::kCircle: size = std::sqrt(area / M_PI); break;
    case Shape::kTriangle: size = std::sqrt(4.0 * area / (3.0 * std::sqrt(3.0))); break;
  }

  // Cap the size so the worst-case extent of the whole trajectory fits the
  // frame with margins.
  const double growth = spec.motion == Motion::kGrow ? 1.0 + grow_rate : 1.0;
  const double shape_factor = shape_outer_radius(spec.shape, 1.0);
  const double travel_x = spec.motion == Motion::kSlide ? slide_step * (L - 1) : 0.0;
  const double travel_y = spec.motion == Motion::kBounce ? bounce_amp : 0.0;
  const double outer_cap_x = (spec.width - 1.0 - 2.0 * margin - travel_x) / 2.0;
  const double outer_cap_y = (spec.height - 1.0 - 2.0 * margin - travel_y) / 2.0;
  const double size_cap = std::min(outer_cap_x, outer_cap_y) / (shape_factor * growth);
  size = std::min(size, size_cap);

  // The smallest frame of the trajectory must still cover >= 4%.
  const double end_scale = spec.motion == Motion::kShrink ? 1.0 - shrink_rate : 1.0;
  double min_area = 0.0;
  const double min_size = size * end_scale;
  switch (spec.shape) {
    case Shape::kSquare: min_area = 4.0 * min_size * min_size; break;
    case Shape::kCircle: min_area = M_PI * min_size * min_size; break;
    case Shape::kTriangle: min_area = 3.0 * std::sqrt(3.0) / 4.0 * min_size * min_size; break;
  }
  require(size > 0.0 && min_area >= 0.04 * frame_area, "invalid-dimension",
          "render_scene: frame too small for the requested object/motion");

  double max_size = size * growth;
  const double outer = shape_outer_radius(spec.shape, max_size);
  const double lo_x = margin + outer;
  double hi_x = spec.width - 1.0 - margin - outer - travel_x;
  const double lo_y = margin + outer + travel_y;
  const double hi_y = spec.height - 1.0 - margin - outer;
  require(hi_x >= lo_x && hi_y >= lo_y, "invalid-dimension",
          "render_scene: frame too small for the requested object/motion");

  const double x0 = rng.uniform(lo_x, hi_x);
  const double y0 = rng.uniform(lo_y, hi_y);
  const double spin_step = std::max(M_PI / 8.0, (M_PI / 2.0) / std::max(1, L - 1));

  std::vector<Pose> poses(static_cast<std::size_t>(L));
  for (int t = 0; t < L; ++t) {
    Pose& p = poses[static_cast<std::size_t>(t)];
    p.cx = x0;
    p.cy = y0;
    p.size = size;
    p.angle = 0.0;
    const double u = L > 1 ? static_cast<double>(t) / (L - 1) : 0.0;
    switch (spec.motion) {
      case Motion::kSlide: p.cx = x0 + slide_step * t; break;
      case Motion::kBounce: p.cy = y0 - bounce_amp * std::abs(std::sin(M_PI * t / 4.0)); break;
      case Motion::kSpin: p.angle = spin_step * t; break;
      case Motion::kStill: break;
      case Motion::kShrink: p.size = size * (1.0 - shrink_rate * u); break;
      case Motion::kGrow: p.size = size * (1.0 + grow_rate * u); break;
    }
  }
  return poses;
}

// 2x2 supersampled coverage of the object in pixel (x, y) of frame pose `p`.
inline double pixel_coverage(Shape shape, const Pose& p, int x, int y) {
  static constexpr double offs[2] = {0.25, 0.75};
  int hits = 0;
  for (double oy : offs)
    for (double ox : offs)
      hits += inside_shape(shape, p, x + ox, y + oy) ? 1 : 0;
  return hits / 4.0;
}

}  // namespace detail

// Renders the clip described by `spec`. Pure function of (spec, seed); output
// pixels are snapped to the 8-bit grid so PPM persistence is lossless.
inline VideoClip render_scene(const SceneSpec& spec, std::uint64_t seed, int patch = 8) {
  validate_spec(spec, patch);
  const auto poses = detail::plan_trajectory(spec, seed);
  const auto rgb = color_rgb(spec.color);
  const double bg = background_gray(spec.background);

  VideoClip clip(spec.frames, spec.height, spec.width);
  for (int l = 0; l < spec.frames; ++l) {
    const auto& pose = poses[static_cast<std::size_t>(l)];
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double cov = detail::pixel_coverage(spec.shape, pose, x, y);
        for (int c = 0; c < 3; ++c) {
          const double v = bg + cov * (rgb[static_cast<std::size_t>(c)] - bg);
          clip.at(l, y, x, c) = quantize8(v) / 255.0;
        }
      }
    }
  }
  return clip;
}

// Per-frame object mask: pixels with supersampled coverage >= 0.5.
inline Mask render_object_mask(const SceneSpec& spec, std::uint64_t seed, int patch = 8) {
  validate_spec(spec, patch);
  const auto poses = detail::plan_trajectory(spec, seed);
  Mask mask(spec.frames, spec.height, spec.width);
  for (int l = 0; l < spec.frames; ++l) {
    const auto& pose = poses[static_cast<std::size_t>(l)];
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x)
        mask.at(l, y, x) = detail::pixel_coverage(spec.shape, pose, x, y) >= 0.5 ? 1 : 0;
  }
  return mask;
}

// True when the spec's trajectory fits its frame for this seed.
inline bool scene_fits(const SceneSpec& spec, std::uint64_t seed, int patch = 8) {
  try {
    validate_spec(spec, patch);
    (void)detail::plan_trajectory(spec, seed);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// Canonical description: "a <color> <shape> <motion-verb> on a <background> background".
inline std::string describe(const SceneSpec& spec) {
  std::string s = "a ";
  s += color_word(spec.color);
  s += ' ';
  s += shape_word(spec.shape);
  s += ' ';
  s += motion_word(spec.motion);
  s += " on a ";
  s += background_word(spec.background);
  s += " background";
  return s;
}

enum class TaskKind { kMotionEdit, kColorEdit };

inline const char* task_kind_name(TaskKind k) {
  return k == TaskKind::kMotionEdit ? "motion" : "color";
}

struct EditTask {
  VideoClip video;
  SceneSpec source_spec;
  std::uint64_t render_seed = 0;
  std::string source_description;
  std::string target_prompt;
  int edit_word_index = 0;  // index into whitespace-split target prompt tokens
  Mask edit_region_mask;    // union of per-frame object masks, replicated per frame
  TaskKind kind = TaskKind::kMotionEdit;
};

namespace detail {

// Spin is invisible on a circle (rotational symmetry), so specs never pair
// them; same rule for edit targets so motion edits stay measurable.
inline Motion sample_motion(Rng& rng, Shape shape, const Motion* exclude) {
  for (;;) {
    const auto m = static_cast<Motion>(rng.uniform_int(0, kNumMotions - 1));
    if (shape == Shape::kCircle && m == Motion::kSpin) continue;
    if (exclude != nullptr && m == *exclude) continue;
    return m;
  }
}

inline SceneSpec sample_spec(Rng& rng, const WorldConfig& cfg) {
  SceneSpec spec;
  spec.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
  spec.color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
  spec.motion = sample_motion(rng, spec.shape, nullptr);
  spec.background = static_cast<Background>(rng.uniform_int(0, kNumBackgrounds - 1));
  spec.frames = cfg.frames;
  spec.height = cfg.height;
  spec.width = cfg.width;
  return spec;
}

}  // namespace detail

// Draws a labeled edit task: renders a source scene and swaps exactly one
// attribute word in the target prompt (motion for non-rigid tasks, color for
// rigid ones). Pure function of (seed, cfg).
inline EditTask sample_edit_task(std::uint64_t seed, const WorldConfig& cfg) {
  Rng rng(derive_seed(seed, "world.task"));
  EditTask task;
  task.source_spec = detail::sample_spec(rng, cfg);
  task.render_seed = derive_seed(seed, "world.render");
  task.kind = rng.uniform() < 0.5 ? TaskKind::kMotionEdit : TaskKind::kColorEdit;

  SceneSpec target_spec = task.source_spec;
  if (task.kind == TaskKind::kMotionEdit) {
    target_spec.motion = detail::sample_motion(rng, task.source_spec.shape, &task.source_spec.motion);
    task.edit_word_index = 3;  // [a, color, shape, verb, on, a, bg, background]
  } else {
    Color c;
    do {
      c = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
    } while (c == task.source_spec.color);
    target_spec.color = c;
    task.edit_word_index = 1;
  }

  task.video = render_scene(task.source_spec, task.render_seed, cfg.patch);
  task.source_description = describe(task.source_spec);
  task.target_prompt = describe(target_spec);

  // Ground-truth edit region: union of per-frame object masks.
  const Mask per_frame = render_object_mask(task.source_spec, task.render_seed, cfg.patch);
  Mask region(cfg.frames, cfg.height, cfg.width);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      std::uint8_t any = 0;
      for (int l = 0; l < cfg.frames; ++l) any |= per_frame.at(l, y, x);
      for (int l = 0; l < cfg.frames; ++l) region.at(l, y, x) = any;
    }
  }
  task.edit_region_mask = std::move(region);
  return task;
}

// Same task with only the motion/color kind forced; used by fixed-kind suites.
inline EditTask sample_edit_task_of_kind(std::uint64_t seed, const WorldConfig& cfg, TaskKind kind) {
  for (std::uint64_t probe = 0;; ++probe) {
    EditTask t = sample_edit_task(derive_seed(seed, "world.kindprobe", probe), cfg);
    if (t.kind == kind) return t;
  }
}

}  // namespace neuedit
