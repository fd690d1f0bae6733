#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "neuedit/common.hpp"

namespace neuedit {

enum class ScheduleKind { kLinear, kCosine };

inline const char* schedule_kind_name(ScheduleKind k) {
  return k == ScheduleKind::kLinear ? "linear" : "cosine";
}

inline ScheduleKind schedule_kind_from_name(const std::string& s) {
  if (s == "linear") return ScheduleKind::kLinear;
  if (s == "cosine") return ScheduleKind::kCosine;
  fail("bad-config", "unknown schedule kind: " + s);
}

// Cumulative signal fractions alpha_bar_t for t in 1..T, strictly decreasing,
// with the t = 0 boundary pinned to exactly 1.
struct NoiseSchedule {
  int t_steps = 0;
  ScheduleKind kind = ScheduleKind::kCosine;
  std::vector<double> alpha_bar;  // index t-1 holds alpha_bar_t

  double alpha_bar_at(int t) const {
    require(t >= 0 && t <= t_steps, "t-out-of-range",
            "schedule: t = " + std::to_string(t) + " outside [0, T]");
    return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 1)];
  }

  // Per-step signal fraction alpha_t = alpha_bar_t / alpha_bar_{t-1}.
  double alpha_at(int t) const {
    require(t >= 1 && t <= t_steps, "t-out-of-range", "schedule: alpha_t needs 1 <= t <= T");
    return alpha_bar_at(t) / alpha_bar_at(t - 1);
  }

  double beta_at(int t) const { return 1.0 - alpha_at(t); }
};

inline NoiseSchedule make_schedule(int t_steps, ScheduleKind kind) {
  require(t_steps >= 2, "bad-config", "make_schedule: T must be >= 2");
  NoiseSchedule s;
  s.t_steps = t_steps;
  s.kind = kind;
  s.alpha_bar.resize(static_cast<std::size_t>(t_steps));

  if (kind == ScheduleKind::kLinear) {
    // Signal fraction falls linearly from 1 to 0.04 regardless of T.
    const double final_ab = 0.04;
    for (int t = 1; t <= t_steps; ++t)
      s.alpha_bar[static_cast<std::size_t>(t - 1)] =
          1.0 - (1.0 - final_ab) * static_cast<double>(t) / t_steps;
  } else {
    // Squared-cosine profile with a small offset at both ends so the final
    // value stays strictly positive.
    const double off = 0.008;
    auto f = [&](double u) {
      const double arg = (u * 0.995 + off) / (1.0 + off) * (M_PI / 2.0);
      const double c = std::cos(arg);
      return c * c;
    };
    const double f0 = f(0.0);
    for (int t = 1; t <= t_steps; ++t)
      s.alpha_bar[static_cast<std::size_t>(t - 1)] = f(static_cast<double>(t) / t_steps) / f0;
  }

  double prev = 1.0;
  for (int t = 1; t <= t_steps; ++t) {
    const double ab = s.alpha_bar[static_cast<std::size_t>(t - 1)];
    require(ab > 0.0 && ab < prev, "bad-schedule", "make_schedule: alpha_bar not strictly decreasing");
    prev = ab;
  }
  require(s.alpha_bar.back() < 0.05, "bad-schedule", "make_schedule: final alpha_bar must be < 0.05");
  return s;
}

}  // namespace neuedit
