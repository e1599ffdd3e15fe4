#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace ghlda {

inline double log_sum_exp(const std::vector<double>& logw) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double w : logw) mx = std::max(mx, w);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double w : logw) acc += std::exp(w - mx);
  return mx + std::log(acc);
}

// Gumbel-max draw from unnormalized log weights.
template <class Rng>
int sample_log_categorical(const std::vector<double>& logw, Rng& rng) {
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  int best = -1;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logw.size(); ++i) {
    double g = -std::log(-std::log(unif(rng)));
    if (!std::isfinite(logw[i])) continue;
    double v = logw[i] + g;
    if (best < 0 || v > best_val) {
      best = static_cast<int>(i);
      best_val = v;
    }
  }
  return best;
}

template <class Rng>
int sample_categorical(const std::vector<double>& w, Rng& rng) {
  double total = 0.0;
  for (double x : w) total += x;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double r = unif(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (r <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

}  // namespace ghlda
