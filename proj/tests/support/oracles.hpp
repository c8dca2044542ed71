// Copyright 2026 The zorefine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reference implementations used as test oracles. They are written
// independently of the library (plain loops, no shared helpers) so a test
// compares two routes to the same number.

#ifndef ZOREFINE_TESTS_ORACLES_HPP_
#define ZOREFINE_TESTS_ORACLES_HPP_

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace zorefine::oracle {

/// Nearest point of the grid {k s : |k| <= q}, q = 2^(bits-1) - 1,
/// s = max|w| / q, found by scanning every level. Ties go to the level of
/// larger magnitude.
inline std::vector<double> nearest_level_quantize(const std::vector<double>& w, int bits) {
  double max_abs = 0.0;
  for (double x : w) max_abs = std::max(max_abs, std::abs(x));
  std::vector<double> out(w.size(), 0.0);
  if (max_abs == 0.0) return out;
  const int q = (1 << (bits - 1)) - 1;
  const double s = max_abs / q;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double best = 0.0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int k = -q; k <= q; ++k) {
      const double level = k * s;
      const double err = std::abs(w[i] - level);
      const bool tie = std::abs(err - best_err) <= 1e-12 * max_abs;
      if ((err < best_err && !tie) || (tie && std::abs(level) > std::abs(best))) {
        best = level;
        best_err = err;
      }
    }
    out[i] = best;
  }
  // Endpoints are reproduced exactly by construction of s.
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (std::abs(w[i]) == max_abs) out[i] = w[i];
  }
  return out;
}

/// 1/2 x^T A x with A given row-major.
inline double quadratic_form(const std::vector<double>& a, const std::vector<double>& x) {
  const std::size_t d = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) s += x[i] * a[i * d + j] * x[j];
  }
  return 0.5 * s;
}

/// Forward pass of a tanh MLP, one sample, loops only. `blocks[l]` is the
/// row-major (out x in) weight followed by the bias. Returns the input of
/// every layer followed by the logits.
inline std::vector<std::vector<double>> mlp_activations(
    const std::vector<std::vector<double>>& blocks, const std::vector<std::size_t>& widths,
    const std::vector<double>& input) {
  std::vector<std::vector<double>> acts{input};
  std::vector<double> x = input;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    std::vector<double> z(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double s = blocks[l][out * in + r];
      for (std::size_t c = 0; c < in; ++c) s += blocks[l][r * in + c] * x[c];
      z[r] = (l + 2 == widths.size()) ? s : std::tanh(s);
    }
    x = z;
    acts.push_back(x);
  }
  return acts;
}

/// Softmax cross-entropy of a logit vector against `label`.
inline double cross_entropy(const std::vector<double>& logits, int label) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s) - logits[static_cast<std::size_t>(label)];
}

/// Sample mean and standard error of the mean.
struct Moments {
  double mean = 0.0;
  double std_err = 0.0;
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.std_err = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return m;
}

}  // namespace zorefine::oracle

#endif  // ZOREFINE_TESTS_ORACLES_HPP_
