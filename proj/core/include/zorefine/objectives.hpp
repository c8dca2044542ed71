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

// Objective zoo.
//
// Analytic fixtures with known constants (quadratics with controlled
// curvature and effective rank, a saturated cubic with a stationary point at
// the origin, linear and constant functions) plus the common Objective
// interface. The MLP classifier lives in mlp.hpp.

#ifndef ZOREFINE_OBJECTIVES_HPP_
#define ZOREFINE_OBJECTIVES_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "zorefine/param_store.hpp"
#include "zorefine/rng.hpp"

namespace zorefine {

/// Sample ids into the dataset bound to an objective. Analytic objectives
/// ignore the batch, so an empty one is fine there.
struct Batch {
  std::vector<std::size_t> indices;

  static Batch full(std::size_t n);
  bool empty() const { return indices.empty(); }
};

/// Constants that are known (or certified numerically) for an objective.
struct ObjectiveConstants {
  std::optional<double> lipschitz;       // L
  std::optional<double> smoothness;      // h
  std::optional<double> pl_mu;           // mu
  std::optional<double> curvature;       // ell = ||H||_op
  std::optional<double> effective_rank;  // r = tr(H) / ||H||_op
  std::optional<double> minimum_value;   // f*
  /// L is certified only on the ball of this radius around the origin.
  std::optional<double> lipschitz_radius;
};

struct ObjectiveDescriptor {
  std::string name;
  ObjectiveConstants constants;
};

class Objective {
 public:
  virtual ~Objective() = default;

  virtual double value(const LayeredParams& params, const Batch& batch) const = 0;
  virtual bool has_gradient() const { return false; }
  /// Throws kGradUnavailable unless has_gradient().
  virtual LayeredParams gradient(const LayeredParams& params,
                                 const Batch& batch) const;
  virtual const ObjectiveDescriptor& descriptor() const = 0;
  /// Parameter layout the objective expects (values are irrelevant).
  virtual const LayeredParams& layout() const = 0;
  /// Number of samples in the bound dataset; 0 for analytic objectives.
  virtual std::size_t num_samples() const { return 0; }
  virtual bool has_activations() const { return false; }

 protected:
  void require_layout(const LayeredParams& params) const;
};

/// f(theta) = 1/2 theta^T A theta over a layer-blocked theta.
class QuadraticObjective final : public Objective {
 public:
  /// A must be symmetric PSD (kNotPsd otherwise); layer sizes must sum to
  /// A.rows(). When `lipschitz_radius` is set, L = ||A||_op * radius is
  /// certified on that ball.
  QuadraticObjective(Eigen::MatrixXd a, std::vector<std::size_t> layer_sizes,
                     std::optional<double> lipschitz_radius = std::nullopt);

  double value(const LayeredParams& params, const Batch& batch) const override;
  bool has_gradient() const override { return true; }
  LayeredParams gradient(const LayeredParams& params,
                         const Batch& batch) const override;
  const ObjectiveDescriptor& descriptor() const override { return descriptor_; }
  const LayeredParams& layout() const override { return layout_; }

  const Eigen::MatrixXd& hessian() const { return a_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  double trace() const { return a_.trace(); }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd eigenvalues_;
  LayeredParams layout_;
  ObjectiveDescriptor descriptor_;
};

QuadraticObjective diagonal_quadratic(const std::vector<double>& diagonal,
                                      std::vector<std::size_t> layer_sizes,
                                      std::optional<double> lipschitz_radius = std::nullopt);

/// Q diag(lambda) Q^T with Haar-random Q and eigenvalues uniform in [lo, hi].
Eigen::MatrixXd random_psd_matrix(std::size_t d, double lo, double hi,
                                  RandomStream& rng);

/// f(theta) = g . theta + c.
class LinearObjective final : public Objective {
 public:
  LinearObjective(LayeredParams slope, double offset = 0.0);

  double value(const LayeredParams& params, const Batch& batch) const override;
  bool has_gradient() const override { return true; }
  LayeredParams gradient(const LayeredParams& params,
                         const Batch& batch) const override;
  const ObjectiveDescriptor& descriptor() const override { return descriptor_; }
  const LayeredParams& layout() const override { return slope_; }

 private:
  LayeredParams slope_;
  double offset_;
  ObjectiveDescriptor descriptor_;
};

class ConstantObjective final : public Objective {
 public:
  ConstantObjective(LayeredParams layout, double c);

  double value(const LayeredParams& params, const Batch& batch) const override;
  bool has_gradient() const override { return true; }
  LayeredParams gradient(const LayeredParams& params,
                         const Batch& batch) const override;
  const ObjectiveDescriptor& descriptor() const override { return descriptor_; }
  const LayeredParams& layout() const override { return layout_; }

 private:
  LayeredParams layout_;
  double c_;
  ObjectiveDescriptor descriptor_;
};

/// One-dimensional f(x) = x^2 + a x^3 on |x| <= c, continued outside with a
/// C^2 extension whose slope saturates (f' tends to a finite limit), so f is
/// globally Lipschitz and smooth. Stationary at 0 by construction.
class CubicBumpObjective final : public Objective {
 public:
  CubicBumpObjective(double a, double clip_radius);

  double value(const LayeredParams& params, const Batch& batch) const override;
  bool has_gradient() const override { return true; }
  LayeredParams gradient(const LayeredParams& params,
                         const Batch& batch) const override;
  const ObjectiveDescriptor& descriptor() const override { return descriptor_; }
  const LayeredParams& layout() const override { return layout_; }

  double f(double x) const;
  double df(double x) const;
  double d2f(double x) const;
  double a() const { return a_; }
  double clip_radius() const { return clip_; }
  static LayeredParams point(double x);

 private:
  double a_;
  double clip_;
  double width_;
  LayeredParams layout_;
  ObjectiveDescriptor descriptor_;
};

/// max_i |g_i - fd_i| / max(||g||_inf, ||fd||_inf), with fd the central
/// difference at `step`; 0 when both gradients vanish.
double check_gradient(const Objective& obj, const LayeredParams& point,
                      const Batch& batch, double step = 1e-5);

/// Central-difference gradient; exposed for tests and diagnostics.
LayeredParams finite_difference_gradient(const Objective& obj,
                                         const LayeredParams& point,
                                         const Batch& batch, double step);

}  // namespace zorefine

#endif  // ZOREFINE_OBJECTIVES_HPP_
