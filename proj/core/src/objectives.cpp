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

#include "zorefine/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zorefine/error.hpp"

namespace zorefine {
namespace {

LayeredParams layout_from_sizes(const std::vector<std::size_t>& sizes) {
  std::vector<LayerBlock> layers;
  layers.reserve(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    layers.push_back({"block" + std::to_string(i), std::vector<double>(sizes[i], 0.0)});
  }
  return LayeredParams(std::move(layers));
}

Eigen::VectorXd to_eigen(const LayeredParams& p) {
  const std::vector<double> flat = flatten(p);
  return Eigen::Map<const Eigen::VectorXd>(flat.data(),
                                           static_cast<Eigen::Index>(flat.size()));
}

LayeredParams from_eigen(const Eigen::VectorXd& v, const LayeredParams& shape) {
  return unflatten(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())),
                   shape);
}

// log(cosh(u)) without overflow.
double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

}  // namespace

Batch Batch::full(std::size_t n) {
  Batch b;
  b.indices.resize(n);
  std::iota(b.indices.begin(), b.indices.end(), std::size_t{0});
  return b;
}

LayeredParams Objective::gradient(const LayeredParams&, const Batch&) const {
  throw Error(ErrorCode::kGradUnavailable,
              "objective '" + descriptor().name + "' has no analytic gradient");
}

void Objective::require_layout(const LayeredParams& params) const {
  if (!params.same_structure(layout())) {
    throw Error(ErrorCode::kShapeMismatch,
                "parameters do not match the layout of '" + descriptor().name + "'");
  }
}

// --- quadratic ---------------------------------------------------------------

QuadraticObjective::QuadraticObjective(Eigen::MatrixXd a,
                                       std::vector<std::size_t> layer_sizes,
                                       std::optional<double> lipschitz_radius)
    : a_(std::move(a)), layout_(layout_from_sizes(layer_sizes)) {
  if (a_.rows() != a_.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "quadratic matrix must be square");
  }
  if (static_cast<std::size_t>(a_.rows()) != layout_.total_dim()) {
    throw Error(ErrorCode::kShapeMismatch,
                "layer sizes do not add up to the matrix dimension");
  }
  const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::kNotPsd, "quadratic matrix is not symmetric");
  }
  // Cholesky on a slightly shifted matrix accepts PSD and rejects indefinite.
  const Eigen::Index d = a_.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(a_ + 1e-10 * scale * Eigen::MatrixXd::Identity(d, d));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPsd, "quadratic matrix is not positive semidefinite");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a_, Eigen::EigenvaluesOnly);
  eigenvalues_ = eig.eigenvalues();
  const double lmin = eigenvalues_.minCoeff();
  const double lmax = eigenvalues_.maxCoeff();

  descriptor_.name = "quadratic";
  auto& c = descriptor_.constants;
  c.curvature = lmax;
  c.smoothness = lmax;
  c.minimum_value = 0.0;
  if (lmin > 0.0) c.pl_mu = lmin;
  if (lmax > 0.0) c.effective_rank = a_.trace() / lmax;
  if (lipschitz_radius) {
    if (!(*lipschitz_radius > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "lipschitz radius must be positive");
    }
    c.lipschitz_radius = *lipschitz_radius;
    c.lipschitz = lmax * *lipschitz_radius;
  }
}

double QuadraticObjective::value(const LayeredParams& params, const Batch&) const {
  require_layout(params);
  const Eigen::VectorXd theta = to_eigen(params);
  return 0.5 * theta.dot(a_ * theta);
}

LayeredParams QuadraticObjective::gradient(const LayeredParams& params,
                                           const Batch&) const {
  require_layout(params);
  return from_eigen(a_ * to_eigen(params), params);
}

QuadraticObjective diagonal_quadratic(const std::vector<double>& diagonal,
                                      std::vector<std::size_t> layer_sizes,
                                      std::optional<double> lipschitz_radius) {
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(
      diagonal.data(), static_cast<Eigen::Index>(diagonal.size()));
  return QuadraticObjective(d.asDiagonal(), std::move(layer_sizes), lipschitz_radius);
}

Eigen::MatrixXd random_psd_matrix(std::size_t d, double lo, double hi,
                                  RandomStream& rng) {
  if (d == 0 || lo < 0.0 || hi < lo) {
    throw Error(ErrorCode::kInvalidArgument, "bad random PSD request");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda(i) = lo + (hi - lo) * rng.uniform();
  Eigen::MatrixXd a = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

// --- linear / constant --------------------------------------------------------

LinearObjective::LinearObjective(LayeredParams slope, double offset)
    : slope_(std::move(slope)), offset_(offset) {
  descriptor_.name = "linear";
  descriptor_.constants.lipschitz = std::sqrt(squared_norm(slope_));
  descriptor_.constants.smoothness = 0.0;
}

double LinearObjective::value(const LayeredParams& params, const Batch&) const {
  require_layout(params);
  return dot(slope_, params) + offset_;
}

LayeredParams LinearObjective::gradient(const LayeredParams& params,
                                        const Batch&) const {
  require_layout(params);
  return slope_;
}

ConstantObjective::ConstantObjective(LayeredParams layout, double c)
    : layout_(std::move(layout)), c_(c) {
  descriptor_.name = "constant";
  descriptor_.constants.lipschitz = 0.0;
  descriptor_.constants.smoothness = 0.0;
  descriptor_.constants.minimum_value = c;
}

double ConstantObjective::value(const LayeredParams& params, const Batch&) const {
  require_layout(params);
  return c_;
}

LayeredParams ConstantObjective::gradient(const LayeredParams& params,
                                          const Batch&) const {
  require_layout(params);
  return LayeredParams::zeros_like(params);
}

// --- cubic bump ---------------------------------------------------------------

CubicBumpObjective::CubicBumpObjective(double a, double clip_radius)
    : a_(a), clip_(clip_radius), width_(0.5 * clip_radius), layout_(point(0.0)) {
  if (!(clip_radius > 0.0) || !std::isfinite(a)) {
    throw Error(ErrorCode::kInvalidArgument, "cubic bump needs clip_radius > 0");
  }
  descriptor_.name = "cubic_bump";
  // Closed-form extremes. Inside [-c, c] f' is a parabola and f'' is
  // linear; outside, f' moves monotonically from its edge value toward
  // d1 +- d2 w and |f''| decays from its edge value.
  const auto poly_d1 = [&](double x) { return 2.0 * x + 3.0 * a_ * x * x; };
  const auto poly_d2 = [&](double x) { return 2.0 + 6.0 * a_ * x; };
  double lip = std::max({std::abs(poly_d1(clip_)), std::abs(poly_d1(-clip_)),
                         std::abs(poly_d1(clip_) + poly_d2(clip_) * width_),
                         std::abs(poly_d1(-clip_) - poly_d2(-clip_) * width_)});
  if (a_ != 0.0 && std::abs(1.0 / (3.0 * a_)) <= clip_) {
    lip = std::max(lip, std::abs(poly_d1(-1.0 / (3.0 * a_))));
  }
  const double smooth = std::max(std::abs(poly_d2(clip_)), std::abs(poly_d2(-clip_)));
  descriptor_.constants.lipschitz = lip;
  descriptor_.constants.smoothness = smooth;
}

LayeredParams CubicBumpObjective::point(double x) {
  return LayeredParams({{"x", {x}}});
}

double CubicBumpObjective::f(double x) const {
  const auto poly = [&](double t) { return t * t + a_ * t * t * t; };
  if (std::abs(x) <= clip_) return poly(x);
  const double edge = x > 0 ? clip_ : -clip_;
  const double d1 = 2.0 * edge + 3.0 * a_ * edge * edge;
  const double d2 = 2.0 + 6.0 * a_ * edge;
  const double u = (x - edge) / width_;
  return poly(edge) + d1 * (x - edge) + d2 * width_ * width_ * log_cosh(u);
}

double CubicBumpObjective::df(double x) const {
  if (std::abs(x) <= clip_) return 2.0 * x + 3.0 * a_ * x * x;
  const double edge = x > 0 ? clip_ : -clip_;
  const double d1 = 2.0 * edge + 3.0 * a_ * edge * edge;
  const double d2 = 2.0 + 6.0 * a_ * edge;
  return d1 + d2 * width_ * std::tanh((x - edge) / width_);
}

double CubicBumpObjective::d2f(double x) const {
  if (std::abs(x) <= clip_) return 2.0 + 6.0 * a_ * x;
  const double edge = x > 0 ? clip_ : -clip_;
  const double d2 = 2.0 + 6.0 * a_ * edge;
  const double s = 1.0 / std::cosh((x - edge) / width_);
  return d2 * s * s;
}

double CubicBumpObjective::value(const LayeredParams& params, const Batch&) const {
  require_layout(params);
  return f(params.block(0)[0]);
}

LayeredParams CubicBumpObjective::gradient(const LayeredParams& params,
                                           const Batch&) const {
  require_layout(params);
  return point(df(params.block(0)[0]));
}

// --- gradient checks ----------------------------------------------------------

LayeredParams finite_difference_gradient(const Objective& obj,
                                         const LayeredParams& point,
                                         const Batch& batch, double step) {
  std::vector<double> x = flatten(point);
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double plus = obj.value(unflatten(x, point), batch);
    x[i] = saved - step;
    const double minus = obj.value(unflatten(x, point), batch);
    x[i] = saved;
    g[i] = (plus - minus) / (2.0 * step);
  }
  return unflatten(g, point);
}

double check_gradient(const Objective& obj, const LayeredParams& point,
                      const Batch& batch, double step) {
  if (!obj.has_gradient()) {
    throw Error(ErrorCode::kGradUnavailable, "check_gradient needs an analytic gradient");
  }
  const std::vector<double> analytic = flatten(obj.gradient(point, batch));
  const std::vector<double> numeric =
      flatten(finite_difference_gradient(obj, point, batch, step));
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

}  // namespace zorefine
