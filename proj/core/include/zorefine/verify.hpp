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

// Numeric checks of the estimator and convergence claims on analytic
// objectives. Every check is a pure function of its inputs and RngKey.

#ifndef ZOREFINE_VERIFY_HPP_
#define ZOREFINE_VERIFY_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "zorefine/objectives.hpp"
#include "zorefine/param_store.hpp"
#include "zorefine/rng.hpp"
#include "zorefine/zo_estimator.hpp"

namespace zorefine {

enum class CheckStatus {
  kPassed,
  kFailed,
  kVacuous,      // the claim has nothing to assert (e.g. zero gradient)
  kObservation,  // outside the claim's regime; recorded, not asserted
};

std::string to_string(CheckStatus s);

inline constexpr double kMeanSigmas = 3.0;   // margin on Monte Carlo means
inline constexpr double kBoundSlack = 1.2;   // slack on trajectory bounds

struct TheoremCheckResult {
  std::string name;
  CheckStatus status = CheckStatus::kFailed;
  std::vector<std::pair<std::string, double>> observed;
  std::vector<std::pair<std::string, double>> bound;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::string tolerance;
  std::string note;

  /// False only for kFailed.
  bool passed() const { return status != CheckStatus::kFailed; }
  double observed_value(const std::string& key) const;
  double bound_value(const std::string& key) const;
};

/// Mean of single-sample estimates at `theta` against the exact gradient
/// A theta, coordinate-wise within kMeanSigmas standard errors.
/// n_samples >= 10^4.
TheoremCheckResult check_unbiasedness(const QuadraticObjective& obj, const LayeredParams& theta,
                                      double beta, std::size_t n_samples, ZoScaling scaling,
                                      const RngKey& key);

/// Total variance of the dim-scaled single-sample estimator at `theta`
/// against 64 d beta^2 L^4. kMissingLipschitzConstant without a certified L.
/// n_trials >= 10^4.
TheoremCheckResult check_variance_bound(const Objective& obj, const LayeredParams& theta,
                                        double beta, std::size_t n_trials, const RngKey& key);

struct PlRunConfig {
  double eta = 0.02;
  double beta = 1e-3;
  std::size_t steps = 2000;
  std::size_t n_seeds = 20;
};

/// Seed-mean suboptimality trajectory of full-mask, single-sample ZO descent
/// from theta0 (entry t is after t updates). kDomainExit if an iterate leaves
/// the ball on which L is certified.
std::vector<double> pl_trajectory(const QuadraticObjective& obj, const LayeredParams& theta0,
                                  const PlRunConfig& run, const RngKey& key);

/// Trajectory at t in {T/4, T/2, T} against
///   kBoundSlack * (exp(-mu eta t) Delta_0 + 32 eta ell r d beta^2 L^4 / mu).
/// kStepsizeTooLarge when eta > 1 / (ell r).
TheoremCheckResult check_pl_convergence(const QuadraticObjective& obj,
                                        const LayeredParams& theta0, const PlRunConfig& run,
                                        const RngKey& key);

/// Iterations for the seed-mean suboptimality to first reach eps_fraction *
/// Delta_0 at eta and at eta / 2; passes when the ratio lies in [1.5, 2.5].
TheoremCheckResult check_stepsize_scaling(const QuadraticObjective& obj,
                                          const LayeredParams& theta0, const PlRunConfig& run,
                                          double eps_fraction, const RngKey& key);

/// Closed-form ingredients of the one-step robustness claim at x, computed
/// by Gaussian quadrature, with sigma_zo^2 estimated from `n_sigma_trials`
/// estimates.
struct OneStepQuantities {
  double grad_smoothed = 0.0;  // d/dx f_rho
  double rob = 0.0;            // Rob_rho(x)
  double sigma_zo2 = 0.0;
  double smoothness = 0.0;     // certified h
  double cap = 0.0;            // G^2 / (h (G^2 + sigma^2))
  double main_text_cap = 0.0;  // G^2 / (h (G^2 + 128 d beta^2 L^4))
};

OneStepQuantities one_step_quantities(const CubicBumpObjective& obj, double x, double rho,
                                      double beta, std::size_t n_sigma_trials, const RngKey& key);

/// Rob_rho(x) = E[f(x + rho v)] - f(x) by quadrature.
double rob_quadrature(const CubicBumpObjective& obj, double x, double rho);

/// n_trials independent single ZO steps x1 = x - eta g, g the rho-smoothed
/// two-sided estimate; passes when mean Rob_rho(x1) + kMeanSigmas * se <
/// Rob_rho(x). kNotStationary when |f'(x)| > 1e-10. With `enforce_cap`,
/// kStepsizeAboveCap when eta >= cap; otherwise such runs are observations.
/// A vanishing smoothed gradient makes the check vacuous. sigma_zo^2 comes
/// from one_step_quantities with key.at_step(1).
TheoremCheckResult check_one_step_robustness(const CubicBumpObjective& obj, double x, double rho,
                                             double eta, double beta, std::size_t n_trials,
                                             const RngKey& key, bool enforce_cap = true,
                                             std::size_t n_sigma_trials = 100000);

struct VerifyConfig {
  std::uint64_t seed = 20260101;
  // unbiasedness
  std::size_t unbiased_dim = 20;
  double unbiased_beta = 1e-2;
  std::size_t unbiased_samples = 100000;
  // variance bound
  double bump_a = 0.5;
  double bump_clip = 1.0;
  std::vector<double> variance_betas{1e-3, 1e-2, 1e-1};
  std::size_t variance_trials = 10000;
  double variance_x = 0.0;
  // PL convergence
  std::size_t pl_dim = 10;
  double pl_lambda_min = 1.0;
  double pl_lambda_max = 4.0;
  double pl_radius = 2.0;
  PlRunConfig pl;
  double pl_eps_fraction = 1e-3;
  // one-step robustness
  double rho = 0.3;
  double one_step_beta = 1e-3;
  double one_step_cap_fraction = 0.5;
  std::size_t one_step_trials = 1000;
  std::size_t sigma_trials = 100000;
};

/// Check names, in execution order.
const std::vector<std::string>& verify_check_names();

/// Runs the suite (or only the named check). kInvalidArgument for an
/// unknown name.
std::vector<TheoremCheckResult> run_verify_suite(const VerifyConfig& cfg,
                                                 const std::string& only = "");

/// Whether the named check counts toward the verify exit status.
bool is_required_check(const std::string& name);

/// JSON array, one object per result.
void write_json(const std::vector<TheoremCheckResult>& results, std::ostream& out);

}  // namespace zorefine

#endif  // ZOREFINE_VERIFY_HPP_
