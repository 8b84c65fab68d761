/**
 * Copyright 2026 The possense Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace possense {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LmOptions {
  int max_iterations = 200;
  /// Initial damping, relative to the diagonal of J^T J.
  double lambda0 = 1e-3;
  /// Absolute threshold on |J^T r|_inf and relative threshold on the step.
  double tolerance = 1e-12;
  /// Damping above this is treated as unrecoverable.
  double lambda_max = 1e16;
  /// Applied to every trial point (e.g. re-centering a rotation vector).
  std::function<void(Eigen::VectorXd&)> normalize;
};

enum class LmStatus {
  gradient_converged,
  step_converged,
  max_iterations,
  /// Damping grew past lambda_max without finding a decreasing step.
  damping_exhausted,
};

std::string_view to_string(LmStatus status);

struct LmResult {
  Eigen::VectorXd params;
  /// Sum of squared residuals at `params`.
  double final_cost = 0.0;
  LmStatus status = LmStatus::max_iterations;
  /// Accepted steps.
  int iterations = 0;
  /// Cost after each accepted step, starting with the initial cost.
  std::vector<double> cost_history;

  bool converged() const {
    return status == LmStatus::gradient_converged || status == LmStatus::step_converged;
  }
};

/// Central differences with step 1e-6 * max(1, |theta_j|).
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& params);

/// Damped Gauss-Newton (Marquardt scaling). Minimizes |r(theta)|^2. Uses the
/// analytic Jacobian when given, otherwise numeric_jacobian. Throws
/// NumericError for non-finite residuals at the initial point or when there
/// are fewer residuals than parameters.
LmResult levenberg_marquardt(const ResidualFn& residual, const std::optional<JacobianFn>& jacobian,
                             const Eigen::VectorXd& init, const LmOptions& options = {});

}  // namespace possense
