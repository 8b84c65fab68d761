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

#include "possense/levenberg_marquardt.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "possense/error.hpp"

namespace possense {

std::string_view to_string(LmStatus status) {
  switch (status) {
    case LmStatus::gradient_converged: return "gradient_converged";
    case LmStatus::step_converged: return "step_converged";
    case LmStatus::max_iterations: return "max_iterations";
    case LmStatus::damping_exhausted: return "damping_exhausted";
  }
  return "unknown";
}

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& params) {
  const Eigen::VectorXd r0 = residual(params);
  Eigen::MatrixXd jac(r0.size(), params.size());
  Eigen::VectorXd probe = params;
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(params[j]));
    probe[j] = params[j] + h;
    const Eigen::VectorXd plus = residual(probe);
    probe[j] = params[j] - h;
    const Eigen::VectorXd minus = residual(probe);
    probe[j] = params[j];
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

LmResult levenberg_marquardt(const ResidualFn& residual, const std::optional<JacobianFn>& jacobian,
                             const Eigen::VectorXd& init, const LmOptions& options) {
  auto jac_at = [&](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
    return jacobian ? (*jacobian)(p) : numeric_jacobian(residual, p);
  };

  LmResult result;
  result.params = init;
  if (options.normalize) options.normalize(result.params);
  Eigen::VectorXd r = residual(result.params);
  if (!r.allFinite()) throw NumericError("levenberg_marquardt: residuals are not finite at the initial point");
  if (r.size() < init.size()) {
    throw NumericError("levenberg_marquardt: " + std::to_string(r.size()) + " residuals for " +
                       std::to_string(init.size()) + " parameters");
  }
  double cost = r.squaredNorm();
  result.cost_history.push_back(cost);

  Eigen::MatrixXd jac = jac_at(result.params);
  Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::VectorXd jtr = jac.transpose() * r;
  double lambda = options.lambda0;

  for (;;) {
    if (jtr.lpNorm<Eigen::Infinity>() < options.tolerance) {
      result.status = LmStatus::gradient_converged;
      break;
    }
    if (result.iterations >= options.max_iterations) {
      result.status = LmStatus::max_iterations;
      break;
    }

    // Marquardt scaling; zero columns get a small floor so the system stays solvable.
    Eigen::VectorXd diag = jtj.diagonal();
    const double floor = std::max(1e-12 * diag.maxCoeff(), 1e-300);
    diag = diag.cwiseMax(floor);

    bool accepted = false;
    bool tiny_step = false;
    while (lambda <= options.lambda_max) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      const Eigen::VectorXd step = a.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      Eigen::VectorXd trial = result.params + step;
      if (options.normalize) options.normalize(trial);
      const Eigen::VectorXd r_trial = residual(trial);
      const double trial_cost = r_trial.allFinite() ? r_trial.squaredNorm() : INFINITY;
      if (trial_cost < cost) {
        tiny_step = step.norm() < options.tolerance * (result.params.norm() + options.tolerance);
        result.params = trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        break;
      }
      if (step.norm() < options.tolerance * (result.params.norm() + options.tolerance)) {
        tiny_step = true;
        break;
      }
      lambda *= 10.0;
    }

    if (!accepted) {
      result.status = tiny_step ? LmStatus::step_converged : LmStatus::damping_exhausted;
      break;
    }
    ++result.iterations;
    result.cost_history.push_back(cost);
    if (tiny_step) {
      result.status = LmStatus::step_converged;
      break;
    }
    jac = jac_at(result.params);
    jtj = jac.transpose() * jac;
    jtr = jac.transpose() * r;
  }
  result.final_cost = cost;
  return result;
}

}  // namespace possense
