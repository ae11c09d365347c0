#pragma once

#include <Eigen/Core>
#include <functional>

namespace crane::nlp {

struct Options {
  int max_iterations = 500;      // total inner iterations over all outer rounds
  double kkt_tol = 1e-6;         // projected-gradient tolerance, scaled
  double constraint_tol = 1e-8;  // scaled residual target
  double step_tol = 1e-9;
  double fd_step = 1e-7;         // forward-difference step, scaled
  int lbfgs_memory = 20;
  double rho_init = 10.0;
  double rho_growth = 10.0;
  double rho_max = 1e9;
  int max_outer = 25;
};

/// Smooth constrained problem in batch form:
///   min f(x)  s.t.  c_eq(x) = 0, c_ineq(x) <= 0, lower <= x <= upper.
/// Callers are expected to pre-scale constraints to O(1).
struct Problem {
  Eigen::VectorXd x0;
  Eigen::VectorXd lower, upper;  // may contain +/- infinity
  Eigen::VectorXd x_scale;       // empty = ones
  double f_scale = 1.0;
  int n_eq = 0;
  int n_ineq = 0;
  /// Returns false to flag an unevaluable point (treated as +infinity).
  std::function<bool(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& c_eq,
                     Eigen::VectorXd& c_ineq)>
      eval;
};

struct Result {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd c_eq, c_ineq;
  bool converged = false;
  double kkt = 0.0;
  double c_max = 0.0;  // scaled max violation (equalities and active inequalities)
  int iterations = 0;
};

/// Augmented-Lagrangian solver (PHR form for inequalities) with a projected
/// L-BFGS inner loop and forward-difference gradients.
Result solve(const Problem& problem, const Options& opts = {});

struct LbfgsReport {
  double f = 0.0;
  double pg_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected L-BFGS over a box. `fg` returns the value and, when the pointer
/// is non-null, the gradient. Also used directly by test oracles that bring
/// analytic gradients.
LbfgsReport lbfgs_box(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& fg,
                      Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                      const Eigen::VectorXd& upper, int max_iter, double pg_tol, int memory = 20,
                      double step_tol = 1e-12);

/// Levenberg-damped Gauss-Newton projection onto the feasible set
/// {c_eq = 0, c_ineq <= 0, box}: minimizes the squared residual including
/// hinged inequality violations. Returns the achieved max residual.
double restore_feasibility(const Problem& problem, Eigen::VectorXd& x, double target,
                           int max_iter = 60);

}  // namespace crane::nlp
