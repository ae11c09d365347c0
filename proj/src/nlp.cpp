#include "crane/nlp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "crane/detail/numerics.hpp"

namespace crane::detail {

std::vector<double> merge_breakpoints(const std::vector<double>& a, const std::vector<double>& b,
                                      double eps) {
  std::vector<double> merged;
  merged.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged));
  std::vector<double> out;
  for (double t : merged) {
    if (out.empty() || t - out.back() > eps) out.push_back(t);
  }
  return out;
}

}  // namespace crane::detail

namespace crane::nlp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

LbfgsReport lbfgs_box(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& fg,
                      Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                      const Eigen::VectorXd& upper, int max_iter, double pg_tol, int memory,
                      double step_tol) {
  const int dim = static_cast<int>(x.size());
  x = project(x, lower, upper);

  Eigen::VectorXd grad(dim);
  double f = fg(x, &grad);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::Array<bool, Eigen::Dynamic, 1> active_prev(dim);
  active_prev.setConstant(false);

  LbfgsReport report;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    // Gradient with outward components at active bounds masked off.
    Eigen::VectorXd g_eff = grad;
    Eigen::Array<bool, Eigen::Dynamic, 1> active(dim);
    for (int i = 0; i < dim; ++i) {
      const bool at_lo = x[i] <= lower[i] + 1e-14 && grad[i] > 0.0;
      const bool at_hi = x[i] >= upper[i] - 1e-14 && grad[i] < 0.0;
      active[i] = at_lo || at_hi;
      if (active[i]) g_eff[i] = 0.0;
    }
    const double pg_norm = (x - project(x - grad, lower, upper)).lpNorm<Eigen::Infinity>();
    report.pg_norm = pg_norm;
    if (pg_norm <= pg_tol) {
      report.converged = true;
      break;
    }
    if ((active != active_prev).any()) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    active_prev = active;

    // Two-loop recursion.
    Eigen::VectorXd d = -g_eff;
    if (!s_hist.empty()) {
      std::vector<double> alpha(s_hist.size());
      for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
        alpha[k] = rho_hist[k] * s_hist[k].dot(d);
        d -= alpha[k] * y_hist[k];
      }
      const double gamma =
          s_hist.back().dot(y_hist.back()) / std::max(y_hist.back().squaredNorm(), 1e-300);
      d *= gamma;
      for (std::size_t k = 0; k < s_hist.size(); ++k) {
        const double beta = rho_hist[k] * y_hist[k].dot(d);
        d += (alpha[k] - beta) * s_hist[k];
      }
    }
    if (d.dot(g_eff) > -1e-12 * d.norm() * g_eff.norm()) d = -g_eff;

    // Backtracking Armijo search along the projected path.
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = f;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = project(x + step * d, lower, upper);
      const Eigen::VectorXd dx = x_new - x;
      if (dx.lpNorm<Eigen::Infinity>() <= 1e-18) break;
      f_new = fg(x_new, nullptr);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * grad.dot(dx)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Gradient restart, then give up if even that fails.
      if (d != -g_eff) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
      }
      break;
    }

    Eigen::VectorXd grad_new(dim);
    f_new = fg(x_new, &grad_new);
    const Eigen::VectorXd s_vec = x_new - x;
    const Eigen::VectorXd y_vec = grad_new - grad;
    const double sy = s_vec.dot(y_vec);
    if (sy > 1e-12 * s_vec.norm() * y_vec.norm()) {
      s_hist.push_back(s_vec);
      y_hist.push_back(y_vec);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double step_norm = s_vec.lpNorm<Eigen::Infinity>();
    x = x_new;
    f = f_new;
    grad = grad_new;
    if (step_norm <= step_tol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) break;
  }
  report.f = f;
  report.iterations = iter;
  return report;
}

namespace {

struct AugLag {
  const Problem* p;
  Eigen::VectorXd lambda;  // equality multipliers
  Eigen::VectorXd mu;      // inequality multipliers, >= 0
  double rho = 10.0;
  double fd_step = 1e-7;
  Eigen::VectorXd x_scale;
  mutable long n_evals = 0;

  bool raw(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& ceq,
           Eigen::VectorXd& cin) const {
    ++n_evals;
    return p->eval(x, f, ceq, cin);
  }

  double value(const Eigen::VectorXd& x) const {
    double f;
    Eigen::VectorXd ceq, cin;
    if (!raw(x, f, ceq, cin) || !std::isfinite(f)) return kInf;
    double phi = f / p->f_scale;
    for (int i = 0; i < ceq.size(); ++i)
      phi += lambda[i] * ceq[i] + 0.5 * rho * ceq[i] * ceq[i];
    for (int i = 0; i < cin.size(); ++i) {
      const double t = mu[i] + rho * cin[i];
      if (t > 0.0)
        phi += (t * t - mu[i] * mu[i]) / (2.0 * rho);
      else
        phi -= mu[i] * mu[i] / (2.0 * rho);
    }
    return phi;
  }

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    const double phi = value(x);
    if (grad) {
      grad->resize(x.size());
      if (!std::isfinite(phi)) {
        grad->setZero();
        return phi;
      }
      for (int i = 0; i < x.size(); ++i) {
        const double h = fd_step * std::max(x_scale[i], std::abs(x[i]));
        Eigen::VectorXd xp = x;
        // Step away from the nearer bound so the point stays evaluable.
        const bool backward = x[i] + h > p->upper[i];
        xp[i] = backward ? x[i] - h : x[i] + h;
        const double phip = value(xp);
        const double g = (backward ? phi - phip : phip - phi) / h;
        (*grad)[i] = std::isfinite(phip) ? g : 0.0;
      }
    }
    return phi;
  }
};

}  // namespace

Result solve(const Problem& problem, const Options& opts) {
  const int dim = static_cast<int>(problem.x0.size());
  Result result;
  result.x = project(problem.x0, problem.lower, problem.upper);

  AugLag al;
  al.p = &problem;
  al.lambda = Eigen::VectorXd::Zero(problem.n_eq);
  al.mu = Eigen::VectorXd::Zero(problem.n_ineq);
  al.rho = opts.rho_init;
  al.fd_step = opts.fd_step;
  al.x_scale = problem.x_scale.size() == dim ? problem.x_scale : Eigen::VectorXd::Ones(dim);

  double omega = 1e-2;       // inner tolerance schedule
  double eta = 1e-2;         // constraint progress schedule
  int iterations_left = opts.max_iterations;
  double pg_norm = kInf;

  const auto fg = [&al](const Eigen::VectorXd& x, Eigen::VectorXd* g) { return al(x, g); };

  for (int outer = 0; outer < opts.max_outer && iterations_left > 0; ++outer) {
    const int slice = std::max(20, iterations_left / 2);
    LbfgsReport rep =
        lbfgs_box(fg, result.x, problem.lower, problem.upper, std::min(slice, iterations_left),
                  std::max(omega, opts.kkt_tol), opts.lbfgs_memory, opts.step_tol);
    iterations_left -= rep.iterations;
    result.iterations += rep.iterations;
    pg_norm = rep.pg_norm;

    double f;
    Eigen::VectorXd ceq, cin;
    if (!al.raw(result.x, f, ceq, cin)) break;
    double c_max = 0.0;
    for (int i = 0; i < ceq.size(); ++i) c_max = std::max(c_max, std::abs(ceq[i]));
    for (int i = 0; i < cin.size(); ++i) c_max = std::max(c_max, cin[i]);
    result.f = f;
    result.c_eq = ceq;
    result.c_ineq = cin;
    result.c_max = c_max;
    result.kkt = pg_norm;

    if (c_max <= opts.constraint_tol && pg_norm <= opts.kkt_tol) {
      result.converged = true;
      break;
    }
    if (c_max <= std::max(eta, opts.constraint_tol)) {
      al.lambda += al.rho * ceq;
      for (int i = 0; i < cin.size(); ++i) al.mu[i] = std::max(0.0, al.mu[i] + al.rho * cin[i]);
      omega = std::max(0.2 * omega, opts.kkt_tol);
      eta = std::max(0.2 * eta, opts.constraint_tol);
    } else {
      al.rho = std::min(al.rho * opts.rho_growth, opts.rho_max);
    }
  }
  return result;
}

double restore_feasibility(const Problem& problem, Eigen::VectorXd& x, double target,
                           int max_iter) {
  const int dim = static_cast<int>(x.size());
  x = project(x, problem.lower, problem.upper);

  const auto residual = [&](const Eigen::VectorXd& xv, Eigen::VectorXd& r) -> bool {
    double f;
    Eigen::VectorXd ceq, cin;
    if (!problem.eval(xv, f, ceq, cin)) return false;
    r.resize(ceq.size() + cin.size());
    r.head(ceq.size()) = ceq;
    for (int i = 0; i < cin.size(); ++i) r[ceq.size() + i] = std::max(0.0, cin[i]);
    return true;
  };

  Eigen::VectorXd r;
  if (!residual(x, r)) return kInf;
  double lm = 1e-4;
  for (int it = 0; it < max_iter; ++it) {
    const double r_inf = r.lpNorm<Eigen::Infinity>();
    if (r_inf <= target) break;

    Eigen::MatrixXd jac(r.size(), dim);
    bool jac_ok = true;
    for (int i = 0; i < dim && jac_ok; ++i) {
      const double scale =
          problem.x_scale.size() == dim ? problem.x_scale[i] : 1.0;
      const double h = 1e-7 * std::max(scale, std::abs(x[i]));
      Eigen::VectorXd xp = x;
      const bool backward = x[i] + h > problem.upper[i];
      xp[i] = backward ? x[i] - h : x[i] + h;
      Eigen::VectorXd rp;
      if (!residual(xp, rp) || rp.size() != r.size()) {
        jac_ok = false;
        break;
      }
      jac.col(i) = (backward ? (r - rp) : (rp - r)) / h;
    }
    if (!jac_ok) break;

    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    bool stepped = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::MatrixXd m = jtj;
      m.diagonal() += lm * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd delta = m.ldlt().solve(-jtr);
      const Eigen::VectorXd x_try = project(x + delta, problem.lower, problem.upper);
      Eigen::VectorXd r_try;
      if (residual(x_try, r_try) && r_try.squaredNorm() < r.squaredNorm()) {
        x = x_try;
        r = r_try;
        lm = std::max(lm * 0.3, 1e-12);
        stepped = true;
        break;
      }
      lm *= 5.0;
    }
    if (!stepped) break;
  }
  return r.lpNorm<Eigen::Infinity>();
}

}  // namespace crane::nlp
