#include "crane/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/quadrature/gauss.hpp>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include "crane/detail/numerics.hpp"
#include "crane/nlp.hpp"

namespace crane {

const char* to_string(Objective objective) {
  return objective == Objective::Recuperation ? "recuperation" : "consumption";
}

void ProblemSpec::validate() const {
  limits.validate();
  model.validate();
  if (!(s0 >= 0.0) || !std::isfinite(s0)) throw std::domain_error("s0 must be nonnegative");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::domain_error("horizon must be positive");
  if (std::abs(p_slow.duration() - T) > 1e-9 * std::max(1.0, T))
    throw std::domain_error("slow power profile does not span the horizon");
}

bool SegmentPlan::has_el() const { return el_count() > 0; }

int SegmentPlan::el_count() const {
  int n = 0;
  for (const PlanItem& it : items)
    if (it.kind == SegmentKind::EL) ++n;
  return n;
}

namespace {

std::mutex g_throughput_mutex;
ThroughputStats g_throughput;

std::string plan_label(const std::vector<PlanItem>& items) {
  std::string label;
  for (const PlanItem& it : items) {
    if (!label.empty()) label += ' ';
    switch (it.kind) {
      case SegmentKind::CD_j: label += it.sign > 0 ? "J+" : "J-"; break;
      case SegmentKind::CD_a: label += it.sign > 0 ? "A+" : "A-"; break;
      case SegmentKind::CD_v: label += it.sign > 0 ? "V1" : "V0"; break;
      case SegmentKind::EL: label += "EL"; break;
    }
  }
  return label;
}

}  // namespace

ThroughputStats& throughput_stats() { return g_throughput; }

void reset_throughput_stats() {
  std::lock_guard<std::mutex> lock(g_throughput_mutex);
  g_throughput = ThroughputStats{};
}

// ---------------------------------------------------------------------------
// Plan enumeration
// ---------------------------------------------------------------------------

namespace {

using Items = std::vector<PlanItem>;

const PlanItem Jp{SegmentKind::CD_j, +1};
const PlanItem Jm{SegmentKind::CD_j, -1};
const PlanItem Ap{SegmentKind::CD_a, +1};
const PlanItem Am{SegmentKind::CD_a, -1};
const PlanItem V1{SegmentKind::CD_v, 1};
const PlanItem V0{SegmentKind::CD_v, 0};
const PlanItem ELi{SegmentKind::EL, 0};

// Single-move cores. Jerk ramps open and close every motion so the rest
// boundary conditions stay reachable; at most one stationarity arc.
const std::vector<Items>& single_cores() {
  static const std::vector<Items> cores = {
      {Jp, Jm, Jp},                          // jerk triangle
      {Jp, ELi, Jp},                         // stationarity arc with jerk caps
      {Jp, ELi, Jm, Jp},                     // asymmetric exits
      {Jp, Jm, ELi, Jp},
      {Jp, Ap, Jm, Am, Jp},                  // held acceleration, no cruise
      {Jp, Jm, V1, Jm, Jp},                  // band-edge cruise, gentle ramps
      {Jp, Jm, ELi, Jm, Jp},
      {Jp, Ap, Jm, ELi, Jm, Jp},
      {Jp, Jm, ELi, Jm, Am, Jp},
      {Jp, Ap, Jm, V1, Jm, Jp},
      {Jp, Jm, V1, Jm, Am, Jp},
      {Jp, Ap, Jm, V1, Jm, Am, Jp},          // full time-minimal shape
      {Jp, Ap, Jm, ELi, Jm, Am, Jp},         // stationarity center
  };
  return cores;
}

// Move cores repeated in stop-and-go motifs (CD only).
const std::vector<Items>& motif_cores() {
  static const std::vector<Items> cores = {
      {Jp, Jm, Jp},
      {Jp, Ap, Jm, Am, Jp},
      {Jp, Jm, V1, Jm, Jp},
      {Jp, Ap, Jm, V1, Jm, Am, Jp},
  };
  return cores;
}

void add_decorated(std::map<std::string, Items>& out, const Items& core, int n) {
  for (int lead = 0; lead <= 1; ++lead) {
    for (int trail = 0; trail <= 1; ++trail) {
      if (static_cast<int>(core.size()) + lead + trail != n) continue;
      Items items;
      if (lead) items.push_back(V0);
      items.insert(items.end(), core.begin(), core.end());
      if (trail) items.push_back(V0);
      out.emplace(plan_label(items), items);
    }
  }
}

Items join_moves(const std::vector<const Items*>& moves) {
  Items items;
  for (std::size_t i = 0; i < moves.size(); ++i) {
    if (i > 0) items.push_back(V0);
    items.insert(items.end(), moves[i]->begin(), moves[i]->end());
  }
  return items;
}

}  // namespace

std::vector<SegmentPlan> enumerate_plans(int n, const ProblemSpec& spec) {
  std::vector<SegmentPlan> plans;
  if (n < 1) return plans;
  if (n == 1) {
    plans.push_back({{V0}, "V0"});
    return plans;
  }
  if (spec.s0 < kIdleDistance) return plans;  // only the dwell plan can cover it

  std::map<std::string, Items> unique;

  for (const Items& core : single_cores()) add_decorated(unique, core, n);

  // Repeated-move motifs for the large-n regime.
  for (const Items& core : motif_cores()) {
    for (int k = 2; k <= 6; ++k) {
      std::vector<const Items*> moves(k, &core);
      add_decorated(unique, join_moves(moves), n);
    }
  }
  // Mixed pairs fill interval counts the uniform motifs miss.
  const auto& mc = motif_cores();
  for (std::size_t a = 0; a < mc.size(); ++a) {
    for (std::size_t b = 0; b < mc.size(); ++b) {
      if (a == b) continue;
      add_decorated(unique, join_moves({&mc[a], &mc[b]}), n);
    }
  }

  for (auto& [label, items] : unique) plans.push_back({items, label});
  // Prefer simpler plans when trimming.
  std::stable_sort(plans.begin(), plans.end(), [](const SegmentPlan& a, const SegmentPlan& b) {
    const int ea = a.el_count(), eb = b.el_count();
    if (ea != eb) return ea < eb;
    return a.label < b.label;
  });
  if (plans.size() > 48) plans.resize(48);
  return plans;
}

// ---------------------------------------------------------------------------
// Fixed-plan NLP
// ---------------------------------------------------------------------------

namespace {

enum class ElMode { SurrogateClosed, FullFixed, FullAdaptive };

struct BuildOutput {
  std::vector<Segment> segments;
  std::vector<double> t_cum;   // size n+1
  std::vector<double> v_in, a_in;  // state entering each planned item
  double v_end = 0.0, a_end = 0.0;
  double sum_d = 0.0;
  double dist = 0.0;
};

class PlanProblem {
 public:
  PlanProblem(const SegmentPlan& plan, const ProblemSpec& spec, const SolverOptions& opts,
              const QuadraticSurrogate& fit, ElMode mode)
      : plan_(plan), spec_(spec), opts_(opts), fit_(fit), mode_(mode) {
    n_ = plan.size();
    has_el_ = plan.has_el();
    s_char_ = std::max(spec.s0, 1e-2 * spec.limits.v_max * spec.T);
    lambda_scale_ = std::max(
        {1.0, std::abs(fit_.c10) + 2.0 * std::abs(fit_.c20) * spec.limits.v_max});
    n_eq_ = 4;  // horizon, distance, terminal velocity, terminal acceleration
    for (const PlanItem& it : plan_.items) {
      if (it.kind == SegmentKind::CD_a) n_eq_ += 1;
      if (it.kind == SegmentKind::CD_v) n_eq_ += 2;
    }
    n_ineq_ = 0;
    for (const PlanItem& it : plan_.items) {
      switch (it.kind) {
        case SegmentKind::CD_v: n_ineq_ += 2; break;
        case SegmentKind::CD_a: n_ineq_ += 2; break;
        case SegmentKind::CD_j: n_ineq_ += 3; break;  // velocity band + acceleration peak
        case SegmentKind::EL: n_ineq_ += 4; break;
      }
    }
  }

  int dim() const { return n_ + (has_el_ ? 1 : 0); }
  int n_eq() const { return n_eq_; }
  int n_ineq() const { return n_ineq_; }
  bool has_el() const { return has_el_; }
  double lambda_scale() const { return lambda_scale_; }

  bool build(const Eigen::VectorXd& x, BuildOutput& out) const {
    const KinematicLimits& lim = spec_.limits;
    out.segments.clear();
    out.segments.reserve(n_);
    out.t_cum.assign(1, 0.0);
    out.v_in.assign(n_, 0.0);
    out.a_in.assign(n_, 0.0);
    const double lambda = has_el_ ? x[n_] : 0.0;

    double v = 0.0, a = 0.0, dist = 0.0;
    for (int i = 0; i < n_; ++i) {
      const PlanItem& it = plan_.items[i];
      const double d = x[i];
      if (!(d > 0.0) || !std::isfinite(d)) return false;
      out.v_in[i] = v;
      out.a_in[i] = a;

      Segment seg;
      seg.duration = d;
      seg.kind = it.kind;
      switch (it.kind) {
        case SegmentKind::CD_j:
          seg.v0 = v;
          seg.a0 = a;
          seg.jerk = it.sign * lim.j_max;
          v += a * d + 0.5 * seg.jerk * d * d;
          a += seg.jerk * d;
          break;
        case SegmentKind::CD_a:
          seg.v0 = v;
          seg.a0 = seg.accel = it.sign > 0 ? lim.a_max : -lim.a_max;
          v += seg.accel * d;
          a = seg.accel;
          break;
        case SegmentKind::CD_v:
          seg.v0 = v;
          seg.a0 = 0.0;
          a = 0.0;
          break;
        case SegmentKind::EL: {
          seg.v0 = v;
          seg.a0 = a;
          seg.lambda = lambda;
          try {
            ElSegmentSolution sol;
            if (mode_ == ElMode::SurrogateClosed) {
              sol = el_closed_form(fit_, lambda, v, a, d);
            } else {
              ElNumericOptions eopts;
              eopts.v_char = lim.v_max;
              eopts.a_char = lim.a_max;
              eopts.v_guard = 10.0 * lim.v_max;
              eopts.verify_residual = mode_ == ElMode::FullAdaptive;
              if (mode_ == ElMode::FullFixed) eopts.fixed_steps = opts_.el_fixed_steps;
              sol = el_numeric(spec_.model, lambda, v, a, d, eopts);
            }
            v = sol.v_end();
            a = sol.a_end();
            if (!std::isfinite(v) || !std::isfinite(a) || std::abs(v) > 20.0 * lim.v_max)
              return false;
            seg.el = std::make_shared<ElSegmentSolution>(std::move(sol));
          } catch (const SingularElError&) {
            return false;
          } catch (const ElDivergenceError&) {
            return false;
          }
          break;
        }
      }
      dist += seg.distance(d);
      out.t_cum.push_back(out.t_cum.back() + d);
      out.segments.push_back(std::move(seg));
    }
    out.v_end = v;
    out.a_end = a;
    out.sum_d = out.t_cum.back();
    out.dist = dist;
    return true;
  }

  // Smoothed objective by fixed Gauss-Legendre panels between breakpoints;
  // deterministic and smooth in the decision vector.
  double objective_of(const BuildOutput& b) const {
    const bool rec = spec_.objective == Objective::Recuperation;
    const double eps = opts_.abs_smooth_eps;
    const auto smooth = [&](double g) { return rec ? std::sqrt(g * g + eps * eps) : g; };

    std::vector<double> breaks =
        detail::merge_breakpoints(b.t_cum, spec_.p_slow.knots(), 1e-12);
    double total = 0.0;
    std::size_t seg_idx = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
      const double lo = breaks[i], hi = breaks[i + 1];
      if (hi > b.sum_d + 1e-12) break;
      while (seg_idx + 1 < b.segments.size() && lo >= b.t_cum[seg_idx + 1] - 1e-12) ++seg_idx;
      const Segment& seg = b.segments[seg_idx];
      const double t0 = b.t_cum[seg_idx];
      const auto f = [&](double t) {
        const double tau = t - t0;
        return smooth(spec_.p_slow.eval(t) + spec_.model.power(seg.velocity(tau), seg.acceleration(tau)));
      };
      total += boost::math::quadrature::gauss<double, 5>::integrate(f, lo, hi);
    }
    // Tail when the grid does not reach T yet: the drive idles at its final state.
    if (b.sum_d < spec_.T - 1e-12) {
      const double p_end = spec_.model.power(b.v_end, b.a_end);
      const auto f = [&](double t) { return smooth(spec_.p_slow.eval(t) + p_end); };
      std::vector<double> tail = {b.sum_d, spec_.T};
      for (double k : spec_.p_slow.knots())
        if (k > b.sum_d + 1e-12 && k < spec_.T - 1e-12) tail.push_back(k);
      std::sort(tail.begin(), tail.end());
      for (std::size_t i = 0; i + 1 < tail.size(); ++i)
        total += boost::math::quadrature::gauss<double, 5>::integrate(f, tail[i], tail[i + 1]);
    }
    return total;
  }

  void constraints_of(const BuildOutput& b, Eigen::VectorXd& ceq, Eigen::VectorXd& cin) const {
    const KinematicLimits& lim = spec_.limits;
    ceq.resize(n_eq_);
    cin.resize(n_ineq_);
    int e = 0;
    ceq[e++] = (b.sum_d - spec_.T) / spec_.T;
    ceq[e++] = (b.dist - spec_.s0) / s_char_;
    ceq[e++] = b.v_end / lim.v_max;
    ceq[e++] = b.a_end / lim.a_max;
    for (int i = 0; i < n_; ++i) {
      const PlanItem& it = plan_.items[i];
      if (it.kind == SegmentKind::CD_a)
        ceq[e++] = (b.a_in[i] - it.sign * lim.a_max) / lim.a_max;
      if (it.kind == SegmentKind::CD_v) {
        ceq[e++] = b.a_in[i] / lim.a_max;
        ceq[e++] = (b.v_in[i] - (it.sign > 0 ? lim.v_max : 0.0)) / lim.v_max;
      }
    }

    int q = 0;
    for (int i = 0; i < n_; ++i) {
      const Segment& seg = b.segments[i];
      const double d = seg.duration;
      switch (seg.kind) {
        case SegmentKind::CD_v: {
          cin[q++] = (seg.v0 - lim.v_max) / lim.v_max;
          cin[q++] = -seg.v0 / lim.v_max;
          break;
        }
        case SegmentKind::CD_a: {
          const double v1 = seg.velocity_end();
          cin[q++] = (std::max(seg.v0, v1) - lim.v_max) / lim.v_max;
          cin[q++] = -std::min(seg.v0, v1) / lim.v_max;
          break;
        }
        case SegmentKind::CD_j: {
          double v_lo = std::min(seg.v0, seg.velocity_end());
          double v_hi = std::max(seg.v0, seg.velocity_end());
          const double t_vertex = -seg.a0 / seg.jerk;
          if (t_vertex > 0.0 && t_vertex < d) {
            const double v_vertex = seg.velocity(t_vertex);
            v_lo = std::min(v_lo, v_vertex);
            v_hi = std::max(v_hi, v_vertex);
          }
          cin[q++] = (v_hi - lim.v_max) / lim.v_max;
          cin[q++] = -v_lo / lim.v_max;
          cin[q++] =
              (std::max(std::abs(seg.a0), std::abs(seg.accel_end())) - lim.a_max) / lim.a_max;
          break;
        }
        case SegmentKind::EL: {
          double v_lo = seg.v0, v_hi = seg.v0, a_pk = std::abs(seg.a0), j_pk = 0.0;
          constexpr int kSamples = 64;
          for (int s = 0; s <= kSamples; ++s) {
            const double tau = d * s / kSamples;
            const double vv = seg.el->v(tau);
            v_lo = std::min(v_lo, vv);
            v_hi = std::max(v_hi, vv);
            a_pk = std::max(a_pk, std::abs(seg.el->a(tau)));
            j_pk = std::max(j_pk, std::abs(seg.el->jerk(tau)));
          }
          cin[q++] = (v_hi - lim.v_max) / lim.v_max;
          cin[q++] = -v_lo / lim.v_max;
          cin[q++] = (a_pk - lim.a_max) / lim.a_max;
          cin[q++] = (j_pk - lim.j_max) / lim.j_max;
          break;
        }
      }
    }
  }

  bool eval(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& ceq,
            Eigen::VectorXd& cin) const {
    BuildOutput b;
    if (!build(x, b)) return false;
    f = objective_of(b);
    if (!std::isfinite(f)) return false;
    constraints_of(b, ceq, cin);
    return true;
  }

  nlp::Problem make_nlp(const Eigen::VectorXd& x0) const {
    nlp::Problem p;
    const int d = dim();
    p.x0 = x0;
    p.lower.setConstant(d, opts_.d_min);
    p.upper.setConstant(d, spec_.T);
    p.x_scale.setConstant(d, std::max(0.05 * spec_.T, 10.0 * opts_.d_min));
    if (has_el_) {
      p.lower[n_] = -1e6 * lambda_scale_;
      p.upper[n_] = 1e6 * lambda_scale_;
      p.x_scale[n_] = lambda_scale_;
    }
    p.n_eq = n_eq_;
    p.n_ineq = n_ineq_;
    double f0 = 1.0;
    {
      double f;
      Eigen::VectorXd ceq, cin;
      if (eval(x0, f, ceq, cin)) f0 = std::max(1.0, std::abs(f));
    }
    p.f_scale = f0;
    p.eval = [this](const Eigen::VectorXd& x, double& f, Eigen::VectorXd& ceq,
                    Eigen::VectorXd& cin) { return eval(x, f, ceq, cin); };
    return p;
  }

  // Deterministic duration-split seeds: 0 time-proportional, 1 front-loaded,
  // 2 back-loaded.
  Eigen::VectorXd seed(int which) const {
    const KinematicLimits& lim = spec_.limits;
    Eigen::VectorXd x(dim());

    // Move blocks (maximal runs without dwells) share the distance equally.
    std::vector<std::pair<int, int>> blocks;  // [first, last] item indices
    int i = 0;
    while (i < n_) {
      if (plan_.items[i].kind == SegmentKind::CD_v && plan_.items[i].sign == 0) {
        ++i;
        continue;
      }
      int j = i;
      while (j + 1 < n_ &&
             !(plan_.items[j + 1].kind == SegmentKind::CD_v && plan_.items[j + 1].sign == 0))
        ++j;
      blocks.push_back({i, j});
      i = j + 1;
    }
    const int n_blocks = std::max<std::size_t>(blocks.size(), 1);
    const double s_block = spec_.s0 / n_blocks;

    double t_moves = 0.0;
    std::vector<double> durations(n_, opts_.d_min);
    for (const auto& [first, last] : blocks) {
      SCurvePhases ph = time_minimal_phases(std::max(s_block, kIdleDistance), lim);
      // Phase times mapped by item role; middle arcs take the cruise share.
      double block_total = 0.0;
      for (int k = first; k <= last; ++k) {
        const PlanItem& it = plan_.items[k];
        double dk = opts_.d_min * 10.0;
        switch (it.kind) {
          case SegmentKind::CD_j: dk = std::max(ph.t_jerk, 10.0 * opts_.d_min); break;
          case SegmentKind::CD_a: dk = std::max(ph.t_accel, 10.0 * opts_.d_min); break;
          case SegmentKind::CD_v:
          case SegmentKind::EL:
            dk = std::max(ph.t_cruise, 50.0 * opts_.d_min);
            break;
        }
        durations[k] = dk;
        block_total += dk;
      }
      t_moves += block_total;
    }

    int n_dwell = 0;
    for (int k = 0; k < n_; ++k)
      if (plan_.items[k].kind == SegmentKind::CD_v && plan_.items[k].sign == 0) ++n_dwell;

    const double slack = spec_.T - t_moves;
    if (n_dwell > 0 && slack > 0.0) {
      // Distribute the idle time; variants bias it to the front or back.
      std::vector<double> weights(n_dwell, 1.0);
      if (which == 1) weights.front() = 4.0;
      if (which == 2) weights.back() = 4.0;
      double w_sum = 0.0;
      for (double w : weights) w_sum += w;
      int dwell_idx = 0;
      for (int k = 0; k < n_; ++k) {
        if (plan_.items[k].kind == SegmentKind::CD_v && plan_.items[k].sign == 0)
          durations[k] = std::max(opts_.d_min, slack * weights[dwell_idx++] / w_sum);
      }
    } else {
      // No dwell available: stretch the movement over the horizon.
      const double factor = spec_.T / std::max(t_moves, 1e-9);
      for (int k = 0; k < n_; ++k) durations[k] = std::max(opts_.d_min, durations[k] * factor);
      if (which == 1 || which == 2) {
        // Perturb the split so the seeds explore different basins.
        const double tilt = which == 1 ? 0.85 : 1.15;
        double sum = 0.0;
        for (int k = 0; k < n_; ++k) {
          const double frac = n_ > 1 ? static_cast<double>(k) / (n_ - 1) : 0.0;
          durations[k] *= tilt + (1.0 - tilt) * 2.0 * frac;
          sum += durations[k];
        }
        for (int k = 0; k < n_; ++k) durations[k] *= spec_.T / sum;
      }
    }

    for (int k = 0; k < n_; ++k) x[k] = std::clamp(durations[k], opts_.d_min, spec_.T);
    if (has_el_) {
      const double v_bar = spec_.s0 / spec_.T;
      x[n_] = -(fit_.c10 + 2.0 * fit_.c20 * v_bar);
    }
    return x;
  }

  Trajectory to_trajectory(const BuildOutput& b) const {
    std::vector<Segment> segs = b.segments;
    return Trajectory::from_segments(std::move(segs), spec_.direction_sign);
  }

 private:
  const SegmentPlan& plan_;
  const ProblemSpec& spec_;
  const SolverOptions& opts_;
  const QuadraticSurrogate& fit_;
  ElMode mode_;
  int n_ = 0;
  bool has_el_ = false;
  int n_eq_ = 0, n_ineq_ = 0;
  double s_char_ = 1.0;
  double lambda_scale_ = 1.0;
};

SolveResult finish_result(const PlanProblem& pp, const ProblemSpec& spec, const SegmentPlan& plan,
                          const BuildOutput& b, bool converged, int iterations) {
  SolveResult res;
  res.trajectory = pp.to_trajectory(b);
  res.report = energies(res.trajectory, spec.model, spec.p_slow);
  res.n_intervals = static_cast<int>(res.trajectory.size());
  res.converged = converged;
  res.objective_value =
      spec.objective == Objective::Recuperation ? res.report.e_rec : res.report.e_con;
  res.iterations = iterations;
  res.plan = plan;
  return res;
}

SolveResult dwell_only_result(const ProblemSpec& spec) {
  SolveResult res;
  res.trajectory = Trajectory::idle(spec.T);
  res.report = energies(res.trajectory, spec.model, spec.p_slow);
  res.n_intervals = static_cast<int>(res.trajectory.size());
  res.converged = true;
  res.objective_value =
      spec.objective == Objective::Recuperation ? res.report.e_rec : res.report.e_con;
  res.plan = SegmentPlan{{PlanItem{SegmentKind::CD_v, 0}}, "V0"};
  res.message = "zero-distance dwell";
  return res;
}

}  // namespace

SolveResult solve_fixed_plan(const SegmentPlan& plan, const ProblemSpec& spec, bool surrogate_only,
                             const std::optional<Eigen::VectorXd>& warm_start,
                             const SolverOptions& opts, const QuadraticSurrogate* surrogate) {
  spec.validate();
  if (plan.size() < 1) throw std::domain_error("empty segment plan");

  const bool pure_dwell =
      plan.size() == 1 && plan.items[0].kind == SegmentKind::CD_v && plan.items[0].sign == 0;
  if (spec.s0 < kIdleDistance) {
    if (pure_dwell) return dwell_only_result(spec);
    throw InfeasiblePlanError("moving plan for a zero-distance instance");
  }
  if (pure_dwell) throw InfeasiblePlanError("dwell-only plan cannot cover the distance");

  QuadraticSurrogate local_fit;
  if (surrogate == nullptr) {
    local_fit = fit_quadratic(spec.model, 0.0, spec.limits.v_max, -spec.limits.a_max,
                              spec.limits.a_max);
    surrogate = &local_fit;
  }

  const auto t_start = std::chrono::steady_clock::now();
  const ElMode solve_mode = surrogate_only ? ElMode::SurrogateClosed : ElMode::FullFixed;
  PlanProblem pp(plan, spec, opts, *surrogate, solve_mode);

  nlp::Options nopts;
  nopts.max_iterations = opts.max_iterations;
  nopts.kkt_tol = opts.kkt_tol;
  nopts.step_tol = opts.step_tol;
  nopts.fd_step = opts.fd_step;

  std::vector<Eigen::VectorXd> seeds;
  if (warm_start) {
    seeds.push_back(*warm_start);
  } else {
    for (int s = 0; s < std::max(1, opts.n_seeds); ++s) seeds.push_back(pp.seed(s));
  }

  bool any_feasible = false;
  bool best_converged = false;
  double best_phi = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;
  int iterations = 0;

  for (const Eigen::VectorXd& s : seeds) {
    nlp::Problem problem = pp.make_nlp(s);
    Eigen::VectorXd x = s;
    const double r0 = nlp::restore_feasibility(problem, x, 1e-10);
    if (!(r0 < 1e-4)) continue;
    problem.x0 = x;
    nlp::Result nres = nlp::solve(problem, nopts);
    iterations += nres.iterations;
    if (nres.c_max > 1e-5) continue;
    any_feasible = true;
    const bool better = (nres.converged && !best_converged) ||
                        ((nres.converged == best_converged) && nres.f < best_phi);
    if (better) {
      best_phi = nres.f;
      best_x = nres.x;
      best_converged = nres.converged;
    }
  }

  if (!any_feasible)
    throw InfeasiblePlanError("plan admits no feasible point: " + plan.label);

  if (surrogate_only) {
    std::lock_guard<std::mutex> lock(g_throughput_mutex);
    g_throughput.surrogate_solves += 1;
    g_throughput.surrogate_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  }

  // Re-project the equality set under the reporting-grade evaluator, then
  // rebuild the final trajectory with it.
  const ElMode final_mode = surrogate_only ? ElMode::SurrogateClosed : ElMode::FullAdaptive;
  PlanProblem pp_final(plan, spec, opts, *surrogate, final_mode);
  double polish_residual = 0.0;
  if (opts.polish) {
    nlp::Problem polish_problem = pp_final.make_nlp(best_x);
    polish_residual = nlp::restore_feasibility(polish_problem, best_x, 1e-11, 30);
  }

  BuildOutput b;
  if (!pp_final.build(best_x, b))
    throw InfeasiblePlanError("final rebuild failed for plan " + plan.label);

  SolveResult res = finish_result(pp_final, spec, plan, b, best_converged, iterations);
  res.converged = best_converged && polish_residual < 1e-6;

  // A segment collapsed onto the minimum-duration bound marks an
  // over-parameterized plan; retry without it and keep the better outcome.
  if (res.converged && plan.size() > 1) {
    bool collapsed = false;
    Items reduced;
    for (int i = 0; i < plan.size(); ++i) {
      if (best_x[i] <= opts.d_min + 1e-9) {
        collapsed = true;
        continue;
      }
      if (!reduced.empty() && reduced.back().kind == plan.items[i].kind &&
          reduced.back().sign == plan.items[i].sign && reduced.back().kind != SegmentKind::EL)
        continue;  // merged with predecessor
      reduced.push_back(plan.items[i]);
    }
    if (collapsed && !reduced.empty() && reduced.size() < plan.items.size()) {
      try {
        SegmentPlan rplan{reduced, plan_label(reduced)};
        SolveResult rres = solve_fixed_plan(rplan, spec, surrogate_only, std::nullopt, opts,
                                            surrogate);
        if (rres.converged && rres.objective_value <= res.objective_value) return rres;
      } catch (const InfeasiblePlanError&) {
      }
    }
  }
  return res;
}

SolveResult baseline(const ProblemSpec& spec, const SolverOptions& opts) {
  (void)opts;
  spec.validate();
  if (spec.s0 < kIdleDistance) return dwell_only_result(spec);

  Trajectory tm = time_minimal_profile(spec.s0, spec.limits);
  std::vector<Segment> segs(tm.segments().begin(), tm.segments().end());
  const double dwell = spec.T - tm.duration();
  if (dwell < -1e-9)
    throw InfeasiblePlanError("horizon shorter than the time-minimal duration");
  if (dwell > 1e-9) {
    Segment rest;
    rest.kind = SegmentKind::CD_v;
    rest.duration = dwell;
    rest.v0 = 0.0;
    segs.push_back(rest);
  }
  SolveResult res;
  res.trajectory = Trajectory::from_segments(std::move(segs), spec.direction_sign);
  res.report = energies(res.trajectory, spec.model, spec.p_slow);
  res.n_intervals = static_cast<int>(res.trajectory.size());
  res.converged = true;
  res.objective_value =
      spec.objective == Objective::Recuperation ? res.report.e_rec : res.report.e_con;
  res.plan.label = "baseline";
  res.message = "time-minimal movement plus dwell";
  return res;
}

SolveResult optimize(const ProblemSpec& spec, const SolverOptions& opts) {
  spec.validate();
  if (spec.s0 < kIdleDistance) return dwell_only_result(spec);

  const double t_tm = time_minimal_duration(spec.s0, spec.limits);
  if (t_tm > spec.T + 1e-9)
    throw InfeasiblePlanError("horizon shorter than the time-minimal duration");

  SolveResult best = baseline(spec, opts);
  if (std::abs(spec.T - t_tm) <= 1e-9 * std::max(1.0, spec.T)) {
    best.message = "degenerate horizon: the feasible set is the time-minimal profile";
    return best;
  }

  const QuadraticSurrogate fit =
      fit_quadratic(spec.model, 0.0, spec.limits.v_max, -spec.limits.a_max, spec.limits.a_max);

  struct Candidate {
    double objective;
    SegmentPlan plan;
    Eigen::VectorXd x;
    SolveResult result;
  };

  int iterations = 0;
  double prev_best = best.objective_value;
  int stalled = 0;
  bool any_n_productive = false;
  constexpr int kMinExplored = 8;  // always look at the small grids

  for (int n = 1; n <= opts.n_max; ++n) {
    const std::vector<SegmentPlan> plans = enumerate_plans(n, spec);
    if (plans.empty()) continue;

    std::vector<Candidate> candidates;
    for (const SegmentPlan& plan : plans) {
      try {
        SolveResult sres = solve_fixed_plan(plan, spec, /*surrogate_only=*/true, std::nullopt,
                                            opts, &fit);
        iterations += sres.iterations;
        if (!sres.converged) continue;
        Candidate cand;
        cand.objective = sres.objective_value;
        cand.plan = plan;
        cand.result = std::move(sres);
        candidates.push_back(std::move(cand));
      } catch (const InfeasiblePlanError&) {
      }
    }
    if (candidates.empty()) continue;
    any_n_productive = true;

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       if (a.objective != b.objective) return a.objective < b.objective;
                       return a.plan.label < b.plan.label;
                     });

    const int k_refine = std::min<int>(opts.refine_top_k, candidates.size());
    for (int k = 0; k < k_refine; ++k) {
      const Candidate& cand = candidates[k];
      SolveResult refined;
      try {
        // Warm-start the full model from the surrogate solution.
        Eigen::VectorXd warm(cand.plan.dim());
        const auto& segs = cand.result.trajectory.segments();
        for (int i = 0; i < cand.plan.size() && i < static_cast<int>(segs.size()); ++i)
          warm[i] = segs[i].duration;
        if (cand.plan.has_el()) {
          warm[cand.plan.size()] = 0.0;
          for (const Segment& s : segs)
            if (s.kind == SegmentKind::EL) warm[cand.plan.size()] = s.lambda;
        }
        if (static_cast<int>(segs.size()) != cand.plan.size()) {
          // The surrogate stage collapsed segments; reseed instead.
          refined = solve_fixed_plan(cand.plan, spec, false, std::nullopt, opts, &fit);
        } else {
          refined = solve_fixed_plan(cand.plan, spec, false, warm, opts, &fit);
        }
      } catch (const InfeasiblePlanError&) {
        continue;
      }
      iterations += refined.iterations;
      if (!refined.converged) continue;
      if (refined.objective_value < best.objective_value) {
        best = refined;
      }
    }

    const double improvement =
        (prev_best - best.objective_value) / std::max(std::abs(best.objective_value), 1.0);
    prev_best = best.objective_value;
    if (any_n_productive && n >= kMinExplored) {
      if (improvement < opts.improve_tol) {
        if (++stalled >= 2) break;
      } else {
        stalled = 0;
      }
    }
  }
  best.iterations = iterations;
  return best;
}

double profile_surrogate_throughput(const ProblemSpec& spec, const SolverOptions& opts,
                                    int workers, double min_seconds) {
  spec.validate();
  const QuadraticSurrogate fit =
      fit_quadratic(spec.model, 0.0, spec.limits.v_max, -spec.limits.a_max, spec.limits.a_max);

  std::vector<SegmentPlan> good;
  for (int n : {4, 5, 7}) {
    for (const SegmentPlan& plan : enumerate_plans(n, spec)) {
      try {
        SolveResult r = solve_fixed_plan(plan, spec, true, std::nullopt, opts, &fit);
        if (r.converged) good.push_back(plan);
      } catch (const InfeasiblePlanError&) {
      }
      if (good.size() >= 6) break;
    }
    if (good.size() >= 6) break;
  }
  if (good.empty()) return 0.0;

  const unsigned n_workers = workers > 0 ? static_cast<unsigned>(workers)
                                         : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<long> solves{0};
  std::atomic<bool> stop{false};
  const auto t0 = std::chrono::steady_clock::now();
  const auto worker = [&]() {
    std::size_t i = 0;
    while (!stop.load(std::memory_order_relaxed)) {
      try {
        solve_fixed_plan(good[i % good.size()], spec, true, std::nullopt, opts, &fit);
        solves.fetch_add(1, std::memory_order_relaxed);
      } catch (const InfeasiblePlanError&) {
      }
      ++i;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (;;) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (elapsed >= min_seconds) break;
  }
  stop.store(true);
  for (std::thread& th : pool) th.join();
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return solves.load() / std::max(elapsed, 1e-9);
}

}  // namespace crane
