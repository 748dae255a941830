#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cdf.hpp"
#include "errors.hpp"
#include "rational.hpp"
#include "smp.hpp"

namespace stochpre {

inline bool deterministic_kernel(const Smp& m) {
  for (int s = 0; s < m.size(); ++s)
    for (std::size_t a = 0; a < m.inputs().size(); ++a) {
      std::set<int> dst;
      for (const auto& t : m.trans(s, static_cast<int>(a)))
        if (t.p > Rational(0)) dst.insert(t.dst);
      if (dst.size() > 1) return false;
    }
  return true;
}

inline int path_bound_m(int su, int sv, int sw, int sw2) {
  return std::max(su * sw, sv * sw2) + std::max({su, sv, sw, sw2}) + 1;
}

inline int path_bound_m(const Smp& u, const Smp& v, const Smp& w, const Smp& w2) {
  return path_bound_m(u.size(), v.size(), w.size(), w2.size());
}

enum class MonotonicityCondition { ResidenceU, ResidenceV, SchedulerU, SchedulerV, DeterministicKernel };

inline std::string to_string(MonotonicityCondition c) {
  switch (c) {
    case MonotonicityCondition::ResidenceU: return "ResidenceU";
    case MonotonicityCondition::ResidenceV: return "ResidenceV";
    case MonotonicityCondition::SchedulerU: return "SchedulerU";
    case MonotonicityCondition::SchedulerV: return "SchedulerV";
    case MonotonicityCondition::DeterministicKernel: return "DeterministicKernel";
  }
  return "?";
}

// Paths are state names: the process path first, then the context path.
// `index` is 1-based; `t` is set for residence violations, `input` for
// scheduler ones.
struct MonotonicityWitness {
  std::vector<std::string> path;
  std::vector<std::string> context_path;
  int index = 0;
  std::optional<double> t;
  std::string input;
  std::string detail;
};

struct MonotonicityVerdict {
  bool holds = true;
  std::optional<MonotonicityCondition> violated;
  std::optional<MonotonicityWitness> witness;
  bool numeric = false;   // a grid comparison decided some domination
  bool complete = true;   // false for the bounded scheduler search
  int bound = 0;
};

namespace detail {

// Positions reachable along state paths; parent[i][s] is a predecessor at
// position i - 1 (positions are 0-based here).
struct PathLayers {
  std::vector<std::map<int, int>> parent;

  std::vector<int> path_to(int i, int s) const {
    std::vector<int> p{s};
    for (int k = i; k > 0; --k) p.push_back(s = parent[k].at(s));
    std::reverse(p.begin(), p.end());
    return p;
  }
};

inline PathLayers path_layers(const Smp& m, int start, int len) {
  PathLayers pl;
  pl.parent.push_back({{start, -1}});
  for (int i = 1; i < len; ++i) {
    std::map<int, int> next;
    for (auto [s, _] : pl.parent.back())
      for (std::size_t a = 0; a < m.inputs().size(); ++a)
        for (const auto& t : m.trans(s, static_cast<int>(a)))
          if (t.p > Rational(0)) next.emplace(t.dst, s);
    if (next.empty()) break;
    pl.parent.push_back(std::move(next));
  }
  return pl;
}

inline std::vector<std::string> names(const Smp& m, const std::vector<int>& p) {
  std::vector<std::string> out;
  for (int s : p) out.push_back(m.name(s));
  return out;
}

// F >= G pointwise; sets `numeric` when the closed form does not apply.
inline bool dominates(const Cdf& f, const Cdf& g, bool& numeric,
                      const GridSpec& grid = GridSpec::from_env()) {
  try {
    return least_acceleration(f, g) <= 1 + 1e-12;
  } catch (const UnsupportedShape&) {
    numeric = true;
    return dominates_scaled(1, f, 1, g, grid);
  }
}

// A time where G - F is largest, for witnesses.
inline double worst_time(const Cdf& f, const Cdf& g) {
  double hi = std::max(support_hi(f), support_hi(g));
  if (!std::isfinite(hi)) hi = std::max(quantile(f, 0.999), quantile(g, 0.999));
  if (!(hi > 0)) hi = 1;
  double best_t = hi, best = -kInf;
  for (double t : log_grid(hi, 256)) {
    double d = eval(g, t) - eval(f, t);
    if (d > best) best = d, best_t = t;
  }
  return best_t;
}

inline Rational prob(const Smp& m, int s, int a, int d) {
  Rational p(0);
  for (const auto& t : m.trans(s, a))
    if (t.dst == d) p += t.p;
  return p;
}

inline std::set<int> successors(const Smp& m, int s) {
  std::set<int> out;
  for (std::size_t a = 0; a < m.inputs().size(); ++a)
    for (const auto& t : m.trans(s, static_cast<int>(a)))
      if (t.p > Rational(0)) out.insert(t.dst);
  return out;
}

inline void require_same_inputs(const Smp& x, const Smp& y) {
  if (x.kind() != SmpKind::Reactive || y.kind() != SmpKind::Reactive)
    throw KindMismatch("monotonicity needs reactive processes");
  if (std::set<std::string>(x.inputs().begin(), x.inputs().end()) !=
      std::set<std::string>(y.inputs().begin(), y.inputs().end()))
    throw KindMismatch("monotonicity needs identical input sets");
}

inline MonotonicityVerdict fail(MonotonicityVerdict v, MonotonicityCondition c,
                                MonotonicityWitness w) {
  v.holds = false;
  v.violated = c;
  v.witness = std::move(w);
  return v;
}

// Condition 1 at one position for one side: composite >= process on the U
// side, process >= composite on the V side.
inline std::optional<MonotonicityWitness> residence_check(
    const Smp& x, const PathLayers& px, const Smp& y, const PathLayers& py, int i,
    CompositionKind star, bool composite_dominates, bool& numeric,
    std::map<std::pair<int, int>, bool>& cache) {
  if (i >= static_cast<int>(px.parent.size()) || i >= static_cast<int>(py.parent.size()))
    return std::nullopt;
  for (auto [s, _] : px.parent[i])
    for (auto [c, __] : py.parent[i]) {
      auto key = std::make_pair(s, c);
      auto it = cache.find(key);
      Cdf fc = compose_cdf(star, x.residence(s), y.residence(c));
      const Cdf& fs = x.residence(s);
      if (it == cache.end())
        it = cache.emplace(key, composite_dominates ? dominates(fc, fs, numeric)
                                                    : dominates(fs, fc, numeric))
                 .first;
      if (it->second) continue;
      MonotonicityWitness w;
      w.path = names(x, px.path_to(i, s));
      w.context_path = names(y, py.path_to(i, c));
      w.index = i + 1;
      w.t = composite_dominates ? worst_time(fc, fs) : worst_time(fs, fc);
      w.detail = (composite_dominates ? "F(" + x.name(s) + "*" + y.name(c) + ") < F(" +
                                            x.name(s) + ")"
                                      : "F(" + x.name(s) + ") < F(" + x.name(s) + "*" +
                                            y.name(c) + ")");
      return w;
    }
  return std::nullopt;
}

// Universal scheduler conditions between positions i and i + 1. The least
// value a scheduler can give an input is 0 unless it is the only one.
inline std::optional<MonotonicityWitness> scheduler_check(
    const Smp& x, const PathLayers& px, const Smp& y, const PathLayers& py, int i,
    bool u_side) {
  if (i + 1 >= static_cast<int>(px.parent.size()) ||
      i + 1 >= static_cast<int>(py.parent.size()))
    return std::nullopt;
  const bool single = x.inputs().size() == 1;
  for (auto [s, _] : px.parent[i])
    for (int s2 : successors(x, s)) {
      if (!px.parent[i + 1].count(s2)) continue;
      for (auto [c, __] : py.parent[i])
        for (int c2 : successors(y, c)) {
          if (!py.parent[i + 1].count(c2)) continue;
          for (std::size_t a = 0; a < x.inputs().size(); ++a) {
            int ay = y.input_index(x.inputs()[a]);
            Rational tx = prob(x, s, static_cast<int>(a), s2);
            Rational ty = prob(y, c, ay, c2);
            Rational lhs, rhs;
            if (u_side) {
              lhs = single ? tx * ty : Rational(0);
              rhs = tx;
            } else {
              lhs = single ? tx : Rational(0);
              rhs = tx * ty;
            }
            if (lhs >= rhs) continue;
            MonotonicityWitness w;
            auto p = px.path_to(i, s);
            p.push_back(s2);
            auto q = py.path_to(i, c);
            q.push_back(c2);
            w.path = names(x, p);
            w.context_path = names(y, q);
            w.index = i + 1;
            w.input = x.inputs()[a];
            w.detail = "composite step " + to_string(u_side ? lhs : rhs) + " vs " +
                       to_string(u_side ? rhs : lhs);
            return w;
          }
        }
    }
  return std::nullopt;
}

}  // namespace detail

// Strong monotonicity of `star` in (U,W) against (V,W'), checked on state
// paths up to path_bound_m.
inline MonotonicityVerdict strong_monotonic(const Smp& u, int u0, const Smp& v, int v0,
                                            const Smp& w, int w0, const Smp& w2, int w20,
                                            CompositionKind star) {
  detail::require_same_inputs(u, w);
  detail::require_same_inputs(v, w2);
  MonotonicityVerdict out;
  out.bound = path_bound_m(u, v, w, w2);
  if (!deterministic_kernel(w2)) {
    MonotonicityWitness wit;
    for (int s = 0; s < w2.size() && wit.path.empty(); ++s)
      for (std::size_t a = 0; a < w2.inputs().size() && wit.path.empty(); ++a) {
        std::set<int> dst;
        for (const auto& t : w2.trans(s, static_cast<int>(a))) dst.insert(t.dst);
        if (dst.size() > 1) {
          wit.path = {w2.name(s)};
          wit.input = w2.inputs()[a];
        }
      }
    wit.detail = "context has a probabilistic branch";
    return detail::fail(out, MonotonicityCondition::DeterministicKernel, wit);
  }
  const int m = out.bound;
  auto pu = detail::path_layers(u, u0, m), pv = detail::path_layers(v, v0, m);
  auto pw = detail::path_layers(w, w0, m), pw2 = detail::path_layers(w2, w20, m);
  std::map<std::pair<int, int>, bool> cache_u, cache_v;
  for (int i = 0; i < m; ++i) {
    if (auto wit = detail::residence_check(u, pu, w, pw, i, star, true, out.numeric, cache_u))
      return detail::fail(out, MonotonicityCondition::ResidenceU, *wit);
    if (auto wit = detail::residence_check(v, pv, w2, pw2, i, star, false, out.numeric, cache_v))
      return detail::fail(out, MonotonicityCondition::ResidenceV, *wit);
    if (i + 1 >= m) break;
    if (auto wit = detail::scheduler_check(u, pu, w, pw, i, true))
      return detail::fail(out, MonotonicityCondition::SchedulerU, *wit);
    if (auto wit = detail::scheduler_check(v, pv, w2, pw2, i, false))
      return detail::fail(out, MonotonicityCondition::SchedulerV, *wit);
  }
  return out;
}

inline MonotonicityVerdict strong_monotonic(const Smp& u, const Smp& v, const Smp& w,
                                            const Smp& w2, CompositionKind star) {
  return strong_monotonic(u, 0, v, 0, w, 0, w2, 0, star);
}

namespace detail {

// All state-path pairs of length n (as 0-based positions) for x and y.
inline void path_pairs(const Smp& x, int x0, const Smp& y, int y0, int n,
                       const std::function<void(const std::vector<int>&,
                                                const std::vector<int>&)>& fn) {
  std::vector<std::vector<int>> xs{{x0}}, ys{{y0}};
  for (int k = 1; k < n; ++k) {
    std::vector<std::vector<int>> nx, ny;
    for (const auto& p : xs)
      for (int s : successors(x, p.back())) {
        nx.push_back(p);
        nx.back().push_back(s);
      }
    for (const auto& p : ys)
      for (int s : successors(y, p.back())) {
        ny.push_back(p);
        ny.back().push_back(s);
      }
    xs = std::move(nx);
    ys = std::move(ny);
  }
  for (const auto& p : xs)
    for (const auto& q : ys) fn(p, q);
}

inline double sched_weight(const Scheduler& s, const std::vector<int>& hist, int a) {
  try {
    return s.at(hist).at(a);
  } catch (const HorizonTooShort&) {
    return 0;
  }
}

// U side: every scheduler of x is matched by one of the composite. V side:
// every composite scheduler is matched by one of x.
inline std::optional<MonotonicityWitness> bounded_scheduler_condition(
    const Smp& x, int x0, const Smp& y, int y0, int n, bool u_side, double limit) {
  Smp c = compose(x, y, CompositionKind::MaxCdf);
  const int c0 = compose_index(x, y, x0, y0);
  auto xs = all_schedulers(x, n - 1, limit, x0);
  auto cs = all_schedulers(c, n - 1, limit, c0);
  const auto& forall = u_side ? xs : cs;
  const auto& exists = u_side ? cs : xs;
  auto ok = [&](const Scheduler& sx, const Scheduler& sc,
                MonotonicityWitness* wit) {
    bool good = true;
    path_pairs(x, x0, y, y0, n, [&](const std::vector<int>& p, const std::vector<int>& q) {
      if (!good) return;
      std::vector<int> hx, hc;
      for (std::size_t i = 0; i + 1 < p.size() && good; ++i) {
        hx.push_back(p[i]);
        hc.push_back(compose_index(x, y, p[i], q[i]));
        for (std::size_t a = 0; a < x.inputs().size(); ++a) {
          int ay = y.input_index(x.inputs()[a]);
          double tx = to_double(prob(x, p[i], static_cast<int>(a), p[i + 1]));
          double ty = to_double(prob(y, q[i], ay, q[i + 1]));
          double px = sched_weight(sx, hx, static_cast<int>(a)) * tx;
          double pc = sched_weight(sc, hc, static_cast<int>(a)) * tx * ty;
          bool fine = u_side ? pc >= px - 1e-12 : px >= pc - 1e-12;
          if (!fine) {
            good = false;
            if (wit) {
              wit->path = names(x, std::vector<int>(p.begin(), p.begin() + i + 2));
              wit->context_path = names(y, std::vector<int>(q.begin(), q.begin() + i + 2));
              wit->index = static_cast<int>(i) + 1;
              wit->input = x.inputs()[a];
            }
            break;
          }
        }
      }
    });
    return good;
  };
  for (const auto& sa : forall) {
    bool found = false;
    for (const auto& sb : exists)
      if (u_side ? ok(sa, sb, nullptr) : ok(sb, sa, nullptr)) {
        found = true;
        break;
      }
    if (!found) {
      MonotonicityWitness wit;
      if (!exists.empty()) u_side ? ok(sa, exists.front(), &wit) : ok(exists.front(), sa, &wit);
      wit.detail = "no matching scheduler";
      return wit;
    }
  }
  return std::nullopt;
}

}  // namespace detail

// The existential (weaker) conditions up to path length n, by enumerating
// deterministic schedulers. Incomplete: a failure may be an artefact of the
// enumeration.
inline MonotonicityVerdict monotonic_bounded(const Smp& u, int u0, const Smp& v, int v0,
                                             const Smp& w, int w0, const Smp& w2, int w20,
                                             CompositionKind star, int n,
                                             double limit = kSchedulerLimit) {
  detail::require_same_inputs(u, w);
  detail::require_same_inputs(v, w2);
  MonotonicityVerdict out;
  out.complete = false;
  out.bound = n;
  if (!deterministic_kernel(w2))
    return detail::fail(out, MonotonicityCondition::DeterministicKernel, {});
  auto pu = detail::path_layers(u, u0, n), pv = detail::path_layers(v, v0, n);
  auto pw = detail::path_layers(w, w0, n), pw2 = detail::path_layers(w2, w20, n);
  std::map<std::pair<int, int>, bool> cache_u, cache_v;
  for (int i = 0; i < n; ++i) {
    if (auto wit = detail::residence_check(u, pu, w, pw, i, star, true, out.numeric, cache_u))
      return detail::fail(out, MonotonicityCondition::ResidenceU, *wit);
    if (auto wit = detail::residence_check(v, pv, w2, pw2, i, star, false, out.numeric, cache_v))
      return detail::fail(out, MonotonicityCondition::ResidenceV, *wit);
  }
  if (auto wit = detail::bounded_scheduler_condition(u, u0, w, w0, n, true, limit))
    return detail::fail(out, MonotonicityCondition::SchedulerU, *wit);
  if (auto wit = detail::bounded_scheduler_condition(v, v0, w2, w20, n, false, limit))
    return detail::fail(out, MonotonicityCondition::SchedulerV, *wit);
  return out;
}

struct AnomalyReport {
  double p_uw = 0, p_vw = 0, p_u = 0, p_v = 0;
  bool anomaly = false;
};

// Cylinder probabilities of U, V and their compositions with W. Processes with
// several inputs are resolved by the uniform memoryless scheduler.
inline AnomalyReport detect_anomaly(const Smp& u, int u0, const Smp& v, int v0, const Smp& w,
                                    int w0, CompositionKind star,
                                    const std::vector<std::string>& word, double t) {
  auto prob_of = [&](const Smp& m, int s) {
    std::vector<int> idx;
    for (const auto& a : word) idx.push_back(m.output_index(a));
    return cylinder_prob(m, Scheduler::uniform(m), s, idx, t);
  };
  Smp uw = compose(u, w, star), vw = compose(v, w, star);
  AnomalyReport r;
  r.p_u = prob_of(u, u0);
  r.p_v = prob_of(v, v0);
  r.p_uw = prob_of(uw, compose_index(u, w, u0, w0));
  r.p_vw = prob_of(vw, compose_index(v, w, v0, w0));
  r.anomaly = r.p_uw < r.p_vw;
  return r;
}

inline AnomalyReport detect_anomaly(const Smp& u, const Smp& v, const Smp& w,
                                    CompositionKind star, const std::vector<std::string>& word,
                                    double t) {
  return detect_anomaly(u, 0, v, 0, w, 0, star, word, t);
}

}  // namespace stochpre
