#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "cdf.hpp"
#include "errors.hpp"
#include "lexer.hpp"
#include "rational.hpp"
#include "smp.hpp"

namespace stochpre {

// ---------------------------------------------------------------------------
// Unambiguous generative processes

inline void require_generative(const Smp& m) {
  if (!is_generative(m)) throw KindMismatch("expected a generative (one-input) process");
}

inline bool is_unambiguous(const Smp& m) {
  require_generative(m);
  for (int s = 0; s < m.size(); ++s) {
    std::map<int, int> succ;
    for (const auto& t : m.trans(s, 0))
      if (!succ.emplace(t.out, t.dst).second && succ[t.out] != t.dst) return false;
  }
  return true;
}

struct FasterWitness {
  std::vector<int> word;   // output indices
  double t = 0;
  double p_fast = 0;       // probability on the side claimed faster
  double p_slow = 0;
  std::string scheduler;   // adversary, when one was involved
  std::string note;        // e.g. "loop (p1,p2)"
};

struct FasterVerdict {
  bool holds = true;
  std::string method;
  bool exact = true;  // false for bounded scheduler searches
  std::optional<FasterWitness> witness;
  std::size_t checks = 0;
};

namespace detail {

// Unique successor (and its probability) on output o, or -1.
inline std::pair<int, Rational> unamb_step(const Smp& m, int s, int o) {
  if (s < 0) return {-1, 0};
  for (const auto& t : m.trans(s, 0))
    if (t.out == o) return {t.dst, t.p};
  return {-1, 0};
}

// a * conv(path) as the cylinder CDF of an unambiguous path, given as the
// number of visits per state.
inline Cdf path_cdf(const Smp& m, const std::vector<int>& counts, double w) {
  std::vector<Cdf> rs;
  for (std::size_t x = 0; x < counts.size(); ++x)
    for (int k = 0; k < counts[x]; ++k) rs.push_back(m.residence(static_cast<int>(x)));
  return Cdf::mixture({w}, {convolve_all(rs)});
}

// Pointwise order between single residences, exact where the closed form
// applies; unknown pairs count as unordered.
class ResidenceOrder {
 public:
  ResidenceOrder(const Smp& u, const Smp& v) : u_(u), v_(v) {}
  bool ge(int x, int y) {
    auto [it, fresh] = memo_.try_emplace({x, y}, false);
    if (fresh) {
      try {
        it->second = least_acceleration(u_.residence(x), v_.residence(y)) <= 1 + 1e-12;
      } catch (const UnsupportedShape&) {
      }
    }
    return it->second;
  }

 private:
  const Smp& u_;
  const Smp& v_;
  std::map<std::pair<int, int>, bool> memo_;
};

// Sufficient condition for conv(su) >= conv(sv): a perfect matching of
// pointwise-ordered residences (the usual stochastic order is closed under
// convolution). Solved as a flow between state counts.
inline bool matched_domination(const std::vector<int>& cu, const std::vector<int>& cv,
                               ResidenceOrder& ord) {
  int total = 0;
  for (int c : cu) total += c;
  for (int c : cv) total -= c;
  if (total != 0) return false;
  std::vector<int> xs, ys, left, right;
  for (std::size_t x = 0; x < cu.size(); ++x)
    if (cu[x] > 0) xs.push_back(static_cast<int>(x)), left.push_back(cu[x]);
  for (std::size_t y = 0; y < cv.size(); ++y)
    if (cv[y] > 0) ys.push_back(static_cast<int>(y)), right.push_back(cv[y]);
  const std::size_t nx = xs.size(), ny = ys.size();
  std::vector<std::vector<bool>> edge(nx, std::vector<bool>(ny));
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) edge[i][j] = ord.ge(xs[i], ys[j]);
  std::vector<std::vector<int>> flow(nx, std::vector<int>(ny, 0));
  // augmenting paths: source -> x -> y (-> back to some x' along used flow) -> sink
  auto augment = [&]() -> int {
    std::vector<int> from_x(nx, -2), from_y(ny, -1);
    std::vector<std::size_t> queue;
    for (std::size_t i = 0; i < nx; ++i)
      if (left[i] > 0) from_x[i] = -1, queue.push_back(i);
    for (std::size_t q = 0; q < queue.size(); ++q) {
      std::size_t i = queue[q];
      for (std::size_t j = 0; j < ny; ++j) {
        if (!edge[i][j] || from_y[j] >= 0) continue;
        from_y[j] = static_cast<int>(i);
        if (right[j] > 0) {
          // bottleneck along the path, then push it
          int amount = right[j];
          for (std::size_t y = j;;) {
            std::size_t x = static_cast<std::size_t>(from_y[y]);
            if (from_x[x] == -1) {
              amount = std::min(amount, left[x]);
              break;
            }
            y = static_cast<std::size_t>(from_x[x]);
            amount = std::min(amount, flow[x][y]);
          }
          right[j] -= amount;
          for (std::size_t y = j;;) {
            std::size_t x = static_cast<std::size_t>(from_y[y]);
            flow[x][y] += amount;
            if (from_x[x] == -1) {
              left[x] -= amount;
              return amount;
            }
            y = static_cast<std::size_t>(from_x[x]);
            flow[x][y] -= amount;
          }
        }
        for (std::size_t k = 0; k < nx; ++k)
          if (flow[k][j] > 0 && from_x[k] == -2) {
            from_x[k] = static_cast<int>(j);
            queue.push_back(k);
          }
      }
    }
    return 0;
  };
  int units = 0;
  for (int c : cu) units += c;
  while (units > 0) {
    int pushed = augment();
    if (pushed == 0) return false;
    units -= pushed;
  }
  return true;
}

// First word (relative to p1, p2) along which P(p1)(C(w,t)) < P(p2)(C(w,t))
// for some t; explores words of length 1..max_len following p2's transitions.
// With `loops_only` the comparison is made only when the pair returns to
// (p1, p2).
inline std::optional<FasterWitness> unamb_search(const Smp& U, int p1, const Smp& V, int p2,
                                                 int max_len, bool loops_only,
                                                 const GridSpec& grid, std::size_t& checks) {
  const int outs = static_cast<int>(V.outputs().size());
  // scaling both weights by the same factor changes no comparison, here or
  // further down, so only their ratio is keyed
  using Key = std::tuple<int, int, std::vector<int>, std::vector<int>, Rational>;
  std::set<Key> seen;
  std::set<std::tuple<std::vector<int>, std::vector<int>, Rational>> compared;
  std::vector<int> word, cu(U.size(), 0), cv(V.size(), 0);
  ++cu[p1];
  ++cv[p2];
  std::optional<FasterWitness> found;
  ResidenceOrder ord(U, V);
  // r: weight of U's path over V's; wv: V's path weight
  std::function<void(int, int, const Rational&, double)> go =
      [&](int x, int y, const Rational& r, double wv) {
        if (found || static_cast<int>(word.size()) == max_len) return;
        for (int o = 0; o < outs && !found; ++o) {
          auto [y2, qv] = unamb_step(V, y, o);
          if (y2 < 0) continue;
          int uo = -1;
          for (std::size_t i = 0; i < U.outputs().size(); ++i)
            if (U.outputs()[i] == V.outputs()[o]) uo = static_cast<int>(i);
          auto [x2, qu] = uo < 0 ? std::pair<int, Rational>{-1, 0} : unamb_step(U, x, uo);
          Rational ratio = x2 < 0 ? Rational(0) : r * qu / qv;
          double nv = wv * to_double(qv);
          word.push_back(o);
          bool check = !loops_only || (x2 == p1 && y2 == p2);
          if (check && compared.emplace(cu, cv, ratio).second) {
            ++checks;
            bool exact_ok = x2 >= 0 && ratio >= 1 && matched_domination(cu, cv, ord);
            std::optional<Cdf> fu, fv;
            if (!exact_ok) {
              fv = path_cdf(V, cv, nv);
              fu = ratio == 0 ? Cdf::mixture({0.0}, {Cdf::dirac(0)})
                              : path_cdf(U, cu, to_double(ratio) * nv);
            }
            if (!exact_ok && !dominates_scaled(1, *fu, 1, *fv, grid)) {
              FasterWitness w;
              w.word = word;
              // locate a violating time for the report
              double T = std::max(1e-9, quantile(*fv, limit(*fv) * 0.5));
              double best = kInf;
              for (int k = -40; k <= 40; ++k) {
                double t = T * std::pow(1.25, k);
                double m = eval(*fu, t) - eval(*fv, t);
                if (m < best) {
                  best = m;
                  w.t = t;
                }
              }
              w.p_fast = eval(*fu, w.t);
              w.p_slow = eval(*fv, w.t);
              found = w;
            }
          }
          Key k{x2, y2, cu, cv, ratio};
          if (!found && seen.insert(k).second) {
            if (x2 >= 0) ++cu[x2];
            ++cv[y2];
            go(x2, y2, ratio, nv);
            if (x2 >= 0) --cu[x2];
            --cv[y2];
          }
          word.pop_back();
        }
      };
  go(p1, p2, 1, 1.0);
  return found;
}

}  // namespace detail

// Triples (p1, p2, v) reachable by a common word of length <= max_len with v
// looping both states back; represented here by the reachable pairs, the
// loops themselves are enumerated during the check.
inline std::set<std::pair<int, int>> reachable_pairs(const Smp& U, int u0, const Smp& V, int v0,
                                                     int max_len) {
  std::set<std::pair<int, int>> seen{{u0, v0}};
  std::vector<std::pair<int, int>> frontier{{u0, v0}};
  for (int k = 0; k < max_len && !frontier.empty(); ++k) {
    std::vector<std::pair<int, int>> next;
    for (auto [x, y] : frontier)
      for (std::size_t o = 0; o < V.outputs().size(); ++o) {
        auto [y2, qv] = detail::unamb_step(V, y, static_cast<int>(o));
        int uo = -1;
        for (std::size_t i = 0; i < U.outputs().size(); ++i)
          if (U.outputs()[i] == V.outputs()[o]) uo = static_cast<int>(i);
        auto [x2, qu] = detail::unamb_step(U, x, uo);
        if (x2 < 0 || y2 < 0) continue;
        if (seen.insert({x2, y2}).second) next.push_back({x2, y2});
      }
    frontier = std::move(next);
  }
  return seen;
}

// Decides u0 faster-than v0 for unambiguous generative processes: cylinder
// domination for every word of length <= |S|^2 and for every loop word of
// every reachable state pair. CDF domination is exact at 0 and at infinity
// and grid-checked in between.
inline FasterVerdict faster_than_unambiguous(const Smp& U, int u0, const Smp& V, int v0,
                                             const GridSpec& grid = GridSpec::from_env()) {
  if (!is_unambiguous(U) || !is_unambiguous(V))
    throw NotUnambiguous("both processes must be unambiguous");
  FasterVerdict v;
  v.method = "unambiguous";
  const int n = U.size() + V.size();
  const int N = n * n;
  if (auto w = detail::unamb_search(U, u0, V, v0, N, false, grid, v.checks)) {
    v.holds = false;
    v.witness = w;
    return v;
  }
  for (auto [p1, p2] : reachable_pairs(U, u0, V, v0, N)) {
    if (auto w = detail::unamb_search(U, p1, V, p2, N, true, grid, v.checks)) {
      v.holds = false;
      w->note = "loop at (" + U.name(p1) + "," + V.name(p2) + ")";
      v.witness = w;
      return v;
    }
  }
  return v;
}

inline bool equally_fast(const Smp& U, int u0, const Smp& V, int v0,
                         const GridSpec& grid = GridSpec::from_env()) {
  return faster_than_unambiguous(U, u0, V, v0, grid).holds &&
         faster_than_unambiguous(V, v0, U, u0, grid).holds;
}

// ---------------------------------------------------------------------------
// Slow residence classes

// Smallest N with P(Poisson(theta_max b) >= N) <= eps; an n-fold convolution
// of exponentials with rates <= theta_max puts at most that mass on [0, b].
inline int slow_bound_N(const std::vector<double>& rates, double eps, double b) {
  if (eps >= 1) return 0;
  if (rates.empty()) throw UnsupportedClass("no residence rates given");
  double theta = 0;
  for (double r : rates) {
    if (!(r > 0) || !std::isfinite(r)) throw UnsupportedClass("rate must be positive and finite");
    theta = std::max(theta, r);
  }
  double x = theta * b;
  if (x == 0) return 1;
  for (int N = 1; N < 1000000; ++N)
    if (boost::math::gamma_p(static_cast<double>(N), x) <= eps) return N;
  throw UnsupportedClass("tail bound does not fall below eps");
}

inline std::vector<double> exponential_rates(const Smp& m) {
  std::vector<double> rs;
  for (int s = 0; s < m.size(); ++s) {
    const Cdf& f = m.residence(s);
    if (f.kind() != CdfKind::Exponential)
      throw UnsupportedClass("state '" + m.name(s) + "' has no exponential tail bound");
    rs.push_back(f.rate());
  }
  return rs;
}

// ---------------------------------------------------------------------------
// Bounded checks with schedulers

// word -> cylinder CDF under sigma, for every word of length 1..max_len with
// positive probability.
inline std::map<std::vector<int>, Cdf> cylinder_cdfs(const Smp& m, const Scheduler& sigma, int s,
                                                     int max_len) {
  std::map<std::vector<int>, std::map<std::vector<int>, double>> acc;
  std::vector<int> hist{s}, word;
  std::function<void(double)> go = [&](double w) {
    if (!word.empty()) {
      std::vector<int> key(hist.begin(), hist.end() - 1);
      std::sort(key.begin(), key.end());
      acc[word][key] += w;
    }
    if (static_cast<int>(word.size()) == max_len) return;
    const auto& d = sigma.at(hist);
    for (std::size_t a = 0; a < d.size(); ++a) {
      if (d[a] == 0) continue;
      for (const auto& t : m.trans(hist.back(), static_cast<int>(a))) {
        hist.push_back(t.dst);
        word.push_back(t.out);
        go(w * d[a] * to_double(t.p));
        word.pop_back();
        hist.pop_back();
      }
    }
  };
  go(1.0);
  std::map<std::vector<int>, Cdf> out;
  for (const auto& [w, parts] : acc) {
    std::vector<double> ws;
    std::vector<Cdf> cs;
    for (const auto& [key, p] : parts) {
      std::vector<Cdf> rs;
      for (int x : key) rs.push_back(m.residence(x));
      cs.push_back(convolve_all(rs));
      ws.push_back(p);
    }
    out.emplace(w, Cdf::mixture(ws, cs));
  }
  return out;
}

// Randomized schedulers whose choice distributions have all weights in
// {0, 1/k, ..., 1}, over the histories reachable from `start`.
inline std::vector<Scheduler> grid_schedulers(const Smp& m, int horizon, int start, int k,
                                              double limit = kSchedulerLimit) {
  const int n_in = static_cast<int>(m.inputs().size());
  std::vector<std::vector<double>> dists;
  std::vector<int> parts(n_in, 0);
  std::function<void(int, int)> split = [&](int i, int left) {
    if (i == n_in - 1) {
      parts[i] = left;
      std::vector<double> d;
      for (int p : parts) d.push_back(static_cast<double>(p) / k);
      dists.push_back(d);
      return;
    }
    for (int p = 0; p <= left; ++p) {
      parts[i] = p;
      split(i + 1, left - p);
    }
  };
  split(0, k);
  auto hs = scheduler_histories(m, horizon, start);
  double count = std::pow(static_cast<double>(dists.size()), static_cast<double>(hs.size()));
  if (count > limit)
    throw ExplosionGuard("responder grid needs " + fmt_num(count) + " schedulers");
  std::vector<Scheduler> out;
  std::vector<std::size_t> digit(hs.size(), 0);
  while (true) {
    Scheduler s;
    s.horizon = horizon;
    for (std::size_t i = 0; i < hs.size(); ++i) s.table[hs[i]] = dists[digit[i]];
    out.push_back(std::move(s));
    std::size_t i = 0;
    while (i < digit.size() && ++digit[i] == dists.size()) digit[i++] = 0;
    if (i == digit.size()) return out;
  }
}

inline std::vector<double> time_grid(double b, int points) {
  std::vector<double> ts;
  for (int i = 1; i <= points; ++i) ts.push_back(b * i / points);
  return ts;
}

// For every adversary sigma of V from v0 there must be a responder sigma' of U
// from u0 with P^sigma'(u0)(C(w,t)) >= P^sigma(v0)(C(w,t)) - eps for all words
// of length <= max_len and all t in `times`. Outputs are matched by name.
inline FasterVerdict faster_than_bounded(const Smp& U, int u0, const Smp& V, int v0,
                                         const std::vector<Scheduler>& adversaries,
                                         const std::vector<Scheduler>& responders, int max_len,
                                         const std::vector<double>& times, double eps = 0) {
  FasterVerdict v;
  v.method = "bounded-scheduler-search";
  v.exact = false;
  std::vector<int> out_map(V.outputs().size(), -1);
  for (std::size_t o = 0; o < V.outputs().size(); ++o)
    for (std::size_t i = 0; i < U.outputs().size(); ++i)
      if (U.outputs()[i] == V.outputs()[o]) out_map[o] = static_cast<int>(i);
  using Table = std::map<std::vector<int>, std::vector<double>>;
  auto table = [&](const Smp& m, const Scheduler& s, int x, const std::vector<int>* remap) {
    Table tb;
    for (const auto& [w, f] : cylinder_cdfs(m, s, x, max_len)) {
      std::vector<int> key = w;
      if (remap) {
        bool ok = true;
        for (auto& o : key) ok = ok && (o = (*remap)[o]) >= 0;
        if (!ok) continue;  // a word U cannot emit
      }
      std::vector<double> vals;
      for (double t : times) vals.push_back(eval(f, t));
      tb.emplace(std::move(key), std::move(vals));
    }
    return tb;
  };
  std::vector<Table> resp;
  for (const auto& s : responders) resp.push_back(table(U, s, u0, nullptr));
  for (const auto& adv : adversaries) {
    Table need;
    // words are compared in U's output indexing
    for (auto& [w, f] : cylinder_cdfs(V, adv, v0, max_len)) {
      std::vector<int> key = w;
      bool emit = true;
      for (auto& o : key) emit = emit && (o = out_map[o]) >= 0;
      std::vector<double> vals;
      for (double t : times) vals.push_back(eval(f, t));
      if (!emit) {
        // U can never match this word
        for (std::size_t i = 0; i < times.size(); ++i)
          if (vals[i] - eps > 0) {
            v.holds = false;
            v.witness = FasterWitness{w, times[i], 0, vals[i], to_string(V, adv), "unmatched"};
            return v;
          }
        continue;
      }
      need.emplace(std::move(key), std::move(vals));
    }
    // report the responder that came closest, at its largest shortfall
    std::optional<FasterWitness> closest;
    double closest_gap = kInf;
    bool answered = false;
    for (const auto& r : resp) {
      ++v.checks;
      double gap = -kInf;
      FasterWitness at;
      for (const auto& [w, vals] : need) {
        auto it = r.find(w);
        for (std::size_t i = 0; i < times.size(); ++i) {
          double have = it == r.end() ? 0.0 : it->second[i];
          double g = vals[i] - eps - have;
          if (g > gap) {
            gap = g;
            at = FasterWitness{w, times[i], have, vals[i], to_string(V, adv), ""};
          }
        }
      }
      if (gap <= 1e-12) {
        answered = true;
        break;
      }
      if (gap < closest_gap) {
        closest_gap = gap;
        closest = at;
      }
    }
    if (!answered) {
      v.holds = false;
      v.witness = closest.value_or(FasterWitness{{}, 0, 0, 0, to_string(V, adv), "no responders"});
      return v;
    }
  }
  return v;
}

struct ApproxOptions {
  int time_points = 64;
  std::optional<int> horizon_override;
  double limit = kSchedulerLimit;
};

// Time-bounded additive approximation: words beyond the slow bound N have
// probability <= eps on [0, b] under every scheduler and need no check.
inline FasterVerdict time_bounded_additive_faster(const Smp& U, int u0, const Smp& V, int v0,
                                                  double eps, double b,
                                                  const ApproxOptions& opt = {}) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  if (!is_reactive(U) || !is_reactive(V)) throw KindMismatch("expected reactive processes");
  FasterVerdict v;
  v.method = "additive-approximation";
  v.exact = false;
  if (eps >= 1) return v;
  std::vector<double> rates = exponential_rates(U), rv = exponential_rates(V);
  rates.insert(rates.end(), rv.begin(), rv.end());
  int N = slow_bound_N(rates, eps, b);
  int L = opt.horizon_override ? std::min(N, *opt.horizon_override) : N;
  if (L == 0) return v;
  auto adv = all_schedulers(V, L, opt.limit, v0);
  auto resp = all_schedulers(U, L, opt.limit, u0);
  FasterVerdict r = faster_than_bounded(U, u0, V, v0, adv, resp, L, time_grid(b, opt.time_points),
                                        eps);
  r.method = "additive-approximation";
  return r;
}

// ---------------------------------------------------------------------------
// Trace logic: P^{<=t}_{>=p}(<a1>...<an>T)

struct TraceFormula {
  std::vector<std::string> word;
  Rational t = 0;
  Rational p = 0;
  friend bool operator==(const TraceFormula&, const TraceFormula&) = default;
};

inline std::string to_string(const TraceFormula& f) {
  std::string s = "P " + to_string(f.t) + " " + to_string(f.p) + " ";
  for (const auto& a : f.word) s += "<" + a + ">";
  return s + "T";
}

// `P <t> <p> <a><b>...T`
inline TraceFormula parse_trace_formula(std::string_view text) {
  TokenCursor c(text);
  std::string kw = c.expect_ident();
  if (kw != "P") throw SyntaxError("expected 'P'", 0);
  TraceFormula f;
  f.t = c.expect_rational();
  std::size_t ppos = c.peek().pos;
  f.p = c.expect_rational();
  if (f.p > 1) throw SyntaxError("probability bound above 1", ppos);
  while (c.accept_sym('<')) {
    f.word.push_back(c.expect_ident());
    c.expect_sym('>');
  }
  std::string top = c.expect_ident();
  if (top != "T" && top != "true") throw SyntaxError("expected 'T'", 0);
  c.expect_end();
  return f;
}

inline double trace_probability(const Smp& m, int s, const TraceFormula& f) {
  require_generative(m);
  std::vector<int> w;
  for (const auto& a : f.word) {
    auto it = std::find(m.outputs().begin(), m.outputs().end(), a);
    if (it == m.outputs().end()) return 0.0;  // the word cannot be emitted
    w.push_back(static_cast<int>(it - m.outputs().begin()));
  }
  return cylinder_prob(m, Scheduler::uniform(m), s, w, to_double(f.t));
}

inline bool model_check_trace_logic(const Smp& m, int s, const TraceFormula& f) {
  return trace_probability(m, s, f) >= to_double(f.p);
}

// n+1 states with Dirac(0) residences; state i emits the i-th letter with
// probability 1.
inline Smp satisfiable_trace_logic(const TraceFormula& f) {
  std::vector<std::string> outs;
  for (const auto& a : f.word)
    if (std::find(outs.begin(), outs.end(), a) == outs.end()) outs.push_back(a);
  if (outs.empty()) outs.push_back("a");
  Smp m(SmpKind::Generative, {"go"}, outs);
  for (std::size_t i = 0; i <= f.word.size(); ++i) m.add_state("q" + std::to_string(i), Cdf::dirac(0));
  for (std::size_t i = 0; i < f.word.size(); ++i)
    m.add_trans(static_cast<int>(i), 0, 1, static_cast<int>(i + 1), m.output_index(f.word[i]));
  return m;
}

}  // namespace stochpre
