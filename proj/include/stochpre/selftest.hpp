#pragma once

// Worked examples with known answers, run by `stochpre_cli selftest` and by
// the acceptance binary. Models are embedded so no files are needed.

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "anomaly.hpp"
#include "fasterthan.hpp"
#include "simdist.hpp"
#include "wlwb.hpp"

namespace stochpre::selftest {

struct Row {
  int criterion = 0;
  std::string name;
  std::string expected;
  std::string actual;
  bool pass = false;
  double seconds = 0;
};

namespace models {

inline const char* kExpPair =
    "smp reactive\ninputs a\nstate s1 exp(4) {}\nstate s2 exp(2) {}\n"
    "trans s1 a 1 s1\ntrans s2 a 1 s2\n";

inline const char* kTwoChainU =
    "smp reactive\ninputs a\nstate u0 exp(2) {}\nstate u1 exp(0.5) {}\nstate u2 exp(1) {done}\n"
    "trans u0 a 1 u1\ntrans u1 a 1 u2\ntrans u2 a 1 u2\n";

inline const char* kTwoChainV =
    "smp reactive\ninputs a\nstate v0 exp(0.5) {}\nstate v1 exp(2) {}\nstate v2 exp(1) {done}\n"
    "trans v0 a 1 v1\ntrans v1 a 1 v2\ntrans v2 a 1 v2\n";

inline std::string context(const char* r0, const char* r1, const char* r2) {
  return std::string("smp reactive\ninputs a\nstate w0 exp(") + r0 + ") {}\nstate w1 exp(" + r1 +
         ") {}\nstate w2 exp(" + r2 + ") {}\ntrans w0 a 1 w1\ntrans w1 a 1 w2\ntrans w2 a 1 w2\n";
}

inline const char* kBisimFigure =
    "wts\nstate s {a}\nstate t {a}\nstate s1 {b}\nstate t1 {b}\n"
    "trans s 1 s1\ntrans s 2 s1\ntrans s 3 s1\ntrans t 1 t1\ntrans t 3 t1\n";

inline const char* kIncomparable =
    "smp reactive\ninputs a,b\nstate u0 exp(1) {}\nstate v0 exp(1) {}\nstate v1 exp(1) {}\n"
    "state v2 exp(1) {}\ntrans u0 a 1 u0\ntrans u0 b 1 u0\ntrans v0 a 1 v1\ntrans v0 b 1 v2\n"
    "trans v1 a 1 v1\ntrans v1 b 1 v1\ntrans v2 a 1 v2\ntrans v2 b 1 v2\n";

inline const char* kSatExample = "!( !(L 2 p1 & M 5 (L 1 p1)) & !(M 2 p2) )";

}  // namespace models

namespace detail {

inline std::string num(double v) { return std::isinf(v) ? "inf" : fmt_num(v); }

inline bool near(double a, double b, double tol) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol;
}

// Runs `body`, which fills actual and pass; errors count as failures.
inline Row timed(int criterion, std::string name, std::string expected, double max_seconds,
                 const std::function<void(Row&)>& body) {
  Row r;
  r.criterion = criterion;
  r.name = std::move(name);
  r.expected = std::move(expected);
  auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.actual = std::string("error: ") + e.what();
    r.pass = false;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (max_seconds > 0 && r.seconds >= max_seconds) {
    r.pass = false;
    r.actual += " (took " + fmt_num(r.seconds) + " s)";
  }
  return r;
}

// Smallest N with P(Poisson(lambda) >= N) <= eps, by direct summation of the
// mass below N.
inline int summed_poisson_threshold(double lambda, double eps) {
  double term = std::exp(-lambda), below = 0;
  for (int n = 0;; ++n) {
    if (1 - below <= eps) return n;
    below += term;
    term *= lambda / (n + 1);
  }
}

}  // namespace detail

inline std::vector<Row> run() {
  using detail::near;
  using detail::num;
  using detail::timed;
  std::vector<Row> rows;

  rows.push_back(timed(1, "simdist exp pair", "d(s1,s2)=2 d(s2,s1)=1", 1.0, [](Row& r) {
    Smp m = parse_smp(models::kExpPair);
    double a = simulation_distance(m, 0, 1).value, b = simulation_distance(m, 1, 0).value;
    r.actual = "d(s1,s2)=" + num(a) + " d(s2,s1)=" + num(b);
    r.pass = a == 2 && b == 1;
  }));

  struct AnomalyCase {
    const char* name;
    CompositionKind star;
    std::string ctx;
    double uw, vw;
  };
  for (const auto& c :
       {AnomalyCase{"anomaly product", CompositionKind::ProductRate, models::context("10", "0.1", "1"),
                    0.09, 0.30},
        AnomalyCase{"anomaly minimum", CompositionKind::MinRate, models::context("1", "2", "1"),
                    0.40, 0.51},
        AnomalyCase{"anomaly maximum", CompositionKind::MaxRate, models::context("2", "1", "1"),
                    0.75, 0.91}}) {
    rows.push_back(timed(2, c.name,
                         "P(U|W)=" + fmt_num(c.uw) + " P(V|W)=" + fmt_num(c.vw) +
                             " +-0.01 anomaly=true",
                         1.0, [&](Row& r) {
                           Smp u = parse_smp(models::kTwoChainU), v = parse_smp(models::kTwoChainV);
                           Smp w = parse_smp(c.ctx);
                           auto a = detect_anomaly(u, v, w, c.star, {"a", "a"}, 2);
                           r.actual = "P(U|W)=" + num(a.p_uw) + " P(V|W)=" + num(a.p_vw) +
                                      " anomaly=" + (a.anomaly ? "true" : "false");
                           r.pass = near(a.p_uw, c.uw, 0.01) && near(a.p_vw, c.vw, 0.01) && a.anomaly;
                         }));
  }

  rows.push_back(timed(3, "wlwb satisfiability", "example sat with checked model; p&!p, L2p&M1p unsat",
                       1.0, [](Row& r) {
                         WFormula f = parse_wlwb(models::kSatExample);
                         auto s = satisfiable_wlwb(f);
                         bool checked = s.sat && model_check_wlwb(s.model, s.witness, f);
                         bool u1 = satisfiable_wlwb(parse_wlwb("p & !p")).sat;
                         bool u2 = satisfiable_wlwb(parse_wlwb("L 2 p & M 1 p")).sat;
                         r.actual = std::string("example ") + (s.sat ? "sat" : "unsat") +
                                    (checked ? " checked" : " unchecked") + "; p&!p " +
                                    (u1 ? "sat" : "unsat") + ", L2p&M1p " + (u2 ? "sat" : "unsat");
                         r.pass = checked && !u1 && !u2;
                       }));

  rows.push_back(timed(4, "generalized bisimulation figure", "gen s~t, weighted s!~t", 1.0,
                       [](Row& r) {
                         Wts m = parse_wts(models::kBisimFigure);
                         bool g = gen_weighted_bisim(m, "s", "t"), w = weighted_bisim(m, "s", "t");
                         r.actual = std::string("gen ") + (g ? "s~t" : "s!~t") + ", weighted " +
                                    (w ? "s~t" : "s!~t");
                         r.pass = g && !w;
                       }));

  struct AccelCase {
    const char* f;
    const char* g;
    double c;
  };
  for (const auto& c : {AccelCase{"exp(2)", "exp(4)", 2}, AccelCase{"unif(0,3)", "exp(0.5)", 1.5},
                        AccelCase{"unif(1,4)", "unif(2,3)", 4.0 / 3}, AccelCase{"exp(1)", "unif(1,2)", kInf}}) {
    rows.push_back(timed(5, std::string("c(") + c.f + ", " + c.g + ")",
                         num(c.c) + " (closed form and numeric)", 0, [&](Row& r) {
                           Cdf f = parse_cdf(c.f), g = parse_cdf(c.g);
                           double a = least_acceleration(f, g), n = least_acceleration_numeric(f, g);
                           r.actual = "closed " + num(a) + ", numeric " + num(n);
                           r.pass = near(a, c.c, 1e-12) && near(n, c.c, 1e-6);
                         }));
  }

  rows.push_back(timed(7, "faster-than incomparability", "bisimilar=true faster_than=false", 0,
                       [](Row& r) {
                         Smp m = parse_smp(models::kIncomparable);
                         int u0 = m.index("u0"), v0 = m.index("v0");
                         bool bis = bisimilar(m, u0, v0);
                         std::vector<std::vector<double>> d(m.size(), {1, 0});
                         d[v0] = {0.5, 0.5};
                         d[m.index("v2")] = {0, 1};
                         Scheduler adversary = Scheduler::memoryless_dist(m, d);
                         // two steps: no responder keeps both words at 1/2
                         auto v = faster_than_bounded(m, u0, m, v0, {adversary},
                                                      grid_schedulers(m, 2, u0, 4), 2,
                                                      time_grid(3, 16));
                         r.actual = std::string("bisimilar=") + (bis ? "true" : "false") +
                                    " faster_than=" + (v.holds ? "true" : "false");
                         r.pass = bis && !v.holds;
                       }));

  rows.push_back(timed(8, "slow bound", "N equals summed Poisson(4) threshold; U faster than U", 0,
                       [](Row& r) {
                         int n = slow_bound_N({2}, 0.01, 2);
                         int ref = detail::summed_poisson_threshold(4, 0.01);
                         Smp u = parse_smp(models::kTwoChainU);
                         bool all = true;
                         for (double eps : {0.5, 0.1, 0.01})
                           for (double b : {0.5, 1.0, 2.0})
                             all = all && time_bounded_additive_faster(u, 0, u, 0, eps, b).holds;
                         r.actual = "N=" + std::to_string(n) + " summed=" + std::to_string(ref) +
                                    " U faster than U " + (all ? "everywhere" : "not everywhere");
                         r.pass = n == ref && all;
                       }));
  return rows;
}

}  // namespace stochpre::selftest
