#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <tuple>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "cdf.hpp"
#include "errors.hpp"
#include "rational.hpp"
#include "smp.hpp"

namespace stochpre {

using Dist = std::vector<std::pair<int, Rational>>;

struct Coupling {
  std::vector<std::tuple<int, int, Rational>> entries;  // (x, y, weight)
};

inline Rational mass(const Dist& d) {
  Rational m = 0;
  for (const auto& [x, p] : d) m += p;
  return m;
}

namespace detail {

using BigInt = boost::multiprecision::cpp_int;

// Edmonds-Karp on a dense capacity matrix.
inline BigInt max_flow(std::vector<std::vector<BigInt>>& cap, int src, int snk,
                       std::vector<std::vector<BigInt>>& flow) {
  const int n = static_cast<int>(cap.size());
  flow.assign(n, std::vector<BigInt>(n, 0));
  BigInt total = 0;
  while (true) {
    std::vector<int> prev(n, -1);
    prev[src] = src;
    std::queue<int> q;
    q.push(src);
    while (!q.empty() && prev[snk] < 0) {
      int u = q.front();
      q.pop();
      for (int v = 0; v < n; ++v)
        if (prev[v] < 0 && cap[u][v] - flow[u][v] > 0) {
          prev[v] = u;
          q.push(v);
        }
    }
    if (prev[snk] < 0) return total;
    BigInt push = -1;
    for (int v = snk; v != src; v = prev[v]) {
      BigInt r = cap[prev[v]][v] - flow[prev[v]][v];
      if (push < 0 || r < push) push = r;
    }
    for (int v = snk; v != src; v = prev[v]) {
      flow[prev[v]][v] += push;
      flow[v][prev[v]] -= push;
    }
    total += push;
  }
}

inline BigInt lcm_big(const BigInt& a, const BigInt& b) {
  return a / boost::multiprecision::gcd(a, b) * b;
}

// Merges repeated support points.
inline Dist normalize(const Dist& d) {
  std::map<int, Rational> m;
  for (const auto& [x, p] : d)
    if (p != 0) m[x] += p;
  return Dist(m.begin(), m.end());
}

}  // namespace detail

// Coupling of mu1 and mu2 supported in `allowed`, found by max-flow with
// capacities scaled to integers by the common denominator.
inline std::optional<Coupling> coupling_exists(const Dist& mu1_in, const Dist& mu2_in,
                                               const std::function<bool(int, int)>& allowed) {
  using detail::BigInt;
  Dist mu1 = detail::normalize(mu1_in), mu2 = detail::normalize(mu2_in);
  if (mass(mu1) != mass(mu2))
    throw MassMismatch("marginals have masses " + to_string(mass(mu1)) + " and " +
                       to_string(mass(mu2)));
  if (mu1.empty()) return Coupling{};
  BigInt den = 1;
  for (const auto* d : {&mu1, &mu2})
    for (const auto& [x, p] : *d) den = detail::lcm_big(den, denominator(p));
  auto scaled = [&](const Rational& p) { return BigInt(numerator(p) * (den / denominator(p))); };
  const int n1 = static_cast<int>(mu1.size()), n2 = static_cast<int>(mu2.size());
  const int src = 0, snk = n1 + n2 + 1;
  std::vector<std::vector<BigInt>> cap(snk + 1, std::vector<BigInt>(snk + 1, 0)), flow;
  BigInt total = 0;
  for (int i = 0; i < n1; ++i) {
    cap[src][1 + i] = scaled(mu1[i].second);
    total += cap[src][1 + i];
  }
  for (int j = 0; j < n2; ++j) cap[1 + n1 + j][snk] = scaled(mu2[j].second);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      if (allowed(mu1[i].first, mu2[j].first)) cap[1 + i][1 + n1 + j] = total;
  if (detail::max_flow(cap, src, snk, flow) != total) return std::nullopt;
  Coupling c;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      if (flow[1 + i][1 + n1 + j] > 0)
        c.entries.emplace_back(mu1[i].first, mu2[j].first,
                               Rational(flow[1 + i][1 + n1 + j], den));
  return c;
}

inline Dist row_dist(const Smp& m, int s, int a) {
  Dist d;
  for (const auto& t : m.trans(s, a)) d.emplace_back(t.dst, t.p);
  return detail::normalize(d);
}

// cm[i][j] = least acceleration c(F_i, F_j), numeric oracle outside the
// closed-form family.
using AccelMatrix = std::vector<std::vector<double>>;

inline AccelMatrix acceleration_matrix(const Smp& m, const GridSpec& grid = GridSpec::from_env()) {
  const int n = m.size();
  AccelMatrix cm(n, std::vector<double>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      try {
        cm[i][j] = least_acceleration(m.residence(i), m.residence(j));
      } catch (const UnsupportedShape&) {
        cm[i][j] = least_acceleration_numeric(m.residence(i), m.residence(j), grid);
      }
    }
  return cm;
}

using Relation = std::vector<std::vector<bool>>;

inline bool accel_ok(double eps, double c) { return eps >= c * (1 - 1e-12); }

// Greatest eps-simulation: R[s1][s2] iff s1 is eps-simulated by s2, i.e. the
// residence of s2 accelerated by eps dominates that of s1 and every input
// admits a coupling inside R.
inline Relation eps_simulation_relation(const Smp& m, double eps, const AccelMatrix& cm) {
  if (!is_reactive(m)) throw KindMismatch("eps-simulation needs a reactive process");
  const int n = m.size();
  const int k = static_cast<int>(m.inputs().size());
  std::vector<std::vector<Dist>> rows(n, std::vector<Dist>(k));
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < k; ++a) rows[s][a] = row_dist(m, s, a);
  Relation r(n, std::vector<bool>(n, false));
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      r[x][y] = m.labels(x) == m.labels(y) && accel_ok(eps, cm[y][x]);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) {
        if (!r[x][y]) continue;
        for (int a = 0; a < k; ++a) {
          bool ok = mass(rows[x][a]) == mass(rows[y][a]) &&
                    coupling_exists(rows[x][a], rows[y][a],
                                    [&](int u, int v) { return r[u][v]; })
                        .has_value();
          if (!ok) {
            r[x][y] = false;
            changed = true;
            break;
          }
        }
      }
  }
  return r;
}

inline Relation eps_simulation_relation(const Smp& m, double eps) {
  return eps_simulation_relation(m, eps, acceleration_matrix(m));
}

inline bool eps_simulates(const Smp& m, int s1, int s2, double eps) {
  if (eps < 1) throw std::invalid_argument("eps must be at least 1");
  return eps_simulation_relation(m, eps)[s1][s2];
}

inline bool simulates(const Smp& m, int s1, int s2) { return eps_simulates(m, s1, s2, 1); }

// Bisimulation classes by partition refinement: residences equal (mutual
// 1-faster) and labels equal, then per (input, output, class) masses.
inline std::vector<int> bisim_classes(const Smp& m) {
  const int n = m.size();
  std::vector<int> cls(n, -1);
  int next = 0;
  for (int x = 0; x < n; ++x) {
    if (cls[x] >= 0) continue;
    cls[x] = next;
    for (int y = x + 1; y < n; ++y)
      if (cls[y] < 0 && m.labels(x) == m.labels(y) &&
          eps_faster(m.residence(x), m.residence(y), 1) &&
          eps_faster(m.residence(y), m.residence(x), 1))
        cls[y] = next;
    ++next;
  }
  const int k = static_cast<int>(m.inputs().size());
  while (true) {
    using Sig = std::pair<int, std::map<std::tuple<int, int, int>, Rational>>;
    std::map<Sig, int> ids;
    std::vector<int> fresh(n);
    for (int x = 0; x < n; ++x) {
      Sig sig{cls[x], {}};
      for (int a = 0; a < k; ++a)
        for (const auto& t : m.trans(x, a)) sig.second[{a, t.out, cls[t.dst]}] += t.p;
      auto it = ids.emplace(sig, static_cast<int>(ids.size())).first;
      fresh[x] = it->second;
    }
    if (static_cast<int>(ids.size()) == next) return fresh;
    next = static_cast<int>(ids.size());
    cls = fresh;
  }
}

inline bool bisimilar(const Smp& m, int s1, int s2) {
  auto c = bisim_classes(m);
  return c[s1] == c[s2];
}

struct DistanceResult {
  double value;  // in [1, inf]
  double raw;    // unclamped least acceleration of the two residences
  std::vector<double> candidates;
  Relation witness;  // eps-simulation at `value` when finite
};

// Candidate constants: 1 and every finite clamped c over ordered state pairs,
// sorted with ties closer than 1e-9 (relative) merged.
inline std::vector<double> candidate_constants(const AccelMatrix& cm) {
  std::vector<double> c{1.0};
  for (const auto& row : cm)
    for (double v : row)
      if (std::isfinite(v)) c.push_back(std::max(1.0, v));
  std::sort(c.begin(), c.end());
  std::vector<double> out;
  for (double v : c)
    if (out.empty() || v > out.back() * (1 + 1e-9)) out.push_back(v);
  return out;
}

inline DistanceResult simulation_distance(const Smp& m, int s1, int s2,
                                          const AccelMatrix& cm) {
  DistanceResult res{kInf, cm[s2][s1], candidate_constants(cm), {}};
  const auto& c = res.candidates;
  auto rel_at = [&](std::size_t i) { return eps_simulation_relation(m, c[i], cm); };
  Relation top = rel_at(c.size() - 1);
  if (!top[s1][s2]) return res;
  std::size_t lo = 0, hi = c.size() - 1;
  Relation best = top;
  if (auto r0 = rel_at(0); r0[s1][s2]) {
    hi = 0;
    best = r0;
  }
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    Relation r = rel_at(mid);
    if (r[s1][s2]) {
      hi = mid;
      best = std::move(r);
    } else {
      lo = mid;
    }
  }
  res.value = c[hi];
  res.witness = std::move(best);
  return res;
}

inline DistanceResult simulation_distance(const Smp& m, int s1, int s2) {
  return simulation_distance(m, s1, s2, acceleration_matrix(m));
}

struct DistanceTable {
  std::vector<std::vector<double>> d;      // distances in [1, inf]
  std::vector<std::vector<double>> log_d;  // log d
  std::vector<std::string> violations;     // hemimetric axiom failures
};

inline DistanceTable log_distance_table(const Smp& m) {
  const int n = m.size();
  AccelMatrix cm = acceleration_matrix(m);
  auto cand = candidate_constants(cm);
  // one relation per candidate covers every pair at once
  std::vector<Relation> rels;
  for (double c : cand) rels.push_back(eps_simulation_relation(m, c, cm));
  DistanceTable t;
  t.d.assign(n, std::vector<double>(n, kInf));
  t.log_d.assign(n, std::vector<double>(n, kInf));
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      for (std::size_t i = 0; i < cand.size(); ++i)
        if (rels[i][x][y]) {
          t.d[x][y] = cand[i];
          break;
        }
      t.log_d[x][y] = std::log(t.d[x][y]);
    }
  for (int x = 0; x < n; ++x) {
    if (t.log_d[x][x] != 0) t.violations.push_back("d(" + m.name(x) + "," + m.name(x) + ") != 1");
    for (int y = 0; y < n; ++y)
      for (int z = 0; z < n; ++z) {
        double lhs = t.log_d[x][z], rhs = t.log_d[x][y] + t.log_d[y][z];
        if (std::isfinite(rhs) && lhs > rhs + 1e-9)
          t.violations.push_back("triangle " + m.name(x) + "," + m.name(y) + "," + m.name(z));
      }
  }
  return t;
}

}  // namespace stochpre
