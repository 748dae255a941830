#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cdf.hpp"
#include "errors.hpp"
#include "lexer.hpp"
#include "rational.hpp"
#include "simdist.hpp"
#include "smp.hpp"

namespace stochpre {

enum class TOp { Atom, NegAtom, Ell, Em, LProb, MProb, And, Or };

struct TFormula {
  TOp op = TOp::Atom;
  std::string name;  // atom or input
  Rational p = 0;
  Rational t = 0;
  std::vector<TFormula> kids;

  static TFormula atom(std::string a) { return {TOp::Atom, std::move(a), 0, 0, {}}; }
  static TFormula neg_atom(std::string a) { return {TOp::NegAtom, std::move(a), 0, 0, {}}; }
  static TFormula ell(Rational p, Rational t) { return {TOp::Ell, "", check_p(p), check_t(t), {}}; }
  static TFormula em(Rational p, Rational t) { return {TOp::Em, "", check_p(p), check_t(t), {}}; }
  static TFormula L(Rational p, std::string a, TFormula f) {
    return {TOp::LProb, std::move(a), check_p(p), 0, {std::move(f)}};
  }
  static TFormula M(Rational p, std::string a, TFormula f) {
    return {TOp::MProb, std::move(a), check_p(p), 0, {std::move(f)}};
  }
  static TFormula conj(TFormula a, TFormula b) {
    return {TOp::And, "", 0, 0, {std::move(a), std::move(b)}};
  }
  static TFormula disj(TFormula a, TFormula b) {
    return {TOp::Or, "", 0, 0, {std::move(a), std::move(b)}};
  }

  friend bool operator==(const TFormula&, const TFormula&) = default;

 private:
  static Rational check_p(const Rational& p) {
    if (p < 0 || p > 1) throw std::invalid_argument("probability bound outside [0,1]");
    return p;
  }
  static Rational check_t(const Rational& t) {
    if (t < 0) throw std::invalid_argument("negative time bound");
    return t;
  }
};

enum class Fragment { Full, Geq, Leq };

inline bool in_fragment(const TFormula& f, Fragment fr) {
  if (fr == Fragment::Geq && (f.op == TOp::Em || f.op == TOp::MProb)) return false;
  if (fr == Fragment::Leq && (f.op == TOp::Ell || f.op == TOp::LProb)) return false;
  return std::all_of(f.kids.begin(), f.kids.end(),
                     [&](const TFormula& k) { return in_fragment(k, fr); });
}

inline std::string to_string(const TFormula& f) {
  switch (f.op) {
    case TOp::Atom: return f.name;
    case TOp::NegAtom: return "!" + f.name;
    case TOp::Ell: return "l " + to_string(f.p) + " " + to_string(f.t);
    case TOp::Em: return "m " + to_string(f.p) + " " + to_string(f.t);
    case TOp::LProb: return "Lp " + to_string(f.p) + " " + f.name + " " + to_string(f.kids[0]);
    case TOp::MProb: return "Mp " + to_string(f.p) + " " + f.name + " " + to_string(f.kids[0]);
    case TOp::And: return "(" + to_string(f.kids[0]) + " & " + to_string(f.kids[1]) + ")";
    case TOp::Or: return "(" + to_string(f.kids[0]) + " | " + to_string(f.kids[1]) + ")";
  }
  return "?";
}

inline int depth(const TFormula& f) {
  int d = 0;
  for (const auto& k : f.kids) d = std::max(d, depth(k));
  return d + (f.op == TOp::LProb || f.op == TOp::MProb);
}

namespace detail {

inline TFormula parse_t_or(TokenCursor& c);

inline TFormula parse_t_unary(TokenCursor& c) {
  const Token& t = c.peek();
  if (c.accept_sym('(')) {
    TFormula f = parse_t_or(c);
    c.expect_sym(')');
    return f;
  }
  if (c.accept_sym('!')) return TFormula::neg_atom(c.expect_ident());
  if (t.kind != Token::Ident)
    throw SyntaxError("unexpected '" + TokenCursor::describe(t) + "'", t.pos);
  std::string kw = c.next().text;
  auto prob = [&] {
    std::size_t pos = c.peek().pos;
    Rational p = c.expect_rational();
    if (p > 1) throw SyntaxError("probability bound above 1", pos);
    return p;
  };
  if (kw == "l" || kw == "m") {
    Rational p = prob();
    Rational tb = c.expect_rational();
    return kw == "l" ? TFormula::ell(p, tb) : TFormula::em(p, tb);
  }
  if (kw == "Lp" || kw == "Mp") {
    Rational p = prob();
    std::string a = c.expect_ident();
    TFormula f = parse_t_unary(c);
    return kw == "Lp" ? TFormula::L(p, a, f) : TFormula::M(p, a, f);
  }
  return TFormula::atom(kw);
}

inline TFormula parse_t_and(TokenCursor& c) {
  TFormula f = parse_t_unary(c);
  while (c.accept_sym('&')) f = TFormula::conj(f, parse_t_unary(c));
  return f;
}

inline TFormula parse_t_or(TokenCursor& c) {
  TFormula f = parse_t_and(c);
  while (c.accept_sym('|')) f = TFormula::disj(f, parse_t_and(c));
  return f;
}

}  // namespace detail

inline TFormula parse_tml(std::string_view text) {
  TokenCursor c(text);
  TFormula f = detail::parse_t_or(c);
  c.expect_end();
  return f;
}

inline TFormula perturb(const TFormula& f, const Rational& eps) {
  TFormula g = f;
  if (g.op == TOp::Ell || g.op == TOp::Em) g.t *= eps;
  for (auto& k : g.kids) k = perturb(k, eps);
  return g;
}

// Absolute slack on F_s(t) comparisons, so that a threshold computed as the
// CDF value of one state is not lost to rounding when re-evaluated after a
// time rescaling.
inline constexpr double kTmlSlack = 1e-12;

inline std::vector<bool> sat_set(const Smp& m, const TFormula& f, double slack = kTmlSlack) {
  const int n = m.size();
  std::vector<bool> v(n, false);
  switch (f.op) {
    case TOp::Atom:
    case TOp::NegAtom:
      for (int s = 0; s < n; ++s) v[s] = (m.labels(s).count(f.name) > 0) == (f.op == TOp::Atom);
      break;
    case TOp::Ell:
    case TOp::Em: {
      double t = to_double(f.t), p = to_double(f.p);
      for (int s = 0; s < n; ++s) {
        double x = eval(m.residence(s), t);
        v[s] = f.op == TOp::Ell ? x >= p - slack : x <= p + slack;
      }
      break;
    }
    case TOp::LProb:
    case TOp::MProb: {
      int a = m.input_index(f.name);
      auto inner = sat_set(m, f.kids[0], slack);
      for (int s = 0; s < n; ++s) {
        Rational q = 0;
        for (const auto& tr : m.trans(s, a))
          if (inner[tr.dst]) q += tr.p;
        v[s] = f.op == TOp::LProb ? q >= f.p : q <= f.p;
      }
      break;
    }
    case TOp::And:
    case TOp::Or: {
      auto l = sat_set(m, f.kids[0], slack), r = sat_set(m, f.kids[1], slack);
      for (int s = 0; s < n; ++s) v[s] = f.op == TOp::And ? (l[s] && r[s]) : (l[s] || r[s]);
      break;
    }
  }
  return v;
}

inline bool model_check_tml(const Smp& m, int s, const TFormula& f) { return sat_set(m, f)[s]; }

// ---------------------------------------------------------------------------
// Characterisation harness

struct HarnessReport {
  bool simulates = false;
  std::size_t formulas = 0;
  // formulas violating the direction that eps-simulation guarantees
  std::vector<TFormula> counterexamples;
  // when not eps-simulated: formulas separating the pair
  std::vector<TFormula> witnesses;
};

namespace detail {

// Time constants: characteristic points of every residence and midpoints.
inline std::vector<Rational> harness_times(const Smp& m) {
  std::set<double> ts;
  std::function<void(const Cdf&)> add = [&](const Cdf& f) {
    switch (f.kind()) {
      case CdfKind::Dirac: ts.insert(f.x()); break;
      case CdfKind::Uniform: ts.insert(f.a()); ts.insert(f.b()); break;
      case CdfKind::Exponential:
        for (double k : {0.25, 1.0, 3.0}) ts.insert(k / f.rate());
        break;
      default:
        for (const auto& p : f.parts()) add(p);
        if (f.kind() == CdfKind::PointwiseMax || f.kind() == CdfKind::PointwiseMin) {
          add(f.left());
          add(f.right());
        }
    }
  };
  for (int s = 0; s < m.size(); ++s) add(m.residence(s));
  std::vector<double> v(ts.begin(), ts.end());
  std::set<double> all(v.begin(), v.end());
  for (std::size_t i = 0; i + 1 < v.size(); ++i) all.insert(0.5 * (v[i] + v[i + 1]));
  std::vector<Rational> out;
  for (double t : all)
    if (std::isfinite(t) && t >= 0) out.push_back(from_double(t));
  return out;
}

}  // namespace detail

// Enumerates formulas of the chosen fragment up to modal depth `depth`, with
// thresholds taken at the values the model's own states attain, and pairs of
// conjunctions/disjunctions at the base level. Formulas are deduplicated by
// (sat set, sat set of the eps-perturbation).
inline std::vector<TFormula> enumerate_tml(const Smp& m, Fragment fr, int depth_budget,
                                           const Rational& eps, std::size_t cap = 4000) {
  using Key = std::pair<std::vector<bool>, std::vector<bool>>;
  std::map<Key, TFormula> seen;
  std::vector<TFormula> level;
  auto offer = [&](const TFormula& f, std::vector<TFormula>& into) {
    if (seen.size() >= cap) return;
    Key k{sat_set(m, f), sat_set(m, perturb(f, eps))};
    if (seen.emplace(k, f).second) into.push_back(f);
  };
  std::set<std::string> props;
  for (int s = 0; s < m.size(); ++s) props.insert(m.labels(s).begin(), m.labels(s).end());
  for (const auto& a : props) {
    offer(TFormula::atom(a), level);
    offer(TFormula::neg_atom(a), level);
  }
  for (const auto& t : detail::harness_times(m)) {
    std::set<Rational> ps;
    for (int s = 0; s < m.size(); ++s) ps.insert(from_double(eval(m.residence(s), to_double(t))));
    for (const auto& p : ps) {
      if (fr != Fragment::Leq) offer(TFormula::ell(p, t), level);
      if (fr != Fragment::Geq) offer(TFormula::em(p, t), level);
    }
  }
  std::vector<TFormula> all = level;
  std::vector<TFormula> base = level;
  for (std::size_t i = 0; i < base.size(); ++i)
    for (std::size_t j = i + 1; j < base.size(); ++j) {
      offer(TFormula::conj(base[i], base[j]), all);
      offer(TFormula::disj(base[i], base[j]), all);
    }
  std::vector<TFormula> frontier = all;
  for (int d = 1; d <= depth_budget; ++d) {
    std::vector<TFormula> next;
    for (const auto& g : frontier) {
      auto inner = sat_set(m, g);
      for (std::size_t a = 0; a < m.inputs().size(); ++a) {
        std::set<Rational> ps;
        for (int s = 0; s < m.size(); ++s) {
          Rational q = 0;
          for (const auto& tr : m.trans(s, static_cast<int>(a)))
            if (inner[tr.dst]) q += tr.p;
          ps.insert(q);
        }
        for (const auto& p : ps) {
          if (fr != Fragment::Leq) offer(TFormula::L(p, m.inputs()[a], g), next);
          if (fr != Fragment::Geq) offer(TFormula::M(p, m.inputs()[a], g), next);
        }
      }
    }
    all.insert(all.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return all;
}

// Checks both halves of the logical characterisation of eps-simulation on the
// pair: s1 |= phi implies s2 |= phi^eps over the >= fragment, and
// s2 |= phi^eps implies s1 |= phi over the <= fragment.
inline HarnessReport characterisation_harness(const Smp& m, int s1, int s2, const Rational& eps,
                                              int depth_budget = 2) {
  HarnessReport r;
  r.simulates = eps_simulates(m, s1, s2, to_double(eps));
  for (Fragment fr : {Fragment::Geq, Fragment::Leq}) {
    for (const auto& f : enumerate_tml(m, fr, depth_budget, eps)) {
      ++r.formulas;
      bool a = model_check_tml(m, s1, f), b = model_check_tml(m, s2, perturb(f, eps));
      bool holds = fr == Fragment::Geq ? (!a || b) : (!b || a);
      if (holds) continue;
      (r.simulates ? r.counterexamples : r.witnesses).push_back(f);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Time-bounded reachability

struct ProbInterval {
  double lower;
  double upper;
};

// P^sigma_s(reach [[beta]] within time t) over first-hit paths of at most
// `horizon` transitions. The upper end adds, for every path still outside the
// target after `horizon` steps, its probability times the chance that the
// residences seen so far (including the current state) fit in t.
inline ProbInterval reachability_prob(const Smp& m, const Scheduler& sigma, int s,
                                      const TFormula& beta, double t, int horizon,
                                      double precision = 1.0) {
  auto target = sat_set(m, beta);
  if (target[s]) return {1, 1};
  // states with some positive-probability path into the target
  std::vector<bool> live = target;
  for (bool grew = true; grew;) {
    grew = false;
    for (int x = 0; x < m.size(); ++x)
      for (std::size_t a = 0; a < m.inputs().size() && !live[x]; ++a)
        for (const auto& tr : m.trans(x, static_cast<int>(a)))
          if (live[tr.dst]) {
            live[x] = grew = true;
            break;
          }
  }
  std::map<std::vector<int>, double> hit, open;  // sorted residence states -> weight
  std::vector<int> hist{s};
  std::function<void(double)> go = [&](double w) {
    int x = hist.back();
    if (!live[x]) return;
    if (target[x]) {
      std::vector<int> key(hist.begin(), hist.end() - 1);
      std::sort(key.begin(), key.end());
      hit[key] += w;
      return;
    }
    if (static_cast<int>(hist.size()) - 1 == horizon) {
      std::vector<int> key(hist);
      std::sort(key.begin(), key.end());
      open[key] += w;
      return;
    }
    const auto& d = sigma.at(hist);
    for (std::size_t a = 0; a < d.size(); ++a) {
      if (d[a] == 0) continue;
      for (const auto& tr : m.trans(x, static_cast<int>(a))) {
        hist.push_back(tr.dst);
        go(w * d[a] * to_double(tr.p));
        hist.pop_back();
      }
    }
  };
  go(1.0);
  auto sum = [&](const std::map<std::vector<int>, double>& parts) {
    double acc = 0;
    for (const auto& [key, w] : parts) {
      std::vector<Cdf> rs;
      for (int x : key) rs.push_back(m.residence(x));
      acc += w * (rs.empty() ? 1.0 : eval(convolve_all(rs), t));
    }
    return acc;
  };
  double lo = sum(hit), up = std::min(1.0, lo + sum(open));
  if (up - lo > precision)
    throw HorizonTooShort("reachability interval width " + fmt_num(up - lo) +
                          " exceeds the requested precision");
  return {lo, up};
}

}  // namespace stochpre
