#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "lexer.hpp"

namespace stochpre {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class CdfKind {
  Dirac,
  Uniform,
  Exponential,
  Convolution,
  Mixture,
  PointwiseMax,
  PointwiseMin
};

// Immutable symbolic CDF on [0, inf). Copies share the node.
class Cdf {
 public:
  static Cdf dirac(double x) {
    if (!(x >= 0) || !std::isfinite(x)) throw InvalidCdf("dirac: x must be >= 0");
    return Cdf(make(CdfKind::Dirac, x, 0));
  }
  static Cdf uniform(double a, double b) {
    if (!(a >= 0) || !(a < b) || !std::isfinite(b))
      throw InvalidCdf("unif: need 0 <= a < b");
    return Cdf(make(CdfKind::Uniform, a, b));
  }
  static Cdf exponential(double rate) {
    if (!(rate > 0) || !std::isfinite(rate))
      throw InvalidCdf("exp: rate must be > 0");
    return Cdf(make(CdfKind::Exponential, rate, 0));
  }
  static Cdf convolution(std::vector<Cdf> parts) {
    if (parts.empty()) throw InvalidCdf("conv: needs at least one part");
    auto n = make(CdfKind::Convolution, 0, 0);
    n->parts = std::move(parts);
    return Cdf(n);
  }
  static Cdf mixture(std::vector<double> w, std::vector<Cdf> parts) {
    if (w.size() != parts.size() || parts.empty())
      throw InvalidCdf("mix: weights and parts differ in length");
    double s = 0;
    for (double x : w) {
      if (!(x >= 0 && x <= 1)) throw InvalidCdf("mix: weight outside [0,1]");
      s += x;
    }
    if (s > 1 + 1e-12) throw InvalidCdf("mix: weights sum above 1");
    auto n = make(CdfKind::Mixture, 0, 0);
    n->parts = std::move(parts);
    n->w = std::move(w);
    return Cdf(n);
  }
  static Cdf pmax(Cdf l, Cdf r) {
    auto n = make(CdfKind::PointwiseMax, 0, 0);
    n->parts = {std::move(l), std::move(r)};
    return Cdf(n);
  }
  static Cdf pmin(Cdf l, Cdf r) {
    auto n = make(CdfKind::PointwiseMin, 0, 0);
    n->parts = {std::move(l), std::move(r)};
    return Cdf(n);
  }

  CdfKind kind() const { return n_->kind; }
  double x() const { return n_->p0; }
  double a() const { return n_->p0; }
  double b() const { return n_->p1; }
  double rate() const { return n_->p0; }
  const std::vector<Cdf>& parts() const { return n_->parts; }
  const std::vector<double>& weights() const { return n_->w; }
  const Cdf& left() const { return n_->parts.at(0); }
  const Cdf& right() const { return n_->parts.at(1); }

  bool is_basic() const {
    return kind() == CdfKind::Dirac || kind() == CdfKind::Uniform ||
           kind() == CdfKind::Exponential;
  }

  friend bool operator==(const Cdf& f, const Cdf& g) {
    if (f.n_ == g.n_) return true;
    if (f.kind() != g.kind() || f.n_->p0 != g.n_->p0 || f.n_->p1 != g.n_->p1 ||
        f.n_->w != g.n_->w || f.parts().size() != g.parts().size())
      return false;
    for (std::size_t i = 0; i < f.parts().size(); ++i)
      if (!(f.parts()[i] == g.parts()[i])) return false;
    return true;
  }

 private:
  struct Node {
    CdfKind kind;
    double p0, p1;
    std::vector<Cdf> parts;
    std::vector<double> w;
  };
  static std::shared_ptr<Node> make(CdfKind k, double p0, double p1) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->p0 = p0;
    n->p1 = p1;
    return n;
  }
  explicit Cdf(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  std::shared_ptr<const Node> n_;
};

// ---------------------------------------------------------------------------
// Printing and parsing

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  std::string s = os.str();
  // prefer the shortest representation that round-trips
  for (int p = 1; p <= 17; ++p) {
    std::ostringstream o2;
    o2.precision(p);
    o2 << v;
    if (std::stod(o2.str()) == v) return o2.str();
  }
  return s;
}

inline std::string to_string(const Cdf& f) {
  switch (f.kind()) {
    case CdfKind::Dirac:
      return "dirac(" + fmt_num(f.x()) + ")";
    case CdfKind::Uniform:
      return "unif(" + fmt_num(f.a()) + "," + fmt_num(f.b()) + ")";
    case CdfKind::Exponential:
      return "exp(" + fmt_num(f.rate()) + ")";
    case CdfKind::Convolution: {
      std::string s = "conv(";
      for (std::size_t i = 0; i < f.parts().size(); ++i)
        s += (i ? "," : "") + to_string(f.parts()[i]);
      return s + ")";
    }
    case CdfKind::Mixture: {
      std::string s = "mix(";
      for (std::size_t i = 0; i < f.parts().size(); ++i)
        s += (i ? "," : "") + fmt_num(f.weights()[i]) + ":" + to_string(f.parts()[i]);
      return s + ")";
    }
    case CdfKind::PointwiseMax:
      return "max(" + to_string(f.left()) + "," + to_string(f.right()) + ")";
    case CdfKind::PointwiseMin:
      return "min(" + to_string(f.left()) + "," + to_string(f.right()) + ")";
  }
  return "?";
}

namespace detail {

inline double cdf_number(TokenCursor& c) {
  const Token& t = c.peek();
  if (t.kind != Token::Number)
    throw SyntaxError("expected number but found '" + TokenCursor::describe(t) + "'",
                      t.pos);
  std::size_t pos = t.pos;
  std::string text = c.next().text;
  try {
    if (text.find('/') != std::string::npos) return to_double(parse_rational(text));
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw SyntaxError("bad number '" + text + "'", pos);
    return v;
  } catch (const std::logic_error&) {
    throw SyntaxError("bad number '" + text + "'", pos);
  }
}

inline Cdf parse_cdf_expr(TokenCursor& c) {
  const Token& head = c.peek();
  if (head.kind != Token::Ident)
    throw SyntaxError("expected cdf constructor", head.pos);
  std::size_t pos = head.pos;
  std::string name = c.next().text;
  c.expect_sym('(');
  try {
    if (name == "dirac") {
      double x = cdf_number(c);
      c.expect_sym(')');
      return Cdf::dirac(x);
    }
    if (name == "unif") {
      double a = cdf_number(c);
      c.expect_sym(',');
      double b = cdf_number(c);
      c.expect_sym(')');
      return Cdf::uniform(a, b);
    }
    if (name == "exp") {
      double r = cdf_number(c);
      c.expect_sym(')');
      return Cdf::exponential(r);
    }
    if (name == "conv") {
      std::vector<Cdf> parts{parse_cdf_expr(c)};
      while (c.accept_sym(',')) parts.push_back(parse_cdf_expr(c));
      c.expect_sym(')');
      return Cdf::convolution(std::move(parts));
    }
    if (name == "mix") {
      std::vector<double> w;
      std::vector<Cdf> parts;
      do {
        w.push_back(cdf_number(c));
        c.expect_sym(':');
        parts.push_back(parse_cdf_expr(c));
      } while (c.accept_sym(','));
      c.expect_sym(')');
      return Cdf::mixture(std::move(w), std::move(parts));
    }
    if (name == "max" || name == "min") {
      Cdf l = parse_cdf_expr(c);
      c.expect_sym(',');
      Cdf r = parse_cdf_expr(c);
      c.expect_sym(')');
      return name == "max" ? Cdf::pmax(l, r) : Cdf::pmin(l, r);
    }
  } catch (const InvalidCdf& e) {
    throw SyntaxError(e.what(), pos);
  }
  throw SyntaxError("unknown cdf constructor '" + name + "'", pos);
}

}  // namespace detail

inline Cdf parse_cdf(std::string_view text) {
  TokenCursor c(text);
  Cdf f = detail::parse_cdf_expr(c);
  c.expect_end();
  return f;
}

// ---------------------------------------------------------------------------
// Structural helpers

inline double limit(const Cdf& f) {
  switch (f.kind()) {
    case CdfKind::Dirac:
    case CdfKind::Uniform:
    case CdfKind::Exponential:
      return 1.0;
    case CdfKind::Convolution: {
      double p = 1;
      for (const auto& g : f.parts()) p *= limit(g);
      return p;
    }
    case CdfKind::Mixture: {
      double s = 0;
      for (std::size_t i = 0; i < f.parts().size(); ++i)
        s += f.weights()[i] * limit(f.parts()[i]);
      return std::min(1.0, s);
    }
    case CdfKind::PointwiseMax:
      return std::max(limit(f.left()), limit(f.right()));
    case CdfKind::PointwiseMin:
      return std::min(limit(f.left()), limit(f.right()));
  }
  return 1.0;
}

inline double quantile(const Cdf& f, double p);

// sup{t : F(t) = 0}
inline double support_lo(const Cdf& f) {
  switch (f.kind()) {
    case CdfKind::Dirac:
      return f.x();
    case CdfKind::Uniform:
      return f.a();
    case CdfKind::Exponential:
      return 0;
    case CdfKind::Convolution: {
      double s = 0;
      for (const auto& g : f.parts()) s += support_lo(g);
      return s;
    }
    case CdfKind::Mixture: {
      double m = kInf;
      for (std::size_t i = 0; i < f.parts().size(); ++i)
        if (f.weights()[i] > 0) m = std::min(m, support_lo(f.parts()[i]));
      return m;
    }
    case CdfKind::PointwiseMax:
      return std::min(support_lo(f.left()), support_lo(f.right()));
    case CdfKind::PointwiseMin:
      return std::max(support_lo(f.left()), support_lo(f.right()));
  }
  return 0;
}

// inf{t : F(t) = lim F}; an upper bound for PointwiseMin.
inline double support_hi(const Cdf& f) {
  switch (f.kind()) {
    case CdfKind::Dirac:
      return f.x();
    case CdfKind::Uniform:
      return f.b();
    case CdfKind::Exponential:
      return kInf;
    case CdfKind::Convolution: {
      double s = 0;
      for (const auto& g : f.parts()) s += support_hi(g);
      return s;
    }
    case CdfKind::Mixture: {
      double m = 0;
      for (std::size_t i = 0; i < f.parts().size(); ++i)
        if (f.weights()[i] > 0) m = std::max(m, support_hi(f.parts()[i]));
      return m;
    }
    case CdfKind::PointwiseMax: {
      double ll = limit(f.left()), lr = limit(f.right());
      if (ll > lr) return support_hi(f.left());
      if (lr > ll) return support_hi(f.right());
      return std::min(support_hi(f.left()), support_hi(f.right()));
    }
    case CdfKind::PointwiseMin: {
      double ll = limit(f.left()), lr = limit(f.right());
      if (ll == lr) return std::max(support_hi(f.left()), support_hi(f.right()));
      const Cdf& low = ll < lr ? f.left() : f.right();
      const Cdf& high = ll < lr ? f.right() : f.left();
      return std::max(support_hi(low), quantile(high, std::min(ll, lr)));
    }
  }
  return kInf;
}

namespace detail {

struct Flat {
  double shift = 0;
  std::vector<Cdf> parts;  // no Dirac, no Convolution
};

// pointwise max/min of two exponentials is again exponential
inline Cdf simplify_exp_pair(const Cdf& f) {
  if ((f.kind() == CdfKind::PointwiseMax || f.kind() == CdfKind::PointwiseMin)) {
    Cdf l = simplify_exp_pair(f.left());
    Cdf r = simplify_exp_pair(f.right());
    if (l.kind() == CdfKind::Exponential && r.kind() == CdfKind::Exponential) {
      return Cdf::exponential(f.kind() == CdfKind::PointwiseMax
                                  ? std::max(l.rate(), r.rate())
                                  : std::min(l.rate(), r.rate()));
    }
  }
  if (f.kind() == CdfKind::Mixture && f.parts().size() == 1 && f.weights()[0] == 1.0)
    return simplify_exp_pair(f.parts()[0]);
  return f;
}

inline void flatten_into(const Cdf& f, Flat& out) {
  Cdf g = simplify_exp_pair(f);
  if (g.kind() == CdfKind::Dirac) {
    out.shift += g.x();
  } else if (g.kind() == CdfKind::Convolution) {
    for (const auto& p : g.parts()) flatten_into(p, out);
  } else {
    out.parts.push_back(g);
  }
}

inline Flat flatten(const Cdf& f) {
  Flat fl;
  flatten_into(f, fl);
  return fl;
}

inline double log_poisson(double x, long k) {
  if (x == 0) return k == 0 ? 0.0 : -kInf;
  return -x + static_cast<double>(k) * std::log(x) - std::lgamma(static_cast<double>(k) + 1);
}

// CDF at t of a sum of independent exponentials with the given rates.
inline double phase_type_cdf(const std::vector<double>& rates, double t) {
  if (t <= 0) return 0;
  const std::size_t n = rates.size();
  if (n == 1) return -std::expm1(-rates[0] * t);
  bool all_equal = true;
  for (double r : rates) all_equal = all_equal && r == rates[0];
  if (all_equal) return boost::math::gamma_p(static_cast<double>(n), rates[0] * t);
  std::vector<double> rs = rates;
  std::sort(rs.begin(), rs.end());
  bool separated = n <= 10;
  for (std::size_t i = 1; i < n && separated; ++i)
    separated = (rs[i] - rs[i - 1]) > 1e-3 * rs[i];
  if (separated) {
    // hypoexponential closed form for pairwise distinct rates
    double surv = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double coef = 1;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) coef *= rs[j] / (rs[j] - rs[i]);
      surv += coef * std::exp(-rs[i] * t);
    }
    double v = 1 - surv;
    if (v > 1e-6 || rs[0] * t > 1e-2) return std::clamp(v, 0.0, 1.0);
    // small t: cancellation, fall through to the series form
  }
  // uniformisation of the phase chain; all terms nonnegative
  const double lam = rs.back();
  const double x = lam * t;
  std::vector<double> v(n + 1, 0.0);
  v[0] = 1;
  const long kmax = static_cast<long>(x + 12 * std::sqrt(x) + 40);
  double acc = 0;
  for (long k = 0; k <= kmax; ++k) {
    if (k > 0) {
      std::vector<double> nv(n + 1, 0.0);
      nv[n] = v[n];
      for (std::size_t i = 0; i < n; ++i) {
        double adv = rates[i] / lam;
        nv[i] += v[i] * (1 - adv);
        nv[i + 1] += v[i] * adv;
      }
      v.swap(nv);
    }
    double alive = 0;
    for (std::size_t i = 0; i < n; ++i) alive += v[i];
    if (alive <= 1e-17) {
      // absorbed: the remaining terms sum to P(Poisson(x) >= k)
      acc += k == 0 ? 1.0 : boost::math::gamma_p(static_cast<double>(k), x);
      break;
    }
    if (v[n] > 0) acc += std::exp(log_poisson(x, k)) * v[n];
  }
  return std::clamp(acc, 0.0, 1.0);
}

}  // namespace detail

inline double eval(const Cdf& f, double t);

inline std::vector<std::pair<double, double>> atoms(const Cdf& f);

inline double atom_mass_at(const Cdf& f, double t) {
  double m = 0;
  for (auto [x, w] : atoms(f))
    if (std::abs(x - t) <= 1e-12 * std::max(1.0, std::abs(t))) m += w;
  return m;
}

// P(X < t)
inline double eval_left(const Cdf& f, double t) {
  return std::max(0.0, eval(f, t) - atom_mass_at(f, t));
}

inline std::vector<std::pair<double, double>> atoms(const Cdf& f) {
  using V = std::vector<std::pair<double, double>>;
  switch (f.kind()) {
    case CdfKind::Dirac:
      return {{f.x(), 1.0}};
    case CdfKind::Uniform:
    case CdfKind::Exponential:
      return {};
    case CdfKind::Mixture: {
      V out;
      for (std::size_t i = 0; i < f.parts().size(); ++i)
        for (auto [x, w] : atoms(f.parts()[i])) out.push_back({x, w * f.weights()[i]});
      return out;
    }
    case CdfKind::Convolution: {
      V acc{{0.0, 1.0}};
      for (const auto& p : f.parts()) {
        V a = atoms(p);
        if (a.empty()) return {};
        V next;
        for (auto [x, w] : acc)
          for (auto [y, u] : a) next.push_back({x + y, w * u});
        if (next.size() > 4096) throw UnsupportedShape("too many atoms in convolution");
        acc.swap(next);
      }
      return acc;
    }
    case CdfKind::PointwiseMax:
    case CdfKind::PointwiseMin: {
      V cand = atoms(f.left());
      for (auto p : atoms(f.right())) cand.push_back(p);
      V out;
      for (auto [x, w] : cand) {
        (void)w;
        bool seen = false;
        for (auto& o : out) seen = seen || o.first == x;
        if (seen) continue;
        double hl = eval(f.left(), x), hr = eval(f.right(), x);
        double ll = std::max(0.0, hl - atom_mass_at(f.left(), x));
        double lr = std::max(0.0, hr - atom_mass_at(f.right(), x));
        double jump = f.kind() == CdfKind::PointwiseMax
                          ? std::max(hl, hr) - std::max(ll, lr)
                          : std::min(hl, hr) - std::min(ll, lr);
        if (jump > 1e-15) out.push_back({x, jump});
      }
      return out;
    }
  }
  return {};
}

// Density of the absolutely continuous part.
inline double cont_density(const Cdf& f, double t) {
  switch (f.kind()) {
    case CdfKind::Dirac:
      return 0;
    case CdfKind::Uniform:
      return (t > f.a() && t < f.b()) ? 1.0 / (f.b() - f.a()) : 0.0;
    case CdfKind::Exponential:
      return t < 0 ? 0.0 : f.rate() * std::exp(-f.rate() * t);
    case CdfKind::Mixture: {
      double s = 0;
      for (std::size_t i = 0; i < f.parts().size(); ++i)
        s += f.weights()[i] * cont_density(f.parts()[i], t);
      return s;
    }
    case CdfKind::PointwiseMax:
    case CdfKind::PointwiseMin: {
      double l = eval(f.left(), t), r = eval(f.right(), t);
      double dl = cont_density(f.left(), t), dr = cont_density(f.right(), t);
      bool is_max = f.kind() == CdfKind::PointwiseMax;
      if (std::abs(l - r) <= 1e-15) return is_max ? std::max(dl, dr) : std::min(dl, dr);
      return ((l > r) == is_max) ? dl : dr;
    }
    case CdfKind::Convolution: {
      double h = 1e-6 * std::max(1.0, t);
      double lo = std::max(0.0, t - h);
      return (eval(f, t + h) - eval(f, lo)) / (t + h - lo);
    }
  }
  return 0;
}

namespace detail {

inline double conv_numeric(const std::vector<Cdf>& parts, double t);

// Adaptive Gauss-Kronrod with an absolute error target. Boost's own driver
// uses a relative target, which never converges for integrals near 1e-20.
template <class F>
double integrate_abs(F& f, double a, double b, double abs_tol, int depth) {
  double err = 0;
  double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0,
                                                                           &err);
  if (err <= abs_tol || depth == 0) return v;
  double m = 0.5 * (a + b);
  return integrate_abs(f, a, m, 0.5 * abs_tol, depth - 1) +
         integrate_abs(f, m, b, 0.5 * abs_tol, depth - 1);
}

// (A * B)(t) with B a non-convolution part.
inline double conv_pair(const std::vector<Cdf>& rest, const Cdf& b, double t) {
  if (t < 0) return 0;
  auto evalA = [&](double u) -> double {
    if (u < 0) return 0;
    if (rest.size() == 1) return eval(rest[0], u);
    return conv_numeric(rest, u);
  };
  if (b.kind() == CdfKind::Mixture) {
    double s = 0;
    for (std::size_t i = 0; i < b.parts().size(); ++i) {
      if (b.weights()[i] == 0) continue;
      std::vector<Cdf> ps = rest;
      ps.push_back(b.parts()[i]);
      s += b.weights()[i] * eval(Cdf::convolution(ps), t);
    }
    return s;
  }
  double total = 0;
  for (auto [x, m] : atoms(b))
    if (x <= t) total += m * evalA(t - x);
  double lo = support_lo(b);
  double hi = std::min(t, support_hi(b));
  if (hi <= lo) return std::clamp(total, 0.0, 1.0);
  // breakpoints: where A(t - s) jumps or kinks, and where B's density jumps
  std::vector<double> cuts{lo, hi};
  Cdf a = rest.size() == 1 ? rest[0] : Cdf::convolution(rest);
  for (auto [x, m] : atoms(a)) cuts.push_back(t - x);
  cuts.push_back(t - support_lo(a));
  cuts.push_back(t - support_hi(a));
  std::vector<Cdf> stack{b};
  while (!stack.empty()) {
    Cdf c = stack.back();
    stack.pop_back();
    cuts.push_back(support_lo(c));
    if (std::isfinite(support_hi(c))) cuts.push_back(support_hi(c));
    for (const auto& p : c.parts()) stack.push_back(p);
  }
  std::vector<double> pts;
  for (double c : cuts)
    if (std::isfinite(c) && c >= lo && c <= hi) pts.push_back(c);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  auto integrand = [&](double s) { return evalA(t - s) * cont_density(b, s); };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i + 1] - pts[i] <= 0) continue;
    total += integrate_abs(integrand, pts[i], pts[i + 1], 1e-14, 12);
  }
  return std::clamp(total, 0.0, 1.0);
}

inline double conv_numeric(const std::vector<Cdf>& parts, double t) {
  // pick the part with the simplest measure as the integrator
  auto rank = [](const Cdf& c) {
    switch (c.kind()) {
      case CdfKind::Uniform: return 0;
      case CdfKind::Exponential: return 1;
      case CdfKind::Mixture: return 2;
      default: return 3;
    }
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < parts.size(); ++i)
    if (rank(parts[i]) < rank(parts[best])) best = i;
  std::vector<Cdf> rest;
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (i != best) rest.push_back(parts[i]);
  return conv_pair(rest, parts[best], t);
}

}  // namespace detail

inline double eval(const Cdf& f, double t) {
  if (t < 0) return 0;
  switch (f.kind()) {
    case CdfKind::Dirac:
      return t >= f.x() ? 1.0 : 0.0;
    case CdfKind::Uniform:
      if (t <= f.a()) return 0;
      if (t >= f.b()) return 1;
      return (t - f.a()) / (f.b() - f.a());
    case CdfKind::Exponential:
      return -std::expm1(-f.rate() * t);
    case CdfKind::Mixture: {
      double s = 0;
      for (std::size_t i = 0; i < f.parts().size(); ++i)
        s += f.weights()[i] * eval(f.parts()[i], t);
      return std::clamp(s, 0.0, 1.0);
    }
    case CdfKind::PointwiseMax:
      return std::max(eval(f.left(), t), eval(f.right(), t));
    case CdfKind::PointwiseMin:
      return std::min(eval(f.left(), t), eval(f.right(), t));
    case CdfKind::Convolution: {
      detail::Flat fl = detail::flatten(f);
      double u = t - fl.shift;
      if (u < -1e-15 * std::max(1.0, t)) return 0;
      u = std::max(u, 0.0);
      if (fl.parts.empty()) return 1;
      if (fl.parts.size() == 1) return eval(fl.parts[0], u);
      bool all_exp = true;
      for (const auto& p : fl.parts) all_exp = all_exp && p.kind() == CdfKind::Exponential;
      if (all_exp) {
        std::vector<double> rates;
        for (const auto& p : fl.parts) rates.push_back(p.rate());
        return detail::phase_type_cdf(rates, u);
      }
      return detail::conv_numeric(fl.parts, u);
    }
  }
  return 0;
}

// inf{t : F(t) >= p} for p in (0, 1]; infinity when never reached.
inline double quantile(const Cdf& f, double p) {
  if (p <= 0) return support_lo(f);
  switch (f.kind()) {
    case CdfKind::Dirac:
      return p <= 1 ? f.x() : kInf;
    case CdfKind::Uniform:
      return p <= 1 ? f.a() + p * (f.b() - f.a()) : kInf;
    case CdfKind::Exponential:
      return p < 1 ? -std::log1p(-p) / f.rate() : kInf;
    case CdfKind::PointwiseMax:
      return std::min(quantile(f.left(), p), quantile(f.right(), p));
    case CdfKind::PointwiseMin:
      return std::max(quantile(f.left(), p), quantile(f.right(), p));
    default:
      break;
  }
  if (p > limit(f) * (1 + 1e-15)) return kInf;
  double lo = support_lo(f);
  if (eval(f, lo) >= p) return lo;
  double hi = support_hi(f);
  if (!std::isfinite(hi)) {
    hi = std::max(1.0, 2 * lo);
    int guard = 0;
    while (eval(f, hi) < p) {
      hi *= 2;
      if (++guard > 200) return kInf;
    }
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
    double mid = 0.5 * (lo + hi);
    if (eval(f, mid) >= p)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// F(eps * t) as a CDF in t (X / eps in distribution).
inline Cdf scale_time(const Cdf& f, double eps) {
  switch (f.kind()) {
    case CdfKind::Dirac:
      return Cdf::dirac(f.x() / eps);
    case CdfKind::Uniform:
      return Cdf::uniform(f.a() / eps, f.b() / eps);
    case CdfKind::Exponential:
      return Cdf::exponential(f.rate() * eps);
    case CdfKind::Convolution: {
      std::vector<Cdf> ps;
      for (const auto& p : f.parts()) ps.push_back(scale_time(p, eps));
      return Cdf::convolution(ps);
    }
    case CdfKind::Mixture: {
      std::vector<Cdf> ps;
      for (const auto& p : f.parts()) ps.push_back(scale_time(p, eps));
      return Cdf::mixture(f.weights(), ps);
    }
    case CdfKind::PointwiseMax:
      return Cdf::pmax(scale_time(f.left(), eps), scale_time(f.right(), eps));
    case CdfKind::PointwiseMin:
      return Cdf::pmin(scale_time(f.left(), eps), scale_time(f.right(), eps));
  }
  return f;
}

inline Cdf convolve(const Cdf& f, const Cdf& g) {
  if (f.kind() == CdfKind::Dirac && g.kind() == CdfKind::Dirac)
    return Cdf::dirac(f.x() + g.x());
  if (f.kind() == CdfKind::Dirac && f.x() == 0) return g;
  if (g.kind() == CdfKind::Dirac && g.x() == 0) return f;
  std::vector<Cdf> parts;
  auto add = [&](const Cdf& c) {
    if (c.kind() == CdfKind::Convolution)
      parts.insert(parts.end(), c.parts().begin(), c.parts().end());
    else
      parts.push_back(c);
  };
  add(f);
  add(g);
  return Cdf::convolution(parts);
}

inline Cdf convolve_all(const std::vector<Cdf>& fs) {
  if (fs.empty()) return Cdf::dirac(0);
  Cdf acc = fs[0];
  for (std::size_t i = 1; i < fs.size(); ++i) acc = convolve(acc, fs[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// Residence-time composition

enum class CompositionKind { MaxCdf, MinCdf, ProductRate, MinRate, MaxRate };

inline std::string to_string(CompositionKind k) {
  switch (k) {
    case CompositionKind::MaxCdf: return "max";
    case CompositionKind::MinCdf: return "min";
    case CompositionKind::ProductRate: return "product";
    case CompositionKind::MinRate: return "min-rate";
    case CompositionKind::MaxRate: return "max-rate";
  }
  return "?";
}

inline CompositionKind parse_composition_kind(const std::string& s) {
  if (s == "max" || s == "max-cdf") return CompositionKind::MaxCdf;
  if (s == "min" || s == "min-cdf") return CompositionKind::MinCdf;
  if (s == "product" || s == "product-rate") return CompositionKind::ProductRate;
  if (s == "min-rate") return CompositionKind::MinRate;
  if (s == "max-rate") return CompositionKind::MaxRate;
  throw Error("InputError", "unknown composition kind '" + s + "'");
}

inline Cdf compose_cdf(CompositionKind k, const Cdf& f, const Cdf& g) {
  switch (k) {
    case CompositionKind::MaxCdf:
      return Cdf::pmax(f, g);
    case CompositionKind::MinCdf:
      return Cdf::pmin(f, g);
    default:
      break;
  }
  if (f.kind() != CdfKind::Exponential || g.kind() != CdfKind::Exponential)
    throw RateCompositionOnNonExponential("rate composition of " + to_string(f) +
                                          " and " + to_string(g));
  switch (k) {
    case CompositionKind::ProductRate:
      return Cdf::exponential(f.rate() * g.rate());
    case CompositionKind::MinRate:
      return Cdf::exponential(std::min(f.rate(), g.rate()));
    default:
      return Cdf::exponential(std::max(f.rate(), g.rate()));
  }
}

// ---------------------------------------------------------------------------
// Grid comparisons

struct GridSpec {
  int points = 2048;
  double tol = 1e-9;
  double tail_q = 1e-6;
  double abs_floor = 1e-15;

  // STOCHPRE_GRID_POINTS overrides the default resolution.
  static GridSpec from_env() {
    GridSpec g;
    if (const char* s = std::getenv("STOCHPRE_GRID_POINTS")) {
      int v = std::atoi(s);
      if (v >= 16) g.points = v;
    }
    return g;
  }
};

namespace detail {

inline std::vector<double> log_grid(double T, int points) {
  std::vector<double> ts;
  if (!(T > 0) || !std::isfinite(T)) return ts;
  const double lo = T * 1e-12;
  const double step = std::log(T / lo) / (points - 1);
  for (int i = 0; i < points; ++i) ts.push_back(lo * std::exp(step * i));
  ts.back() = T;
  return ts;
}

inline void add_around(std::vector<double>& ts, double x) {
  if (!(x > 0) || !std::isfinite(x)) return;
  ts.push_back(x * (1 - 1e-9));
  ts.push_back(x);
  ts.push_back(x * (1 + 1e-9));
}

inline void add_breakpoints(std::vector<double>& ts, const Cdf& f, double scale) {
  std::vector<Cdf> stack{f};
  while (!stack.empty()) {
    Cdf c = stack.back();
    stack.pop_back();
    add_around(ts, support_lo(c) / scale);
    add_around(ts, support_hi(c) / scale);
    if (c.kind() == CdfKind::Dirac) add_around(ts, c.x() / scale);
    for (const auto& p : c.parts()) stack.push_back(p);
  }
}

// Smallest value of margin(t) / ref(t) over the sample points, with local
// refinement around the worst samples. `margin` must be ~0 where ref is 0.
template <class Margin, class Ref>
double min_relative_margin(std::vector<double> ts, Margin margin, Ref ref) {
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  double worst = kInf;
  auto rel = [&](double t) {
    double r = ref(t);
    if (r <= 0) return margin(t) >= 0 ? kInf : -kInf;
    return margin(t) / r;
  };
  std::vector<double> v(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    v[i] = rel(ts[i]);
    worst = std::min(worst, v[i]);
  }
  // refine every discrete local minimum, smallest first
  std::vector<std::pair<double, std::size_t>> mins;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    bool left = i == 0 || v[i] <= v[i - 1];
    bool right = i + 1 == ts.size() || v[i] <= v[i + 1];
    bool flat = i > 0 && i + 1 < ts.size() && v[i] == v[i - 1] && v[i] == v[i + 1];
    if (left && right && !flat && std::isfinite(v[i])) mins.push_back({v[i], i});
  }
  std::sort(mins.begin(), mins.end());
  if (mins.size() > 64) mins.resize(64);
  for (auto [val, i] : mins) {
    double a = ts[i > 0 ? i - 1 : i], b = ts[i + 1 < ts.size() ? i + 1 : i];
    if (b <= a) continue;
    auto obj = [&](double t) {
      double r = rel(t);
      return std::isfinite(r) ? r : (r > 0 ? 1e300 : -1e300);
    };
    std::uintmax_t it = 200;
    auto r = boost::math::tools::brent_find_minima(obj, a, b, 52, it);
    worst = std::min(worst, r.second);
  }
  return worst;
}

}  // namespace detail

// lim/zero/support tests that rule out every acceleration factor.
inline bool no_acceleration_possible(const Cdf& f, const Cdf& g) {
  double f0 = eval(f, 0), g0 = eval(g, 0);
  if (f0 < g0 - 1e-15) return true;
  double lf = limit(f), lg = limit(g);
  if (lf < lg - 1e-15) return true;
  if (std::isfinite(support_hi(g)) && !std::isfinite(support_hi(f)) && lf <= lg + 1e-15 &&
      lg > 0)
    return true;
  // G(t) > 0 for every t > 0 while F stays at 0 near the origin
  if (support_lo(f) > 0 && support_lo(g) == 0 && lg > 0) return true;
  return false;
}

// F(eps t) >= G(t) for all t, checked on the grid plus the exact tests above.
inline bool eps_faster_grid(const Cdf& f, const Cdf& g, double eps,
                            const GridSpec& grid = GridSpec::from_env()) {
  if (no_acceleration_possible(f, g)) return false;
  double lg = limit(g);
  if (lg <= 0) return true;
  double T = support_hi(g);
  if (!std::isfinite(T)) T = quantile(g, lg * (1 - grid.tail_q));
  if (!(T > 0)) T = std::max(support_lo(f) / eps, 1.0);
  std::vector<double> ts = detail::log_grid(T, grid.points);
  detail::add_breakpoints(ts, g, 1.0);
  detail::add_breakpoints(ts, f, eps);
  for (int k = 1; k <= 40; ++k) ts.push_back(T * std::pow(2.0, k));
  auto margin = [&](double t) { return eval(f, eps * t) - eval(g, t) + grid.abs_floor; };
  auto ref = [&](double t) { return eval(g, t); };
  return detail::min_relative_margin(ts, margin, ref) >= -grid.tol;
}

// a * F(t) >= b * G(t) for all t >= 0 (grid plus exact limits and t = 0).
inline bool dominates_scaled(double a, const Cdf& f, double b, const Cdf& g,
                             const GridSpec& grid = GridSpec::from_env()) {
  if (b <= 0) return true;
  double lf = a * limit(f), lg = b * limit(g);
  if (lg <= 0) return true;
  if (lf < lg * (1 - grid.tol)) return false;
  if (a * eval(f, 0) < b * eval(g, 0) * (1 - grid.tol)) return false;
  double T = support_hi(g);
  if (!std::isfinite(T)) T = quantile(g, limit(g) * (1 - grid.tail_q));
  if (!(T > 0)) T = 1.0;
  std::vector<double> ts = detail::log_grid(T, grid.points);
  detail::add_breakpoints(ts, g, 1.0);
  detail::add_breakpoints(ts, f, 1.0);
  for (int k = 1; k <= 40; ++k) ts.push_back(T * std::pow(2.0, k));
  auto margin = [&](double t) { return a * eval(f, t) - b * eval(g, t) + grid.abs_floor; };
  auto ref = [&](double t) { return b * eval(g, t); };
  return detail::min_relative_margin(ts, margin, ref) >= -grid.tol;
}

// ---------------------------------------------------------------------------
// Least acceleration factors

namespace detail {

inline void require_basic(const Cdf& f) {
  if (!f.is_basic())
    throw UnsupportedShape("closed form needs dirac/unif/exp, got " + to_string(f));
}

// Quantile components of F: F itself or both sides of a PointwiseMax.
inline std::vector<Cdf> quantile_components(const Cdf& f) {
  if (f.kind() == CdfKind::PointwiseMax) {
    require_basic(f.left());
    require_basic(f.right());
    return {f.left(), f.right()};
  }
  require_basic(f);
  return {f};
}

inline double qmin(const std::vector<Cdf>& cs, double p) {
  double q = kInf;
  for (const auto& c : cs) q = std::min(q, quantile(c, p));
  return q;
}

// lim_{p->0} Q(p) / p over the components that start at 0.
inline double qslope(const std::vector<Cdf>& cs) {
  double s = kInf;
  for (const auto& c : cs) {
    if (support_lo(c) > 0) continue;
    switch (c.kind()) {
      case CdfKind::Dirac: s = std::min(s, 0.0); break;
      case CdfKind::Uniform: s = std::min(s, c.b()); break;
      case CdfKind::Exponential: s = std::min(s, 1.0 / c.rate()); break;
      default: break;
    }
  }
  return s;
}

// p in (0,1) where the two component quantiles cross.
inline std::vector<double> quantile_crossings(const Cdf& c1, const Cdf& c2) {
  auto d = [&](double p) { return quantile(c1, p) - quantile(c2, p); };
  std::vector<double> ps;
  const int n = 4096;
  for (int i = 1; i < n; ++i) ps.push_back(static_cast<double>(i) / n);
  for (int k = 13; k <= 50; ++k) ps.push_back(1 - std::ldexp(1.0, -k));
  for (int k = 13; k <= 50; ++k) ps.push_back(std::ldexp(1.0, -k));
  std::sort(ps.begin(), ps.end());
  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < ps.size(); ++i) {
    double da = d(ps[i]), db = d(ps[i + 1]);
    if (da == 0) {
      roots.push_back(ps[i]);
      continue;
    }
    if ((da < 0) != (db < 0) && db != 0) {
      std::uintmax_t it = 200;
      auto tol = boost::math::tools::eps_tolerance<double>(52);
      auto r = boost::math::tools::toms748_solve(d, ps[i], ps[i + 1], da, db, tol, it);
      roots.push_back(0.5 * (r.first + r.second));
    }
  }
  return roots;
}

inline double least_acceleration_basic_g(const Cdf& f, const Cdf& g) {
  std::vector<Cdf> cs = quantile_components(f);
  require_basic(g);
  if (eval(f, 0) < eval(g, 0)) return kInf;
  double lo_f = kInf;
  for (const auto& c : cs) lo_f = std::min(lo_f, support_lo(c));
  std::vector<double> cross;
  if (cs.size() == 2) cross = quantile_crossings(cs[0], cs[1]);
  double best = 0;
  auto take = [&](double v) { best = std::max(best, v); };
  switch (g.kind()) {
    case CdfKind::Dirac: {
      if (g.x() == 0) return qmin(cs, 1.0) == 0 ? 0.0 : kInf;
      take(qmin(cs, 1.0) / g.x());
      break;
    }
    case CdfKind::Uniform: {
      const double c = g.a(), dd = g.b();
      if (c > 0) {
        take(lo_f / c);
      } else {
        if (lo_f > 0) return kInf;
        take(qslope(cs) / dd);
      }
      take(qmin(cs, 1.0) / dd);
      for (double p : cross) {
        double t = c + p * (dd - c);
        if (t > 0) take(qmin(cs, p) / t);
      }
      break;
    }
    case CdfKind::Exponential: {
      const double th = g.rate();
      if (lo_f > 0) return kInf;
      take(th * qslope(cs));
      double tail = kInf;
      for (const auto& cc : cs)
        tail = std::min(tail, cc.kind() == CdfKind::Exponential ? th / cc.rate() : 0.0);
      take(tail);
      for (double p : cross) {
        double t = -std::log1p(-p) / th;
        if (t > 0) take(qmin(cs, p) / t);
      }
      break;
    }
    default:
      break;
  }
  return best;
}

}  // namespace detail

// Least eps > 0 with F(eps t) >= G(t) for all t (the infimum; 0 when every
// eps works). F, G are dirac/unif/exp or a PointwiseMax of two such.
inline double least_acceleration(const Cdf& f, const Cdf& g) {
  if (g.kind() == CdfKind::PointwiseMax) {
    return std::max(least_acceleration(f, g.left()), least_acceleration(f, g.right()));
  }
  return detail::least_acceleration_basic_g(f, g);
}

// Bisection on eps_faster_grid; the infinite case is decided by the exact
// limit/support tests, never by the grid.
inline double least_acceleration_numeric(const Cdf& f, const Cdf& g,
                                         const GridSpec& grid = GridSpec::from_env()) {
  if (no_acceleration_possible(f, g)) return kInf;
  auto ok = [&](double e) { return eps_faster_grid(f, g, e, grid); };
  double hi = 1;
  int guard = 0;
  while (!ok(hi)) {
    hi *= 2;
    if (++guard > 80) return kInf;
  }
  double lo = hi / 2;
  guard = 0;
  while (ok(lo)) {
    hi = lo;
    lo /= 2;
    if (++guard > 45) return 0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    if (ok(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// max(1, least acceleration); uses the numeric oracle outside the closed-form
// family when `numeric_fallback` is set.
inline double c_clamped(const Cdf& f, const Cdf& g, bool numeric_fallback = true,
                        const GridSpec& grid = GridSpec::from_env()) {
  double v;
  try {
    v = least_acceleration(f, g);
  } catch (const UnsupportedShape&) {
    if (!numeric_fallback) throw;
    v = least_acceleration_numeric(f, g, grid);
  }
  return std::max(1.0, v);
}

inline bool eps_faster(const Cdf& f, const Cdf& g, double eps,
                       const GridSpec& grid = GridSpec::from_env()) {
  try {
    double v = least_acceleration(f, g);
    return eps >= v * (1 - 1e-12);
  } catch (const UnsupportedShape&) {
    return eps_faster_grid(f, g, eps, grid);
  }
}

}  // namespace stochpre
