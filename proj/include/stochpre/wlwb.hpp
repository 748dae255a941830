#pragma once

#include <algorithm>
#include <bit>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "lexer.hpp"
#include "rational.hpp"

namespace stochpre {

// ---------------------------------------------------------------------------
// Weighted transition systems

struct WtsEdge {
  int src;
  Rational w;
  int dst;
};

class Wts {
 public:
  int add_state(const std::string& name, std::set<std::string> labels = {}) {
    if (index_.count(name)) throw ModelError("duplicate state '" + name + "'");
    index_[name] = static_cast<int>(names_.size());
    names_.push_back(name);
    labels_.push_back(std::move(labels));
    out_.emplace_back();
    return static_cast<int>(names_.size()) - 1;
  }
  // Transitions form a set: re-adding (src, w, dst) is a no-op.
  void add_trans(int src, const Rational& w, int dst) {
    check(src);
    check(dst);
    if (w < 0) throw ModelError("negative weight");
    for (int e : out_[src])
      if (edges_[e].dst == dst && edges_[e].w == w) return;
    out_[src].push_back(static_cast<int>(edges_.size()));
    edges_.push_back({src, w, dst});
  }
  void add_trans(const std::string& s, const Rational& w, const std::string& t) {
    add_trans(index(s), w, index(t));
  }

  int size() const { return static_cast<int>(names_.size()); }
  int index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UnknownState("unknown state '" + name + "'");
    return it->second;
  }
  const std::string& name(int s) const { return names_.at(s); }
  const std::set<std::string>& labels(int s) const { return labels_.at(s); }
  const std::vector<WtsEdge>& edges() const { return edges_; }
  std::vector<WtsEdge> out(int s) const {
    std::vector<WtsEdge> r;
    for (int e : out_.at(s)) r.push_back(edges_[e]);
    return r;
  }
  std::set<std::string> propositions() const {
    std::set<std::string> ps;
    for (const auto& l : labels_) ps.insert(l.begin(), l.end());
    return ps;
  }
  std::set<Rational> weights() const {
    std::set<Rational> ws;
    for (const auto& e : edges_) ws.insert(e.w);
    return ws;
  }

 private:
  void check(int s) const {
    if (s < 0 || s >= size()) throw UnknownState("state index out of range");
  }
  std::vector<std::string> names_;
  std::vector<std::set<std::string>> labels_;
  std::vector<std::vector<int>> out_;
  std::vector<WtsEdge> edges_;
  std::map<std::string, int> index_;
};

namespace detail {

inline std::string strip_comment(const std::string& line) {
  auto h = line.find('#');
  return h == std::string::npos ? line : line.substr(0, h);
}

inline std::set<std::string> parse_label_set(const std::string& text, std::size_t line) {
  std::string t = text;
  t.erase(std::remove_if(t.begin(), t.end(), ::isspace), t.end());
  if (t.size() < 2 || t.front() != '{' || t.back() != '}')
    throw SyntaxError("expected label set {p,q,...}", 0, line);
  std::set<std::string> out;
  std::string cur;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    if (t[i] == ',') {
      if (cur.empty()) throw SyntaxError("empty label", i, line);
      out.insert(cur);
      cur.clear();
    } else {
      cur += t[i];
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

}  // namespace detail

// Line format: `wts`, `state <id> {p,...}`, `trans <src> <weight> <dst>`.
inline Wts parse_wts(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  bool header = false;
  Wts m;
  while (std::getline(in, raw)) {
    ++lineno;
    std::istringstream ls(detail::strip_comment(raw));
    std::string kw;
    if (!(ls >> kw)) continue;
    if (!header) {
      if (kw != "wts") throw SyntaxError("expected 'wts' header", 0, lineno);
      header = true;
      continue;
    }
    if (kw == "state") {
      std::string id, rest;
      if (!(ls >> id)) throw SyntaxError("state needs an id", 0, lineno);
      std::getline(ls, rest);
      std::set<std::string> labels;
      if (rest.find_first_not_of(" \t\r") != std::string::npos)
        labels = detail::parse_label_set(rest, lineno);
      try {
        m.add_state(id, labels);
      } catch (const ModelError& e) {
        throw SyntaxError(e.what(), 0, lineno);
      }
    } else if (kw == "trans") {
      std::string s, w, t, extra;
      if (!(ls >> s >> w >> t) || (ls >> extra))
        throw SyntaxError("expected 'trans <src> <weight> <dst>'", 0, lineno);
      Rational r = parse_rational(w);
      if (r < 0) throw SyntaxError("negative weight", 0, lineno);
      m.add_trans(s, r, t);
    } else {
      throw SyntaxError("unknown keyword '" + kw + "'", 0, lineno);
    }
  }
  if (!header) throw SyntaxError("empty model", 0, lineno);
  return m;
}

inline std::string to_text(const Wts& m) {
  std::ostringstream os;
  os << "wts\n";
  for (int s = 0; s < m.size(); ++s) {
    os << "state " << m.name(s) << " {";
    bool first = true;
    for (const auto& p : m.labels(s)) {
      os << (first ? "" : ",") << p;
      first = false;
    }
    os << "}\n";
  }
  for (const auto& e : m.edges())
    os << "trans " << m.name(e.src) << " " << to_string(e.w) << " " << m.name(e.dst) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Formulas

enum class WOp { Top, Atom, Not, And, L, M };

class WFormula {
 public:
  static WFormula top() { return WFormula(make(WOp::Top)); }
  static WFormula bot() { return neg(top()); }
  static WFormula atom(std::string p) {
    auto n = make(WOp::Atom);
    n->name = std::move(p);
    return WFormula(n);
  }
  static WFormula neg(WFormula f) {
    auto n = make(WOp::Not);
    n->kids = {std::move(f)};
    return WFormula(n);
  }
  static WFormula conj(WFormula a, WFormula b) {
    auto n = make(WOp::And);
    n->kids = {std::move(a), std::move(b)};
    return WFormula(n);
  }
  static WFormula disj(WFormula a, WFormula b) { return neg(conj(neg(a), neg(b))); }
  static WFormula implies(WFormula a, WFormula b) { return neg(conj(a, neg(b))); }
  static WFormula L(Rational r, WFormula f) { return modal(WOp::L, std::move(r), std::move(f)); }
  static WFormula M(Rational r, WFormula f) { return modal(WOp::M, std::move(r), std::move(f)); }
  static WFormula diamond(WFormula f) { return L(0, std::move(f)); }

  WOp op() const { return n_->op; }
  const std::string& name() const { return n_->name; }
  const Rational& r() const { return n_->r; }
  const WFormula& arg(std::size_t i = 0) const { return n_->kids.at(i); }
  const void* id() const { return n_.get(); }

  friend bool operator==(const WFormula& a, const WFormula& b) {
    if (a.n_ == b.n_) return true;
    if (a.op() != b.op() || a.n_->name != b.n_->name || a.n_->r != b.n_->r ||
        a.n_->kids.size() != b.n_->kids.size())
      return false;
    for (std::size_t i = 0; i < a.n_->kids.size(); ++i)
      if (!(a.n_->kids[i] == b.n_->kids[i])) return false;
    return true;
  }

 private:
  struct Node {
    WOp op;
    std::string name;
    Rational r;
    std::vector<WFormula> kids;
  };
  static std::shared_ptr<Node> make(WOp op) {
    auto n = std::make_shared<Node>();
    n->op = op;
    return n;
  }
  static WFormula modal(WOp op, Rational r, WFormula f) {
    if (r < 0) throw std::invalid_argument("modal constant must be nonnegative");
    auto n = make(op);
    n->r = std::move(r);
    n->kids = {std::move(f)};
    return WFormula(n);
  }
  explicit WFormula(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  std::shared_ptr<const Node> n_;
};

inline std::string to_string(const WFormula& f) {
  switch (f.op()) {
    case WOp::Top: return "true";
    case WOp::Atom: return f.name();
    case WOp::Not: {
      const WFormula& g = f.arg();
      if (g.op() == WOp::Top) return "false";
      if (g.op() == WOp::And && g.arg(0).op() == WOp::Not && g.arg(1).op() == WOp::Not)
        return "(" + to_string(g.arg(0).arg()) + " | " + to_string(g.arg(1).arg()) + ")";
      return "!" + to_string(g);
    }
    case WOp::And: return "(" + to_string(f.arg(0)) + " & " + to_string(f.arg(1)) + ")";
    case WOp::L: return "L " + to_string(f.r()) + " " + to_string(f.arg());
    case WOp::M: return "M " + to_string(f.r()) + " " + to_string(f.arg());
  }
  return "?";
}

inline int modal_depth(const WFormula& f) {
  switch (f.op()) {
    case WOp::Top:
    case WOp::Atom: return 0;
    case WOp::Not: return modal_depth(f.arg());
    case WOp::And: return std::max(modal_depth(f.arg(0)), modal_depth(f.arg(1)));
    default: return 1 + modal_depth(f.arg());
  }
}

namespace detail {

// precedence ! > L/M > & > |
inline WFormula parse_w_or(TokenCursor& c);

inline WFormula parse_w_unary(TokenCursor& c) {
  const Token& t = c.peek();
  if (t.kind == Token::Sym && t.text == "!") {
    c.next();
    return WFormula::neg(parse_w_unary(c));
  }
  if (t.kind == Token::Sym && t.text == "(") {
    c.next();
    WFormula f = parse_w_or(c);
    c.expect_sym(')');
    return f;
  }
  if (t.kind == Token::Ident) {
    if (t.text == "L" || t.text == "M") {
      bool low = t.text == "L";
      c.next();
      Rational r = c.expect_rational();
      WFormula f = parse_w_unary(c);
      return low ? WFormula::L(r, f) : WFormula::M(r, f);
    }
    std::string n = c.next().text;
    if (n == "true") return WFormula::top();
    if (n == "false") return WFormula::bot();
    return WFormula::atom(n);
  }
  throw SyntaxError("unexpected '" + TokenCursor::describe(t) + "'", t.pos);
}

inline WFormula parse_w_and(TokenCursor& c) {
  WFormula f = parse_w_unary(c);
  while (c.accept_sym('&')) f = WFormula::conj(f, parse_w_unary(c));
  return f;
}

inline WFormula parse_w_or(TokenCursor& c) {
  WFormula f = parse_w_and(c);
  while (c.accept_sym('|')) f = WFormula::disj(f, parse_w_and(c));
  return f;
}

}  // namespace detail

inline WFormula parse_wlwb(std::string_view text) {
  TokenCursor c(text);
  WFormula f = detail::parse_w_or(c);
  c.expect_end();
  return f;
}

// ---------------------------------------------------------------------------
// Semantics

// lower = min, upper = max of the weights from s into T; both absent (read as
// -inf / +inf) when no transition from s reaches T.
struct BoundPair {
  std::optional<Rational> lower;
  std::optional<Rational> upper;
  bool empty() const { return !lower.has_value(); }
  friend bool operator==(const BoundPair&, const BoundPair&) = default;
};

inline std::string to_string(const BoundPair& b) {
  if (b.empty()) return "(-inf, +inf)";
  return "(" + to_string(*b.lower) + ", " + to_string(*b.upper) + ")";
}

inline BoundPair image_bounds(const Wts& m, int s, const std::vector<bool>& T) {
  BoundPair b;
  for (const auto& e : m.out(s)) {
    if (!T.at(e.dst)) continue;
    if (!b.lower || e.w < *b.lower) b.lower = e.w;
    if (!b.upper || e.w > *b.upper) b.upper = e.w;
  }
  return b;
}

inline BoundPair image_bounds(const Wts& m, const std::string& s,
                              const std::set<std::string>& T) {
  std::vector<bool> mask(m.size(), false);
  for (const auto& t : T) mask[m.index(t)] = true;
  return image_bounds(m, m.index(s), mask);
}

// Satisfaction sets of every subformula, bottom-up (one pass over the edges per
// modal subformula).
inline std::vector<bool> sat_set(const Wts& m, const WFormula& f) {
  std::unordered_map<const void*, std::vector<bool>> memo;
  std::function<const std::vector<bool>&(const WFormula&)> go =
      [&](const WFormula& g) -> const std::vector<bool>& {
    auto it = memo.find(g.id());
    if (it != memo.end()) return it->second;
    std::vector<bool> v(m.size(), false);
    switch (g.op()) {
      case WOp::Top: v.assign(m.size(), true); break;
      case WOp::Atom:
        for (int s = 0; s < m.size(); ++s) v[s] = m.labels(s).count(g.name()) > 0;
        break;
      case WOp::Not: {
        const auto& a = go(g.arg());
        for (int s = 0; s < m.size(); ++s) v[s] = !a[s];
        break;
      }
      case WOp::And: {
        std::vector<bool> a = go(g.arg(0));
        const auto& b = go(g.arg(1));
        for (int s = 0; s < m.size(); ++s) v[s] = a[s] && b[s];
        break;
      }
      case WOp::L:
      case WOp::M: {
        const auto& a = go(g.arg());
        for (int s = 0; s < m.size(); ++s) {
          BoundPair b = image_bounds(m, s, a);
          if (b.empty()) continue;
          v[s] = g.op() == WOp::L ? *b.lower >= g.r() : *b.upper <= g.r();
        }
        break;
      }
    }
    return memo.emplace(g.id(), std::move(v)).first->second;
  };
  return go(f);
}

inline bool model_check_wlwb(const Wts& m, int s, const WFormula& f) {
  if (s < 0 || s >= m.size()) throw UnknownState("state index out of range");
  return sat_set(m, f)[s];
}

inline bool model_check_wlwb(const Wts& m, const std::string& s, const WFormula& f) {
  return model_check_wlwb(m, m.index(s), f);
}

// ---------------------------------------------------------------------------
// Bisimulations

namespace detail {

// Refines the label partition until `sig(s, block)` is stable; returns the
// block index of every state.
template <class Sig>
std::vector<int> refine(const Wts& m, Sig sig) {
  std::vector<int> block(m.size(), 0);
  {
    std::map<std::set<std::string>, int> ids;
    for (int s = 0; s < m.size(); ++s)
      block[s] = ids.emplace(m.labels(s), static_cast<int>(ids.size())).first->second;
  }
  while (true) {
    using Key = std::pair<int, decltype(sig(0, block))>;
    std::map<Key, int> ids;
    std::vector<int> next(m.size());
    for (int s = 0; s < m.size(); ++s)
      next[s] = ids.emplace(Key{block[s], sig(s, block)}, static_cast<int>(ids.size()))
                    .first->second;
    int before = *std::max_element(block.begin(), block.end()) + 1;
    if (static_cast<int>(ids.size()) == before) return next;
    block = std::move(next);
  }
}

}  // namespace detail

inline std::vector<int> weighted_bisim_classes(const Wts& m) {
  if (m.size() == 0) return {};
  return detail::refine(m, [&](int s, const std::vector<int>& block) {
    std::set<std::pair<Rational, int>> out;
    for (const auto& e : m.out(s)) out.insert({e.w, block[e.dst]});
    return out;
  });
}

// Per class: (min, max) of the weights into it; classes not reached are absent.
inline std::vector<int> gen_bisim_classes(const Wts& m) {
  if (m.size() == 0) return {};
  return detail::refine(m, [&](int s, const std::vector<int>& block) {
    std::map<int, std::pair<Rational, Rational>> b;
    for (const auto& e : m.out(s)) {
      auto it = b.find(block[e.dst]);
      if (it == b.end()) {
        b.emplace(block[e.dst], std::make_pair(e.w, e.w));
      } else {
        it->second.first = std::min(it->second.first, e.w);
        it->second.second = std::max(it->second.second, e.w);
      }
    }
    return b;
  });
}

inline bool weighted_bisim(const Wts& m, int s, int t) {
  auto c = weighted_bisim_classes(m);
  return c.at(s) == c.at(t);
}
inline bool gen_weighted_bisim(const Wts& m, int s, int t) {
  auto c = gen_bisim_classes(m);
  return c.at(s) == c.at(t);
}
inline bool weighted_bisim(const Wts& m, const std::string& s, const std::string& t) {
  return weighted_bisim(m, m.index(s), m.index(t));
}
inline bool gen_weighted_bisim(const Wts& m, const std::string& s, const std::string& t) {
  return gen_weighted_bisim(m, m.index(s), m.index(t));
}

// Formula true at s and false at t, built from the refinement rounds of the
// generalized bisimulation; nullopt when s and t are bisimilar.
inline std::optional<WFormula> distinguishing_formula(const Wts& m, int s, int t) {
  std::set<std::string> props = m.propositions();
  const std::set<Rational> wset = m.weights();
  std::vector<Rational> ws(wset.begin(), wset.end());
  // characteristic formula of each state for the current round
  std::vector<WFormula> chi(m.size(), WFormula::top());
  for (int x = 0; x < m.size(); ++x) {
    WFormula f = WFormula::top();
    for (const auto& p : props)
      f = WFormula::conj(f, m.labels(x).count(p) ? WFormula::atom(p)
                                                 : WFormula::neg(WFormula::atom(p)));
    chi[x] = f;
  }
  auto next_above = [&](const Rational& r) {
    auto it = std::upper_bound(ws.begin(), ws.end(), r);
    return it == ws.end() ? Rational(r + 1) : *it;
  };
  for (int round = 0; round <= m.size(); ++round) {
    if (!model_check_wlwb(m, t, chi[s])) return chi[s];
    // distinct classes of this round, keyed by their formula's satisfaction set
    std::map<std::vector<bool>, WFormula> classes;
    for (int x = 0; x < m.size(); ++x) {
      auto v = sat_set(m, chi[x]);
      classes.emplace(v, chi[x]);
    }
    std::vector<WFormula> nxt = chi;
    for (int x = 0; x < m.size(); ++x) {
      WFormula f = chi[x];
      for (const auto& [mask, c] : classes) {
        BoundPair b = image_bounds(m, x, mask);
        if (b.empty()) {
          f = WFormula::conj(f, WFormula::neg(WFormula::diamond(c)));
          continue;
        }
        f = WFormula::conj(f, WFormula::L(*b.lower, c));
        f = WFormula::conj(f, WFormula::neg(WFormula::L(next_above(*b.lower), c)));
        f = WFormula::conj(f, WFormula::M(*b.upper, c));
        auto it = std::lower_bound(ws.begin(), ws.end(), *b.upper);
        if (it != ws.begin())
          f = WFormula::conj(f, WFormula::neg(WFormula::M(*std::prev(it), c)));
      }
      nxt[x] = f;
    }
    chi = std::move(nxt);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Satisfiability

struct TableauNode {
  std::vector<std::string> gamma;
  std::string interval_l = "[0,0]";
  std::string interval_m = "[0,0]";
  std::string rule;  // "∧", "¬∧", "¬¬", "mod", or "" for a leaf
  bool closed = false;
  std::vector<TableauNode> children;
};

struct SatResult {
  bool sat = false;
  Wts model;
  int witness = -1;
  TableauNode tableau;
};

namespace detail {

struct Literals {
  std::set<std::string> pos, neg;
  std::vector<WFormula> L, M, notL, notM;  // notL holds the L formula itself
};

inline std::string key_of(const std::vector<WFormula>& fs) {
  std::vector<std::string> ks;
  for (const auto& f : fs) ks.push_back(to_string(f));
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::string k;
  for (const auto& s : ks) k += s + " ; ";
  return k;
}

class SatSolver {
 public:
  explicit SatSolver(Wts& out) : out_(out) {}

  // Builds a state satisfying the conjunction of `gamma` into out_, or returns
  // -1. `node` receives the tableau of the attempt.
  int solve(const std::vector<WFormula>& gamma, TableauNode& node) {
    for (const auto& f : gamma) node.gamma.push_back(to_string(f));
    std::string key = key_of(gamma);
    auto it = memo_.find(key);
    if (it != memo_.end() && it->second < 0) {
      node.closed = true;
      return -1;
    }
    if (it != memo_.end()) return it->second;
    int r = expand(gamma, node);
    memo_[key] = r;
    return r;
  }

 private:
  int expand(std::vector<WFormula> gamma, TableauNode& node) {
    for (std::size_t i = 0; i < gamma.size(); ++i) {
      const WFormula f = gamma[i];
      auto rest = [&]() {
        std::vector<WFormula> r = gamma;
        r.erase(r.begin() + i);
        return r;
      };
      if (f.op() == WOp::Top) {
        return solve_child(rest(), node, "");
      }
      if (f.op() == WOp::And) {
        auto g = rest();
        g.push_back(f.arg(0));
        g.push_back(f.arg(1));
        node.rule = "∧";
        return solve_child(g, node, "∧");
      }
      if (f.op() != WOp::Not) continue;
      const WFormula& a = f.arg();
      if (a.op() == WOp::Top) {
        node.closed = true;
        return -1;
      }
      if (a.op() == WOp::Not) {
        auto g = rest();
        g.push_back(a.arg());
        node.rule = "¬¬";
        return solve_child(g, node, "¬¬");
      }
      if (a.op() == WOp::And) {
        node.rule = "¬∧";
        for (int k = 0; k < 2; ++k) {
          auto g = rest();
          g.push_back(WFormula::neg(a.arg(k)));
          node.children.emplace_back();
          int r = solve(g, node.children.back());
          if (r >= 0) return r;
        }
        node.closed = true;
        return -1;
      }
    }
    return solve_literals(gamma, node);
  }

  int solve_child(const std::vector<WFormula>& g, TableauNode& node, const char* rule) {
    if (*rule == 0) return expand(g, node);
    node.children.emplace_back();
    int r = solve(g, node.children.back());
    if (r < 0) node.closed = true;
    return r;
  }

  // Γ holds only literals and (negated) modal formulas.
  int solve_literals(const std::vector<WFormula>& gamma, TableauNode& node) {
    Literals lit;
    for (const auto& f : gamma) {
      if (f.op() == WOp::Atom) lit.pos.insert(f.name());
      if (f.op() == WOp::L) lit.L.push_back(f);
      if (f.op() == WOp::M) lit.M.push_back(f);
      if (f.op() == WOp::Not) {
        const WFormula& a = f.arg();
        if (a.op() == WOp::Atom) lit.neg.insert(a.name());
        if (a.op() == WOp::L) lit.notL.push_back(a);
        if (a.op() == WOp::M) lit.notM.push_back(a);
      }
    }
    for (const auto& p : lit.pos)
      if (lit.neg.count(p)) {
        node.closed = true;
        return -1;
      }
    bool modal = !(lit.L.empty() && lit.M.empty() && lit.notL.empty() && lit.notM.empty());
    if (!modal) return new_state(lit.pos);

    // successor types: truth assignments over the modal arguments
    std::vector<WFormula> phi;
    std::map<std::string, int> phi_ix;
    auto add_arg = [&](const WFormula& m) {
      std::string k = to_string(m.arg());
      if (!phi_ix.count(k)) {
        phi_ix[k] = static_cast<int>(phi.size());
        phi.push_back(m.arg());
      }
    };
    for (auto* v : {&lit.L, &lit.M, &lit.notL, &lit.notM})
      for (const auto& m : *v) add_arg(m);
    if (phi.size() > 16) throw ExplosionGuard("too many modal arguments in one state");
    auto ix = [&](const WFormula& m) { return phi_ix.at(to_string(m.arg())); };

    struct Type {
      unsigned mask;
      Rational lo;                  // A_T
      std::optional<Rational> hi;  // B_T, none = unbounded
    };
    std::vector<Type> types;
    for (unsigned mask = 0; mask < (1u << phi.size()); ++mask) {
      Type t{mask, 0, std::nullopt};
      for (const auto& m : lit.L)
        if (mask >> ix(m) & 1) t.lo = std::max(t.lo, m.r());
      for (const auto& m : lit.M)
        if (mask >> ix(m) & 1) t.hi = t.hi ? std::min(*t.hi, m.r()) : m.r();
      if (t.hi && *t.hi < t.lo) continue;
      types.push_back(t);
    }
    auto good_for_notL = [&](const Type& t, const WFormula& m) { return t.lo < m.r(); };
    auto good_for_notM = [&](const Type& t, const WFormula& m) {
      return !t.hi || *t.hi > m.r();
    };
    auto consistent = [&](const std::vector<Type>& ts) {
      for (const auto& m : lit.notL) {
        bool any = false, good = false;
        for (const auto& t : ts)
          if (t.mask >> ix(m) & 1) any = true, good = good || good_for_notL(t, m);
        if (any && !good) return false;
      }
      for (const auto& m : lit.notM) {
        bool any = false, good = false;
        for (const auto& t : ts)
          if (t.mask >> ix(m) & 1) any = true, good = good || good_for_notM(t, m);
        if (any && !good) return false;
      }
      for (auto* v : {&lit.L, &lit.M})
        for (const auto& m : *v) {
          bool any = false;
          for (const auto& t : ts) any = any || (t.mask >> ix(m) & 1);
          if (!any) return false;
        }
      return true;
    };

    // greatest fixpoint: drop argument classes whose negative constraints
    // cannot be met by any remaining type
    std::vector<char> alive(types.size(), 1);
    for (bool changed = true; changed;) {
      changed = false;
      auto kill_if_bad = [&](const WFormula& m, auto good) {
        bool any = false, ok = false;
        for (std::size_t i = 0; i < types.size(); ++i)
          if (alive[i] && (types[i].mask >> ix(m) & 1))
            any = true, ok = ok || good(types[i], m);
        if (!any || ok) return;
        for (std::size_t i = 0; i < types.size(); ++i)
          if (types[i].mask >> ix(m) & 1) alive[i] = 0;
        changed = true;
      };
      for (const auto& m : lit.notL) kill_if_bad(m, good_for_notL);
      for (const auto& m : lit.notM) kill_if_bad(m, good_for_notM);
    }
    auto current = [&]() {
      std::vector<Type> ts;
      for (std::size_t i = 0; i < types.size(); ++i)
        if (alive[i]) ts.push_back(types[i]);
      return ts;
    };
    // the positive requirements are checked before paying for realizability
    if (!consistent(current())) {
      node.closed = true;
      return -1;
    }

    node.rule = "mod";
    std::vector<int> target(types.size(), -1);
    std::vector<std::size_t> child_of(types.size(), 0);
    auto realize = [&](std::size_t i) {
      if (target[i] != -1) return target[i] >= 0;
      std::vector<WFormula> g;
      for (std::size_t k = 0; k < phi.size(); ++k)
        g.push_back(types[i].mask >> k & 1 ? phi[k] : WFormula::neg(phi[k]));
      node.children.emplace_back();
      child_of[i] = node.children.size() - 1;
      label_intervals(node.children.back(), types[i], lit, ix);
      int r = solve(g, node.children.back());
      target[i] = r >= 0 ? r : -2;
      return r >= 0;
    };
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i < types.size(); ++i)
        if (alive[i] && !realize(i)) alive[i] = 0, changed = true;
      if (changed && !consistent(current())) break;
      // re-run the negative fixpoint after removals
      for (const auto& m : lit.notL) {
        bool any = false, ok = false;
        for (std::size_t i = 0; i < types.size(); ++i)
          if (alive[i] && (types[i].mask >> ix(m) & 1))
            any = true, ok = ok || good_for_notL(types[i], m);
        if (any && !ok) {
          for (std::size_t i = 0; i < types.size(); ++i)
            if (types[i].mask >> ix(m) & 1) alive[i] = 0;
          changed = true;
        }
      }
      for (const auto& m : lit.notM) {
        bool any = false, ok = false;
        for (std::size_t i = 0; i < types.size(); ++i)
          if (alive[i] && (types[i].mask >> ix(m) & 1))
            any = true, ok = ok || good_for_notM(types[i], m);
        if (any && !ok) {
          for (std::size_t i = 0; i < types.size(); ++i)
            if (types[i].mask >> ix(m) & 1) alive[i] = 0;
          changed = true;
        }
      }
    }
    if (!consistent(current())) {
      node.closed = true;
      return -1;
    }
    // keep a small set: drop types while the rest still works, trying the
    // ones with fewest true arguments first
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < types.size(); ++i)
      if (alive[i]) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::popcount(types[a].mask) < std::popcount(types[b].mask);
    });
    for (std::size_t i : order) {
      alive[i] = 0;
      if (!consistent(current())) alive[i] = 1;
    }

    int s = new_state(lit.pos);
    for (std::size_t i = 0; i < types.size(); ++i) {
      if (!alive[i]) continue;
      const Type& t = types[i];
      out_.add_trans(s, t.lo, target[i]);
      if (t.hi && *t.hi != t.lo) {
        out_.add_trans(s, *t.hi, target[i]);
      } else if (!t.hi) {
        Rational need = -1;
        for (const auto& m : lit.notM)
          if (t.mask >> ix(m) & 1) need = std::max(need, m.r());
        if (need >= t.lo) out_.add_trans(s, need + 1, target[i]);
      }
    }
    (void)child_of;
    return s;
  }

  template <class Ix, class T>
  static void label_intervals(TableauNode& n, const T& t, const Literals& lit, Ix ix) {
    std::optional<Rational> lcap;
    for (const auto& m : lit.notL)
      if (t.mask >> ix(m) & 1) lcap = lcap ? std::min(*lcap, m.r()) : m.r();
    std::optional<Rational> mfloor;
    for (const auto& m : lit.notM)
      if (t.mask >> ix(m) & 1) mfloor = mfloor ? std::max(*mfloor, m.r()) : m.r();
    std::string hi = t.hi ? to_string(*t.hi) + "]" : "inf)";
    n.interval_l = "[" + to_string(t.lo) + "," + (lcap ? to_string(*lcap) + ")" : hi);
    n.interval_m = (mfloor ? "(" + to_string(*mfloor) : "[" + to_string(t.lo)) + "," + hi;
  }

  int new_state(const std::set<std::string>& labels) {
    return out_.add_state("s" + std::to_string(out_.size()), labels);
  }

  Wts& out_;
  std::map<std::string, int> memo_;
};

}  // namespace detail

// Tableau-style decision procedure. On success the returned model is checked
// against f before it is handed back.
inline SatResult satisfiable_wlwb(const WFormula& f) {
  SatResult res;
  detail::SatSolver solver(res.model);
  int w = solver.solve({f}, res.tableau);
  if (w < 0) return res;
  if (!model_check_wlwb(res.model, w, f))
    throw std::logic_error("extracted model does not satisfy " + to_string(f));
  res.sat = true;
  res.witness = w;
  return res;
}

// ---------------------------------------------------------------------------
// Axiom soundness

struct AxiomReport {
  long instances = 0;
  std::vector<std::string> violations;
};

inline Wts random_wts(std::mt19937_64& rng, int n_states, int n_edges,
                      const std::vector<std::string>& props, int max_weight = 4) {
  Wts m;
  std::uniform_int_distribution<int> coin(0, 1), st(0, n_states - 1), wt(0, max_weight);
  for (int i = 0; i < n_states; ++i) {
    std::set<std::string> l;
    for (const auto& p : props)
      if (coin(rng)) l.insert(p);
    m.add_state("s" + std::to_string(i), l);
  }
  for (int k = 0; k < n_edges; ++k) m.add_trans(st(rng), Rational(wt(rng)), st(rng));
  return m;
}

inline WFormula random_wlwb(std::mt19937_64& rng, int depth,
                            const std::vector<std::string>& props,
                            const std::vector<Rational>& consts) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 5 : 1);
  std::uniform_int_distribution<std::size_t> pp(0, props.size() - 1), cc(0, consts.size() - 1);
  switch (pick(rng)) {
    case 0: return WFormula::atom(props[pp(rng)]);
    case 1: return std::uniform_int_distribution<int>(0, 5)(rng) == 0
                       ? WFormula::top()
                       : WFormula::atom(props[pp(rng)]);
    case 2: return WFormula::neg(random_wlwb(rng, depth - 1, props, consts));
    case 3:
      return WFormula::conj(random_wlwb(rng, depth - 1, props, consts),
                            random_wlwb(rng, depth - 1, props, consts));
    case 4: return WFormula::L(consts[cc(rng)], random_wlwb(rng, depth - 1, props, consts));
    default: return WFormula::M(consts[cc(rng)], random_wlwb(rng, depth - 1, props, consts));
  }
}

// Random instances of A1-A7 and R1, R1', R2 on random small systems. Rules are
// checked per model: premise valid on M implies conclusion valid on M.
inline AxiomReport axiom_soundness_suite(std::uint64_t seed, int n_models,
                                         int per_model = 8) {
  using F = WFormula;
  std::mt19937_64 rng(seed);
  const std::vector<std::string> props{"p", "q"};
  const std::vector<Rational> consts{0, 1, 2, Rational(5, 2), 3, 4};
  AxiomReport rep;
  auto valid = [](const Wts& m, const F& f) {
    auto v = sat_set(m, f);
    return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
  };
  std::uniform_int_distribution<std::size_t> cc(0, consts.size() - 1);
  std::uniform_int_distribution<int> qpos(1, 3), nsz(1, 5), nedge(0, 10);
  for (int k = 0; k < n_models; ++k) {
    int n = nsz(rng);
    Wts m = random_wts(rng, n, nedge(rng), props);
    for (int j = 0; j < per_model; ++j) {
      F phi = random_wlwb(rng, 2, props, consts);
      F psi = random_wlwb(rng, 2, props, consts);
      Rational r = consts[cc(rng)], r2 = consts[cc(rng)];
      Rational q = Rational(qpos(rng), 2);
      std::vector<std::pair<std::string, F>> ax{
          {"A1", F::neg(F::L(0, F::bot()))},
          {"A2", F::implies(F::L(r + q, phi), F::L(r, phi))},
          {"A2'", F::implies(F::M(r, phi), F::M(r + q, phi))},
          {"A3", F::implies(F::conj(F::L(r, phi), F::L(r2, psi)),
                            F::L(std::min(r, r2), F::disj(phi, psi)))},
          {"A3'", F::implies(F::conj(F::M(r, phi), F::M(r2, psi)),
                             F::M(std::max(r, r2), F::disj(phi, psi)))},
          {"A4", F::implies(F::L(r, F::disj(phi, psi)), F::disj(F::L(r, phi), F::L(r, psi)))},
          {"A5", F::implies(F::neg(F::L(0, psi)),
                            F::implies(F::L(r, phi), F::L(r, F::disj(phi, psi))))},
          {"A5'", F::implies(F::neg(F::L(0, psi)),
                             F::implies(F::M(r, phi), F::M(r, F::disj(phi, psi))))},
          {"A6", F::implies(F::L(r + q, phi), F::neg(F::M(r, phi)))},
          {"A7", F::implies(F::M(r, phi), F::L(0, phi))},
      };
      for (const auto& [name, f] : ax) {
        ++rep.instances;
        if (!valid(m, f)) rep.violations.push_back(name + ": " + to_string(f));
      }
      // premise of the rules: phi -> psi; make it valid half of the time
      F lhs = std::uniform_int_distribution<int>(0, 1)(rng) ? F::conj(psi, phi) : phi;
      if (valid(m, F::implies(lhs, psi))) {
        std::vector<std::pair<std::string, F>> rules{
            {"R1", F::implies(F::conj(F::L(r, psi), F::L(0, lhs)), F::L(r, lhs))},
            {"R1'", F::implies(F::conj(F::M(r, psi), F::L(0, lhs)), F::M(r, lhs))},
            {"R2", F::implies(F::L(0, lhs), F::L(0, psi))},
        };
        for (const auto& [name, f] : rules) {
          ++rep.instances;
          if (!valid(m, f)) rep.violations.push_back(name + ": " + to_string(f));
        }
      }
    }
  }
  return rep;
}

}  // namespace stochpre
