#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cdf.hpp"
#include "errors.hpp"
#include "rational.hpp"

namespace stochpre {

enum class SmpKind { General, Reactive, Generative };

inline std::string to_string(SmpKind k) {
  switch (k) {
    case SmpKind::General: return "general";
    case SmpKind::Reactive: return "reactive";
    case SmpKind::Generative: return "generative";
  }
  return "?";
}

struct SmpTrans {
  int dst;
  int out;
  Rational p;
};

// Semi-Markov process with finitely supported transition rows tau(s, a) over
// (state, output) pairs. In a reactive process the output of a transition is
// the chosen input, so `outputs` and `inputs` coincide.
class Smp {
 public:
  explicit Smp(SmpKind kind = SmpKind::Reactive, std::vector<std::string> inputs = {"a"},
               std::vector<std::string> outputs = {})
      : kind_(kind), inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
    if (kind_ == SmpKind::Reactive && outputs_.empty()) outputs_ = inputs_;
    if (kind_ == SmpKind::Generative && inputs_.size() != 1)
      throw KindMismatch("a generative process has exactly one input");
    if (kind_ == SmpKind::Reactive && outputs_ != inputs_)
      throw KindMismatch("a reactive process has outputs equal to its inputs");
  }

  int add_state(const std::string& name, Cdf residence, std::set<std::string> labels = {}) {
    if (index_.count(name)) throw ModelError("duplicate state '" + name + "'");
    index_[name] = size();
    names_.push_back(name);
    residence_.push_back(std::move(residence));
    labels_.push_back(std::move(labels));
    rows_.emplace_back(inputs_.size());
    return size() - 1;
  }

  // Adds probability mass; repeated (src, in, dst, out) entries accumulate.
  void add_trans(int src, int in, const Rational& p, int dst, int out) {
    check_state(src);
    check_state(dst);
    if (in < 0 || in >= static_cast<int>(inputs_.size())) throw UnknownInput("input index");
    if (out < 0 || out >= static_cast<int>(outputs_.size())) throw UnknownInput("output index");
    if (kind_ == SmpKind::Reactive && in != out)
      throw KindMismatch("reactive transition must output its input");
    if (p < 0 || p > 1) throw ModelError("probability outside [0,1]");
    if (p == 0) return;
    auto& row = rows_[src][in];
    for (auto& t : row)
      if (t.dst == dst && t.out == out) {
        t.p += p;
        return;
      }
    row.push_back({dst, out, p});
  }
  void add_trans(const std::string& src, const std::string& in, const Rational& p,
                 const std::string& dst, const std::string& out = "") {
    int i = input_index(in);
    add_trans(index(src), i, p, index(dst), out.empty() ? output_index(in) : output_index(out));
  }

  // Row sums must not exceed 1.
  void validate() const {
    for (int s = 0; s < size(); ++s)
      for (std::size_t a = 0; a < inputs_.size(); ++a)
        if (row_mass(s, static_cast<int>(a)) > 1)
          throw ModelError("transition row of '" + names_[s] + "' on '" + inputs_[a] +
                           "' sums above 1");
  }

  SmpKind kind() const { return kind_; }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& inputs() const { return inputs_; }
  const std::vector<std::string>& outputs() const { return outputs_; }
  const std::string& name(int s) const { return names_.at(s); }
  const Cdf& residence(int s) const { return residence_.at(s); }
  void set_residence(int s, Cdf f) { residence_.at(s) = std::move(f); }
  const std::set<std::string>& labels(int s) const { return labels_.at(s); }
  const std::vector<SmpTrans>& trans(int s, int a) const { return rows_.at(s).at(a); }
  Rational row_mass(int s, int a) const {
    Rational m = 0;
    for (const auto& t : trans(s, a)) m += t.p;
    return m;
  }

  int index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UnknownState("unknown state '" + name + "'");
    return it->second;
  }
  int input_index(const std::string& a) const {
    for (std::size_t i = 0; i < inputs_.size(); ++i)
      if (inputs_[i] == a) return static_cast<int>(i);
    throw UnknownInput("unknown input '" + a + "'");
  }
  int output_index(const std::string& a) const {
    for (std::size_t i = 0; i < outputs_.size(); ++i)
      if (outputs_[i] == a) return static_cast<int>(i);
    throw UnknownInput("unknown output '" + a + "'");
  }

 private:
  void check_state(int s) const {
    if (s < 0 || s >= size()) throw UnknownState("state index out of range");
  }
  SmpKind kind_;
  std::vector<std::string> inputs_, outputs_;
  std::vector<std::string> names_;
  std::vector<Cdf> residence_;
  std::vector<std::set<std::string>> labels_;
  std::vector<std::vector<std::vector<SmpTrans>>> rows_;
  std::map<std::string, int> index_;
};

// A one-input process whose outputs equal its inputs is both reactive and
// generative; these checks look at structure, not at the declared kind.
inline bool is_reactive(const Smp& m) {
  if (m.inputs() != m.outputs()) return false;
  for (int s = 0; s < m.size(); ++s)
    for (std::size_t a = 0; a < m.inputs().size(); ++a)
      for (const auto& t : m.trans(s, static_cast<int>(a)))
        if (t.out != static_cast<int>(a)) return false;
  return true;
}

inline bool is_generative(const Smp& m) { return m.inputs().size() == 1; }

// ---------------------------------------------------------------------------
// File format

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// `smp reactive|generative|general`, `inputs a,b`, `outputs a,b`,
// `state <id> <cdf> {labels}`, `trans <src> <input> <prob> <dst> [<output>]`.
inline Smp parse_smp(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  std::optional<SmpKind> kind;
  std::vector<std::string> inputs, outputs;
  std::optional<Smp> m;
  auto fail = [&](const std::string& msg) -> void { throw SyntaxError(msg, 0, lineno); };
  auto ensure_model = [&]() {
    if (m) return;
    if (!kind) fail("expected 'smp <kind>' header");
    if (inputs.empty()) inputs = {"a"};
    if (*kind == SmpKind::Reactive) outputs = inputs;
    if (outputs.empty()) outputs = inputs;
    try {
      m.emplace(*kind, inputs, outputs);
    } catch (const KindMismatch& e) {
      fail(e.what());
    }
  };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    std::string rest;
    std::getline(ls, rest);
    rest = detail::trim(rest);
    if (!kind) {
      if (kw != "smp") fail("expected 'smp <kind>' header");
      if (rest == "reactive") kind = SmpKind::Reactive;
      else if (rest == "generative") kind = SmpKind::Generative;
      else if (rest == "general") kind = SmpKind::General;
      else fail("unknown process kind '" + rest + "'");
      continue;
    }
    if (kw == "inputs" || kw == "outputs") {
      if (m) fail("'" + kw + "' must precede states");
      (kw == "inputs" ? inputs : outputs) = detail::split_list(rest);
      continue;
    }
    ensure_model();
    if (kw == "state") {
      std::istringstream rs(rest);
      std::string id;
      rs >> id;
      if (id.empty()) fail("state needs an id");
      std::string body;
      std::getline(rs, body);
      body = detail::trim(body);
      std::set<std::string> labels;
      auto brace = body.rfind('{');
      std::string cdf_text = body;
      if (brace != std::string::npos) {
        if (body.back() != '}') fail("unterminated label set");
        for (const auto& l : detail::split_list(body.substr(brace + 1, body.size() - brace - 2)))
          labels.insert(l);
        cdf_text = detail::trim(body.substr(0, brace));
      }
      if (cdf_text.empty()) fail("state needs a residence cdf");
      try {
        m->add_state(id, parse_cdf(cdf_text), labels);
      } catch (const SyntaxError& e) {
        throw SyntaxError(std::string("bad cdf: ") + e.what(), e.offset(), lineno);
      } catch (const ModelError& e) {
        fail(e.what());
      }
    } else if (kw == "trans") {
      auto f = detail::split_list(rest);
      std::string src, input, prob, dst, output;
      if (f.size() == 5) {
        src = f[0], input = f[1], prob = f[2], dst = f[3], output = f[4];
      } else if (f.size() == 4 && *kind == SmpKind::Generative) {
        src = f[0], input = m->inputs()[0], prob = f[1], dst = f[2], output = f[3];
      } else if (f.size() == 4 && *kind == SmpKind::Reactive) {
        src = f[0], input = f[1], prob = f[2], dst = f[3], output = f[1];
      } else {
        fail("expected 'trans <src> <input> <prob> <dst> [<output>]'");
      }
      Rational p;
      try {
        p = parse_rational(prob);
      } catch (const SyntaxError& e) {
        throw SyntaxError(e.what(), 0, lineno);
      }
      try {
        m->add_trans(src, input, p, dst, output);
      } catch (const Error& e) {
        fail(e.what());
      }
    } else {
      fail("unknown keyword '" + kw + "'");
    }
  }
  ensure_model();
  m->validate();
  return *m;
}

inline std::string join(const std::vector<std::string>& xs, const std::string& sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? sep : "") + xs[i];
  return s;
}

inline std::string to_text(const Smp& m) {
  std::ostringstream os;
  os << "smp " << to_string(m.kind()) << "\n";
  os << "inputs " << join(m.inputs()) << "\n";
  if (m.kind() != SmpKind::Reactive) os << "outputs " << join(m.outputs()) << "\n";
  for (int s = 0; s < m.size(); ++s) {
    std::vector<std::string> ls(m.labels(s).begin(), m.labels(s).end());
    os << "state " << m.name(s) << " " << to_string(m.residence(s)) << " {" << join(ls)
       << "}\n";
  }
  for (int s = 0; s < m.size(); ++s)
    for (std::size_t a = 0; a < m.inputs().size(); ++a)
      for (const auto& t : m.trans(s, static_cast<int>(a)))
        os << "trans " << m.name(s) << " " << m.inputs()[a] << " " << to_string(t.p) << " "
           << m.name(t.dst) << " " << m.outputs()[t.out] << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Schedulers

// Time-abstract input policy. Histories are state sequences starting at the
// initial state; `horizon` bounds the number of transitions they contain.
struct Scheduler {
  int horizon = 0;
  bool memoryless = false;
  std::vector<std::vector<double>> per_state;
  std::map<std::vector<int>, std::vector<double>> table;

  const std::vector<double>& at(const std::vector<int>& hist) const {
    if (memoryless) return per_state.at(hist.back());
    auto it = table.find(hist);
    if (it == table.end()) throw HorizonTooShort("scheduler has no choice for this history");
    return it->second;
  }

  // Deterministic memoryless choice, one input per state.
  static Scheduler memoryless_det(const Smp& m, const std::vector<int>& input_of) {
    Scheduler s;
    s.memoryless = true;
    s.horizon = std::numeric_limits<int>::max();
    for (int x = 0; x < m.size(); ++x) {
      std::vector<double> d(m.inputs().size(), 0.0);
      d.at(input_of.at(x)) = 1;
      s.per_state.push_back(d);
    }
    return s;
  }
  static Scheduler memoryless_dist(const Smp& m, std::vector<std::vector<double>> dists) {
    Scheduler s;
    s.memoryless = true;
    s.horizon = std::numeric_limits<int>::max();
    if (static_cast<int>(dists.size()) != m.size())
      throw std::invalid_argument("one distribution per state");
    s.per_state = std::move(dists);
    return s;
  }
  // The only scheduler of a one-input process, and a uniform default otherwise.
  static Scheduler uniform(const Smp& m) {
    double w = 1.0 / m.inputs().size();
    return memoryless_dist(m, std::vector<std::vector<double>>(
                                  m.size(), std::vector<double>(m.inputs().size(), w)));
  }
};

inline std::string to_string(const Smp& m, const Scheduler& s) {
  std::ostringstream os;
  auto dist = [&](const std::vector<double>& d) {
    std::string r = "{";
    bool first = true;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] == 0) continue;
      r += (first ? "" : ",") + m.inputs()[i] + ":" + fmt_num(d[i]);
      first = false;
    }
    return r + "}";
  };
  if (s.memoryless) {
    for (int x = 0; x < m.size(); ++x)
      os << (x ? " " : "") << m.name(x) << "->" << dist(s.per_state[x]);
    return os.str();
  }
  bool first = true;
  for (const auto& [h, d] : s.table) {
    os << (first ? "" : " ");
    for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "." : "") << m.name(h[i]);
    os << "->" << dist(d);
    first = false;
  }
  return os.str();
}

// Histories with at most `horizon` transitions. From `start` only histories
// along positive-probability transitions are produced; with start = -1 every
// state sequence counts.
inline std::vector<std::vector<int>> scheduler_histories(const Smp& m, int horizon,
                                                         int start = -1) {
  std::vector<std::vector<int>> out, frontier;
  if (start >= 0) {
    frontier.push_back({start});
  } else {
    for (int s = 0; s < m.size(); ++s) frontier.push_back({s});
  }
  for (int k = 0; k <= horizon; ++k) {
    out.insert(out.end(), frontier.begin(), frontier.end());
    if (k == horizon) break;
    std::vector<std::vector<int>> next;
    for (const auto& h : frontier) {
      std::set<int> succ;
      if (start >= 0) {
        for (std::size_t a = 0; a < m.inputs().size(); ++a)
          for (const auto& t : m.trans(h.back(), static_cast<int>(a))) succ.insert(t.dst);
      } else {
        for (int s = 0; s < m.size(); ++s) succ.insert(s);
      }
      for (int s : succ) {
        auto g = h;
        g.push_back(s);
        next.push_back(std::move(g));
      }
    }
    frontier = std::move(next);
  }
  return out;
}

inline constexpr double kSchedulerLimit = 1e6;

// Number of deterministic schedulers over the given histories.
inline double scheduler_count(const Smp& m, std::size_t n_histories) {
  return std::pow(static_cast<double>(m.inputs().size()), static_cast<double>(n_histories));
}

// Calls `fn` on every deterministic history-dependent scheduler; `fn` returns
// false to stop. Returns the number of schedulers visited.
inline long enumerate_schedulers(const Smp& m, int horizon,
                                 const std::function<bool(const Scheduler&)>& fn,
                                 double limit = kSchedulerLimit, int start = -1) {
  auto hs = scheduler_histories(m, horizon, start);
  double count = scheduler_count(m, hs.size());
  if (count > limit)
    throw ExplosionGuard("scheduler enumeration needs " + fmt_num(count) +
                         " schedulers (limit " + fmt_num(limit) + ")");
  const int k = static_cast<int>(m.inputs().size());
  std::vector<int> digit(hs.size(), 0);
  long visited = 0;
  while (true) {
    Scheduler s;
    s.horizon = horizon;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      std::vector<double> d(k, 0.0);
      d[digit[i]] = 1;
      s.table[hs[i]] = d;
    }
    ++visited;
    if (!fn(s)) return visited;
    std::size_t i = 0;
    while (i < digit.size() && ++digit[i] == k) digit[i++] = 0;
    if (i == digit.size()) return visited;
  }
}

inline std::vector<Scheduler> all_schedulers(const Smp& m, int horizon,
                                             double limit = kSchedulerLimit, int start = -1) {
  std::vector<Scheduler> out;
  enumerate_schedulers(m, horizon, [&](const Scheduler& s) {
    out.push_back(s);
    return true;
  }, limit, start);
  return out;
}

// ---------------------------------------------------------------------------
// Time-bounded cylinders

inline std::vector<int> parse_word(const Smp& m, const std::string& text) {
  std::vector<int> w;
  if (text.find(',') != std::string::npos) {
    for (const auto& a : detail::split_list(text)) w.push_back(m.output_index(a));
    return w;
  }
  bool single = true;
  for (const auto& o : m.outputs()) single = single && o.size() == 1;
  if (!single) {
    w.push_back(m.output_index(text));
    return w;
  }
  for (char c : text) w.push_back(m.output_index(std::string(1, c)));
  return w;
}

// t -> P^sigma(s)(C(word, t)) as a defective mixture of convolutions: one
// component per multiset of visited residence distributions.
inline Cdf cylinder_cdf(const Smp& m, const Scheduler& sched, int s,
                        const std::vector<int>& word) {
  if (word.empty()) return Cdf::dirac(0);
  if (sched.horizon < static_cast<int>(word.size()))
    throw HorizonTooShort("scheduler horizon " + std::to_string(sched.horizon) +
                          " is shorter than the word");
  std::map<std::vector<int>, double> mass;  // sorted residence states -> weight
  std::vector<int> hist{s};
  std::function<void(double)> go = [&](double w) {
    std::size_t k = hist.size() - 1;
    if (k == word.size()) {
      std::vector<int> key(hist.begin(), hist.end() - 1);
      std::sort(key.begin(), key.end());
      mass[key] += w;
      return;
    }
    const auto& choice = sched.at(hist);
    for (std::size_t a = 0; a < choice.size(); ++a) {
      if (choice[a] == 0) continue;
      for (const auto& t : m.trans(hist.back(), static_cast<int>(a))) {
        if (t.out != word[k]) continue;
        hist.push_back(t.dst);
        go(w * choice[a] * to_double(t.p));
        hist.pop_back();
      }
    }
  };
  go(1.0);
  std::vector<double> ws;
  std::vector<Cdf> parts;
  double total = 0;
  for (const auto& [key, w] : mass) {
    if (w <= 0) continue;
    std::vector<Cdf> rs;
    for (int x : key) rs.push_back(m.residence(x));
    parts.push_back(convolve_all(rs));
    ws.push_back(w);
    total += w;
  }
  if (parts.empty()) return Cdf::mixture({0.0}, {Cdf::dirac(0)});
  // guard against round-off pushing the total above one
  if (total > 1)
    for (auto& w : ws) w /= total;
  return Cdf::mixture(ws, parts);
}

inline double cylinder_prob(const Smp& m, const Scheduler& sched, int s,
                            const std::vector<int>& word, double t) {
  return eval(cylinder_cdf(m, sched, s, word), t);
}

// ---------------------------------------------------------------------------
// Composition and transformations

inline Smp compose(const Smp& u, const Smp& v, CompositionKind star) {
  if (u.kind() != SmpKind::Reactive || v.kind() != SmpKind::Reactive)
    throw KindMismatch("composition needs reactive processes");
  if (std::set<std::string>(u.inputs().begin(), u.inputs().end()) !=
      std::set<std::string>(v.inputs().begin(), v.inputs().end()))
    throw KindMismatch("composition needs identical input sets");
  Smp c(SmpKind::Reactive, u.inputs());
  auto pair_name = [&](int x, int y) { return "(" + u.name(x) + "," + v.name(y) + ")"; };
  for (int x = 0; x < u.size(); ++x)
    for (int y = 0; y < v.size(); ++y) {
      std::set<std::string> l = u.labels(x);
      l.insert(v.labels(y).begin(), v.labels(y).end());
      c.add_state(pair_name(x, y), compose_cdf(star, u.residence(x), v.residence(y)), l);
    }
  for (int x = 0; x < u.size(); ++x)
    for (int y = 0; y < v.size(); ++y)
      for (std::size_t a = 0; a < u.inputs().size(); ++a) {
        int b = v.input_index(u.inputs()[a]);
        for (const auto& tu : u.trans(x, static_cast<int>(a)))
          for (const auto& tv : v.trans(y, b))
            c.add_trans(x * v.size() + y, static_cast<int>(a), tu.p * tv.p,
                        tu.dst * v.size() + tv.dst, static_cast<int>(a));
      }
  return c;
}

inline int compose_index(const Smp& u, const Smp& v, int x, int y) {
  (void)u;
  return x * v.size() + y;
}

// Same process with every residence CDF replaced by t -> F(eps t).
inline Smp accelerate(const Smp& m, double eps) {
  Smp c = m;
  for (int s = 0; s < c.size(); ++s) c.set_residence(s, scale_time(m.residence(s), eps));
  return c;
}

// States of `b` are appended with `suffix` added to their names.
inline Smp disjoint_union(const Smp& a, const Smp& b, const std::string& suffix) {
  if (a.inputs() != b.inputs() || a.outputs() != b.outputs() || a.kind() != b.kind())
    throw KindMismatch("disjoint union needs matching signatures");
  Smp c = a;
  for (int s = 0; s < b.size(); ++s) c.add_state(b.name(s) + suffix, b.residence(s), b.labels(s));
  for (int s = 0; s < b.size(); ++s)
    for (std::size_t i = 0; i < b.inputs().size(); ++i)
      for (const auto& t : b.trans(s, static_cast<int>(i)))
        c.add_trans(s + a.size(), static_cast<int>(i), t.p, t.dst + a.size(), t.out);
  return c;
}

}  // namespace stochpre
