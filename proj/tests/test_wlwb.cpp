#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "stochpre/wlwb.hpp"

using namespace stochpre;
using F = WFormula;

namespace {

Wts bisim_figure() {
  Wts m;
  m.add_state("s", {"a"});
  m.add_state("t", {"a"});
  m.add_state("s1", {"b"});
  m.add_state("t1", {"b"});
  for (int w : {1, 2, 3}) m.add_trans("s", w, "s1");
  for (int w : {1, 3}) m.add_trans("t", w, "t1");
  return m;
}

const char* kSatExample = "!( !(L 2 p1 & M 5 (L 1 p1)) & !(M 2 p2) )";

TEST(WlwbParse, ModalAtom) {
  F f = parse_wlwb("L 2 p1");
  ASSERT_EQ(f.op(), WOp::L);
  EXPECT_EQ(f.r(), Rational(2));
  EXPECT_EQ(f.arg().op(), WOp::Atom);
  EXPECT_EQ(f.arg().name(), "p1");
}

TEST(WlwbParse, SatExampleShape) {
  F f = parse_wlwb(kSatExample);
  F expect = F::neg(F::conj(
      F::neg(F::conj(F::L(2, F::atom("p1")), F::M(5, F::L(1, F::atom("p1"))))),
      F::neg(F::M(2, F::atom("p2")))));
  EXPECT_TRUE(f == expect);
}

TEST(WlwbParse, NegativeConstantIsSyntaxError) {
  try {
    parse_wlwb("L -1 p");
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.offset(), 2u);
  }
}

TEST(WlwbParse, PrecedenceAndSugar) {
  // ! binds tighter than L, L tighter than &, & tighter than |
  F f = parse_wlwb("!L 1/2 p & q | r");
  F expect = F::disj(F::conj(F::neg(F::L(Rational(1, 2), F::atom("p"))), F::atom("q")),
                     F::atom("r"));
  EXPECT_TRUE(f == expect);
  EXPECT_TRUE(parse_wlwb("L 0.25 p") == F::L(Rational(1, 4), F::atom("p")));
}

TEST(WlwbParse, PrintRoundTrip) {
  for (const char* s : {kSatExample, "(p | q)", "L 3/2 M 0 !p", "false", "true & p"}) {
    F f = parse_wlwb(s);
    EXPECT_TRUE(parse_wlwb(to_string(f)) == f) << s << " -> " << to_string(f);
  }
}

TEST(WlwbParse, ReportsErrors) {
  EXPECT_THROW(parse_wlwb("p &"), SyntaxError);
  EXPECT_THROW(parse_wlwb("(p"), SyntaxError);
  EXPECT_THROW(parse_wlwb("L p"), SyntaxError);
  EXPECT_THROW(parse_wlwb("p q"), SyntaxError);
}

TEST(ImageBounds, FigureWeights) {
  Wts m = bisim_figure();
  BoundPair b = image_bounds(m, "s", {"s1"});
  EXPECT_EQ(*b.lower, Rational(1));
  EXPECT_EQ(*b.upper, Rational(3));
  EXPECT_TRUE(image_bounds(m, "s", {}).empty());
  EXPECT_TRUE(image_bounds(m, "s1", {"s", "t", "s1", "t1"}).empty());
  EXPECT_EQ(to_string(image_bounds(m, "s", {})), "(-inf, +inf)");
}

TEST(ModelCheck, FigureExamples) {
  Wts m = bisim_figure();
  EXPECT_TRUE(model_check_wlwb(m, "s", parse_wlwb("L 1 b")));
  EXPECT_FALSE(model_check_wlwb(m, "s", parse_wlwb("L 2 b")));
  EXPECT_TRUE(model_check_wlwb(m, "s", parse_wlwb("M 3 b")));
  EXPECT_FALSE(model_check_wlwb(m, "s", parse_wlwb("M 2 b")));
  for (int s = 0; s < m.size(); ++s) EXPECT_TRUE(model_check_wlwb(m, s, F::top()));
  EXPECT_THROW(model_check_wlwb(m, "nope", F::top()), UnknownState);
}

TEST(ModelCheck, DiamondIsLZero) {
  Wts m = bisim_figure();
  EXPECT_TRUE(model_check_wlwb(m, "s", parse_wlwb("L 0 b")));
  EXPECT_FALSE(model_check_wlwb(m, "s", parse_wlwb("L 0 a")));
  EXPECT_FALSE(model_check_wlwb(m, "s1", parse_wlwb("L 0 true")));
  EXPECT_FALSE(model_check_wlwb(m, "s1", parse_wlwb("M 7 true")));
}

TEST(Bisim, FigureSeparatesTheTwoNotions) {
  Wts m = bisim_figure();
  EXPECT_TRUE(gen_weighted_bisim(m, "s", "t"));
  EXPECT_FALSE(weighted_bisim(m, "s", "t"));
  EXPECT_TRUE(weighted_bisim(m, "s", "s"));
  EXPECT_TRUE(gen_weighted_bisim(m, "s", "s"));
  EXPECT_TRUE(weighted_bisim(m, "s1", "t1"));
  EXPECT_FALSE(gen_weighted_bisim(m, "s", "s1"));
  EXPECT_FALSE(distinguishing_formula(m, 0, 1).has_value());
}

TEST(Bisim, DisjointCopyIsBisimilar) {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 50; ++k) {
    Wts a = random_wts(rng, 4, 7, {"p", "q"});
    Wts m;
    for (int c = 0; c < 2; ++c)
      for (int s = 0; s < a.size(); ++s) m.add_state(a.name(s) + "_" + std::to_string(c), a.labels(s));
    for (int c = 0; c < 2; ++c)
      for (const auto& e : a.edges())
        m.add_trans(e.src + c * a.size(), e.w, e.dst + c * a.size());
    for (int s = 0; s < a.size(); ++s) {
      EXPECT_TRUE(weighted_bisim(m, s, s + a.size()));
      EXPECT_TRUE(gen_weighted_bisim(m, s, s + a.size()));
    }
  }
}

TEST(Bisim, DistinguishingFormulaSeparates) {
  Wts m = bisim_figure();
  m.add_state("u", {"a"});
  m.add_trans("u", 2, "t1");
  auto f = distinguishing_formula(m, m.index("s"), m.index("u"));
  ASSERT_TRUE(f.has_value());
  EXPECT_TRUE(model_check_wlwb(m, "s", *f));
  EXPECT_FALSE(model_check_wlwb(m, "u", *f));
}

TEST(Sat, ExampleFormulaBuildsTheChain) {
  F f = parse_wlwb(kSatExample);
  SatResult r = satisfiable_wlwb(f);
  ASSERT_TRUE(r.sat);
  EXPECT_TRUE(model_check_wlwb(r.model, r.witness, f));
  const Wts& m = r.model;
  // s -> s1 with weights 2 and 5, s1 -> s2 with weight 1; labels {}, {p1}, {p1}
  int s = r.witness;
  auto out = m.out(s);
  ASSERT_EQ(out.size(), 2u);
  std::set<Rational> ws{out[0].w, out[1].w};
  EXPECT_EQ(ws, (std::set<Rational>{2, 5}));
  int s1 = out[0].dst;
  EXPECT_EQ(out[1].dst, s1);
  EXPECT_TRUE(m.labels(s).empty());
  EXPECT_EQ(m.labels(s1), (std::set<std::string>{"p1"}));
  auto out1 = m.out(s1);
  ASSERT_EQ(out1.size(), 1u);
  EXPECT_EQ(out1[0].w, Rational(1));
  EXPECT_EQ(m.labels(out1[0].dst), (std::set<std::string>{"p1"}));
  EXPECT_EQ(r.tableau.interval_l, "[0,0]");
  EXPECT_EQ(r.tableau.interval_m, "[0,0]");
  EXPECT_EQ(r.tableau.rule, "¬∧");
}

TEST(Sat, Contradictions) {
  EXPECT_FALSE(satisfiable_wlwb(parse_wlwb("p & !p")).sat);
  EXPECT_FALSE(satisfiable_wlwb(parse_wlwb("L 2 p & M 1 p")).sat);
  EXPECT_FALSE(satisfiable_wlwb(parse_wlwb("L 0 false")).sat);
  EXPECT_FALSE(satisfiable_wlwb(parse_wlwb("M 3 p & !L 0 p")).sat);
  EXPECT_FALSE(satisfiable_wlwb(parse_wlwb("L 1 p & !L 1 p")).sat);
}

TEST(Sat, NegatedModalities) {
  for (const char* s : {"!L 2 p & L 0 p", "!M 2 p & L 0 p", "!M 2 p & M 5 p",
                        "L 1 p & !L 2 p & M 3 p & !M 2 p", "L 1 (p & L 1 q) & !L 2 p",
                        "!L 0 p & L 1 q & M 1 q", "L 1 p & L 1 !p & !M 1 true"}) {
    SatResult r = satisfiable_wlwb(parse_wlwb(s));
    EXPECT_TRUE(r.sat) << s;
  }
  EXPECT_FALSE(satisfiable_wlwb(parse_wlwb("L 2 p & !M 3 p & M 2 true")).sat);
}

// brute force over all systems with <=2 states, labels over {p}, weights {0,1,2}
bool brute_sat(const F& f) {
  const std::vector<int> ws{0, 1, 2};
  for (int n = 1; n <= 2; ++n) {
    std::vector<std::tuple<int, int, int>> all;
    for (int a = 0; a < n; ++a)
      for (int w : ws)
        for (int b = 0; b < n; ++b) all.emplace_back(a, w, b);
    for (int lab = 0; lab < (1 << n); ++lab)
      for (unsigned em = 0; em < (1u << all.size()); ++em) {
        Wts m;
        for (int a = 0; a < n; ++a)
          m.add_state("x" + std::to_string(a),
                      lab >> a & 1 ? std::set<std::string>{"p"} : std::set<std::string>{});
        for (std::size_t k = 0; k < all.size(); ++k)
          if (em >> k & 1) m.add_trans(std::get<0>(all[k]), std::get<1>(all[k]), std::get<2>(all[k]));
        auto v = sat_set(m, f);
        for (bool b : v)
          if (b) return true;
      }
  }
  return false;
}

TEST(Sat, AgreesWithSmallModelSearch) {
  // brute force only finds small models, so it certifies Sat; Unsat answers
  // are checked against it in one direction
  std::mt19937_64 rng(5);
  const std::vector<Rational> cs{0, 1, 2};
  int checked = 0;
  for (int k = 0; k < 150; ++k) {
    F f = random_wlwb(rng, 2, {"p"}, cs);
    bool small = brute_sat(f);
    SatResult r = satisfiable_wlwb(f);
    if (small) {
      EXPECT_TRUE(r.sat) << to_string(f);
    }
    if (r.sat) {
      EXPECT_TRUE(model_check_wlwb(r.model, r.witness, f));
    }
    ++checked;
  }
  EXPECT_EQ(checked, 150);
}

TEST(Axioms, SuiteHasNoViolations) {
  AxiomReport rep = axiom_soundness_suite(1, 60);
  EXPECT_GT(rep.instances, 600);
  EXPECT_TRUE(rep.violations.empty()) << rep.violations.front();
}

TEST(Axioms, NamedInstances) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 40; ++k) {
    Wts m = random_wts(rng, 4, 8, {"p"});
    for (int s = 0; s < m.size(); ++s) {
      EXPECT_TRUE(model_check_wlwb(m, s, parse_wlwb("!L 0 false")));
      EXPECT_TRUE(model_check_wlwb(m, s, parse_wlwb("!(L 2 p & !L 1 p)")));
      EXPECT_TRUE(model_check_wlwb(m, s, parse_wlwb("!(M 3 p & !L 0 p)")));
    }
  }
}

TEST(WtsFile, ParseAndSerialize) {
  std::ifstream in(std::string(STOCHPRE_MODELS) + "/bisim_figure.wts");
  std::stringstream ss;
  ss << in.rdbuf();
  Wts m = parse_wts(ss.str());
  EXPECT_EQ(m.size(), 4);
  EXPECT_EQ(m.edges().size(), 5u);
  Wts again = parse_wts(to_text(m));
  EXPECT_EQ(to_text(again), to_text(m));
  EXPECT_TRUE(gen_weighted_bisim(m, "s", "t"));
}

TEST(WtsFile, Errors) {
  EXPECT_THROW(parse_wts("state s {}"), SyntaxError);
  EXPECT_THROW(parse_wts("wts\nstate s {}\ntrans s -1 s"), SyntaxError);
  EXPECT_THROW(parse_wts("wts\nstate s {}\ntrans s 1 t"), UnknownState);
  try {
    parse_wts("wts\nstate s {}\nbogus");
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

}  // namespace
