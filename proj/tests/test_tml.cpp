#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "gen.hpp"
#include "oracles.hpp"
#include "stochpre/tml.hpp"

using namespace stochpre;

namespace {

Smp load(const std::string& name) {
  std::ifstream in(std::string(STOCHPRE_MODELS) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_smp(ss.str());
}

TEST(TmlParse, Grammar) {
  TFormula f = parse_tml("Lp 1/2 a (l 0.5 2 & !p) | q");
  ASSERT_EQ(f.op, TOp::Or);
  ASSERT_EQ(f.kids[0].op, TOp::LProb);
  EXPECT_EQ(f.kids[0].p, Rational(1, 2));
  EXPECT_EQ(f.kids[0].name, "a");
  EXPECT_EQ(f.kids[0].kids[0].op, TOp::And);
  EXPECT_EQ(f.kids[0].kids[0].kids[1], TFormula::neg_atom("p"));
  EXPECT_EQ(parse_tml(to_string(f)), f);
  EXPECT_EQ(depth(parse_tml("Mp 0 a Lp 1 b p")), 2);
}

TEST(TmlParse, Errors) {
  EXPECT_THROW(parse_tml("l 2 1"), SyntaxError);
  EXPECT_THROW(parse_tml("l 0.5 -1"), SyntaxError);
  EXPECT_THROW(parse_tml("!(p)"), SyntaxError);
  EXPECT_THROW(parse_tml("p &"), SyntaxError);
  EXPECT_THROW(parse_tml("Lp 0.5 p"), SyntaxError);
}

TEST(TmlFragments, Membership) {
  EXPECT_TRUE(in_fragment(parse_tml("l 0.5 1 & Lp 1 a p"), Fragment::Geq));
  EXPECT_FALSE(in_fragment(parse_tml("l 0.5 1 & Mp 1 a p"), Fragment::Geq));
  EXPECT_TRUE(in_fragment(parse_tml("m 0.5 1 | !p"), Fragment::Leq));
  EXPECT_FALSE(in_fragment(parse_tml("Mp 1 a l 0 0"), Fragment::Leq));
}

TEST(TmlCheck, Examples) {
  Smp m = load("exp_pair.smp");
  // 1 - e^-1 at t = 1/4 for rate 4
  EXPECT_TRUE(model_check_tml(m, m.index("s1"), parse_tml("l 0.5 0.25")));
  EXPECT_FALSE(model_check_tml(m, m.index("s2"), parse_tml("l 0.5 0.25")));
  EXPECT_TRUE(model_check_tml(m, m.index("s2"), parse_tml("m 0.5 0.25")));
  EXPECT_TRUE(model_check_tml(m, 0, parse_tml("Lp 0 a l 1 0")));
  EXPECT_TRUE(model_check_tml(m, 0, parse_tml("Lp 1 a l 0.5 0.25")));
  EXPECT_FALSE(model_check_tml(m, 1, parse_tml("Lp 1/2 a l 0.5 0.25")));
  EXPECT_TRUE(model_check_tml(m, 1, parse_tml("Mp 0 a l 0.5 0.25")));
  EXPECT_THROW(model_check_tml(m, 0, parse_tml("Lp 1 z p")), UnknownInput);
}

TEST(TmlCheck, Atoms) {
  Smp u = load("two_chain_u.smp");
  EXPECT_TRUE(model_check_tml(u, 2, parse_tml("done")));
  EXPECT_FALSE(model_check_tml(u, 2, parse_tml("!done")));
  EXPECT_TRUE(model_check_tml(u, 0, parse_tml("!done & Lp 1 a Lp 1 a done")));
}

TEST(Perturb, Rules) {
  EXPECT_EQ(perturb(parse_tml("l 0.5 2"), 2), parse_tml("l 0.5 4"));
  EXPECT_EQ(perturb(parse_tml("p"), 3), parse_tml("p"));
  TFormula f = parse_tml("Lp 1/3 a (m 0.2 3/2 | l 1 1) & !q");
  EXPECT_EQ(perturb(f, 1), f);
  EXPECT_EQ(perturb(perturb(f, Rational(3, 2)), 4), perturb(f, 6));
  EXPECT_EQ(perturb(f, 2), parse_tml("Lp 1/3 a (m 0.2 3 | l 1 2) & !q"));
}

TEST(Harness, ExpPairAtTwo) {
  Smp m = load("exp_pair.smp");
  auto r = characterisation_harness(m, 0, 1, 2);
  EXPECT_TRUE(r.simulates);
  EXPECT_GE(r.formulas, 4u);
  EXPECT_TRUE(r.counterexamples.empty()) << to_string(r.counterexamples.front());
}

TEST(Harness, ExpPairAtOneAndAHalf) {
  Smp m = load("exp_pair.smp");
  auto r = characterisation_harness(m, 0, 1, Rational(3, 2));
  EXPECT_FALSE(r.simulates);
  ASSERT_FALSE(r.witnesses.empty());
  bool timing = false;
  for (const auto& w : r.witnesses)
    if (w.op == TOp::Ell) {
      timing = true;
      EXPECT_TRUE(model_check_tml(m, 0, w));
      EXPECT_FALSE(model_check_tml(m, 1, perturb(w, Rational(3, 2))));
    }
  EXPECT_TRUE(timing);
}

TEST(Harness, SameState) {
  Smp m = load("incomparable.smp");
  for (int s = 0; s < m.size(); ++s) {
    auto r = characterisation_harness(m, s, s, 1);
    EXPECT_TRUE(r.simulates);
    EXPECT_TRUE(r.counterexamples.empty());
    EXPECT_TRUE(r.witnesses.empty());
  }
}

TEST(Harness, BisimilarStatesAgree) {
  Smp m = load("incomparable.smp");
  int u0 = m.index("u0"), v0 = m.index("v0");
  for (Fragment fr : {Fragment::Full})
    for (const auto& f : enumerate_tml(m, fr, 2, 1))
      EXPECT_EQ(model_check_tml(m, u0, f), model_check_tml(m, v0, f)) << to_string(f);
}

// The <= half fails for M under a faster successor. s1 moves to a slower
// state than s2 does, so Mp 0 a (m p t) holds at s2 and not at s1 whenever
// F_x(t) <= p < F_y(t).
TEST(Harness, LeqModalityCounterexample) {
  Smp m(SmpKind::Reactive, {"a"});
  m.add_state("s1", Cdf::exponential(1));
  m.add_state("s2", Cdf::exponential(1));
  m.add_state("x", Cdf::exponential(1));
  m.add_state("y", Cdf::exponential(2));
  m.add_trans("s1", "a", 1, "x");
  m.add_trans("s2", "a", 1, "y");
  m.add_trans("x", "a", 1, "x");
  m.add_trans("y", "a", 1, "y");
  int s1 = m.index("s1"), s2 = m.index("s2");
  EXPECT_TRUE(eps_simulates(m, s1, s2, 1));
  TFormula f = parse_tml("Mp 0 a m 0.7 1");
  EXPECT_TRUE(in_fragment(f, Fragment::Leq));
  EXPECT_TRUE(model_check_tml(m, s2, f));
  EXPECT_FALSE(model_check_tml(m, s1, f));
  auto r = characterisation_harness(m, s1, s2, 1);
  EXPECT_TRUE(r.simulates);
  ASSERT_FALSE(r.counterexamples.empty());
  for (const auto& g : r.counterexamples) {
    EXPECT_FALSE(in_fragment(g, Fragment::Geq)) << to_string(g);
    EXPECT_TRUE(in_fragment(g, Fragment::Leq)) << to_string(g);
  }
}

TEST(Reach, StartInTarget) {
  Smp u = load("two_chain_u.smp");
  auto r = reachability_prob(u, Scheduler::uniform(u), 2, parse_tml("done"), 0, 3);
  EXPECT_EQ(r.lower, 1);
  EXPECT_EQ(r.upper, 1);
}

TEST(Reach, TwoChain) {
  Smp u = load("two_chain_u.smp");
  auto r = reachability_prob(u, Scheduler::uniform(u), 0, parse_tml("done"), 2, 4);
  EXPECT_NEAR(r.lower, oracle::hypoexp2(2, 0.5, 2), 1e-12);
  EXPECT_NEAR(r.upper, r.lower, 1e-15);
}

TEST(Reach, Unreachable) {
  Smp u = load("two_chain_u.smp");
  auto r = reachability_prob(u, Scheduler::uniform(u), 0, parse_tml("nowhere"), 5, 4);
  EXPECT_EQ(r.lower, 0);
  EXPECT_EQ(r.upper, 0);
}

TEST(Reach, TruncationIsVisible) {
  // geometric loop: leave to the target with 1/2 per step
  Smp m(SmpKind::Reactive, {"a"});
  m.add_state("x", Cdf::dirac(0));
  m.add_state("y", Cdf::dirac(0), {"goal"});
  m.add_trans("x", "a", Rational(1, 2), "x");
  m.add_trans("x", "a", Rational(1, 2), "y");
  auto r = reachability_prob(m, Scheduler::uniform(m), 0, parse_tml("goal"), 1, 3);
  EXPECT_DOUBLE_EQ(r.lower, 0.875);
  EXPECT_DOUBLE_EQ(r.upper, 1.0);
  EXPECT_THROW(reachability_prob(m, Scheduler::uniform(m), 0, parse_tml("goal"), 1, 3, 0.01),
               HorizonTooShort);
  auto deep = reachability_prob(m, Scheduler::uniform(m), 0, parse_tml("goal"), 1, 20, 0.01);
  EXPECT_NEAR(deep.lower, 1 - std::pow(0.5, 20), 1e-15);
}

TEST(Reach, AgreesWithCylinderOnChains) {
  Smp u = load("two_chain_u.smp");
  for (double t : {0.3, 1.0, 2.0, 6.0}) {
    auto r = reachability_prob(u, Scheduler::uniform(u), 0, parse_tml("done"), t, 5);
    EXPECT_NEAR(r.lower, cylinder_prob(u, Scheduler::uniform(u), 0, {0, 0}, t), 1e-12);
  }
}

}  // namespace
