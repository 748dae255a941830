// stochpre_cli: command-line front end. Prints one JSON document (or
// key/value text) on stdout; exit 0 when a verdict was computed, 2 on input
// errors, 3 when a resource guard trips.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stochpre/selftest.hpp"
#include "stochpre/stochpre.hpp"

using namespace stochpre;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kInputError = 2;
constexpr int kGuard = 3;

// Carries the file an error came from into the diagnostic.
struct FileError : std::runtime_error {
  FileError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(line > 0 ? file + ":" + std::to_string(line) + ": " + what
                                    : file + ": " + what) {}
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path, 0, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Parse>
auto parse_file(const std::string& path, Parse parse) {
  std::string text = read_file(path);
  try {
    return parse(text);
  } catch (const SyntaxError& e) {
    throw FileError(path, e.line(), e.what());
  } catch (const Error& e) {
    throw FileError(path, 0, e.what());
  }
}

Smp load_smp(const std::string& path) {
  return parse_file(path, [](const std::string& t) { return parse_smp(t); });
}

Wts load_wts(const std::string& path) {
  return parse_file(path, [](const std::string& t) { return parse_wts(t); });
}

// A formula argument is either a file holding the formula or the formula
// itself. Comment lines (#) in files are dropped.
std::string formula_text(const std::string& arg) {
  if (!std::filesystem::is_regular_file(arg)) return arg;
  std::stringstream in(read_file(arg)), out;
  for (std::string line; std::getline(in, line);)
    if (auto p = line.find('#'); p != std::string::npos) out << line.substr(0, p) << ' ';
    else out << line << ' ';
  return out.str();
}

template <class Parse>
auto parse_formula(const std::string& arg, Parse parse) {
  std::string text = formula_text(arg);
  try {
    return parse(text);
  } catch (const SyntaxError& e) {
    throw FileError(arg == text ? "<formula>" : arg, e.line(), e.what());
  }
}

// Integral values print without a fraction; infinity as the string "inf".
Json num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  if (v == std::floor(v) && std::abs(v) < 1e15) return static_cast<long long>(v);
  return v;
}

double parse_number(const std::string& s) {
  try {
    return to_double(parse_rational(s));
  } catch (const Error&) {
    throw FileError("<argument>", 0, "not a number: '" + s + "'");
  }
}

std::vector<std::string> split_word(const std::string& w) {
  std::vector<std::string> out;
  if (w.find(',') != std::string::npos) {
    std::stringstream ss(w);
    for (std::string a; std::getline(ss, a, ',');)
      if (!a.empty()) out.push_back(a);
  } else {
    for (char c : w) out.emplace_back(1, c);
  }
  return out;
}

Json witness_json(const Smp& v, const FasterWitness& w) {
  Json j;
  Json word = Json::array();
  for (int o : w.word) word.push_back(v.outputs().at(o));
  j["word"] = word;
  j["t"] = num(w.t);
  j["p_fast"] = num(w.p_fast);
  j["p_slow"] = num(w.p_slow);
  if (!w.scheduler.empty()) j["scheduler"] = w.scheduler;
  if (!w.note.empty()) j["note"] = w.note;
  return j;
}

Json tableau_json(const TableauNode& n) {
  Json j;
  j["gamma"] = n.gamma;
  j["interval_l"] = n.interval_l;
  j["interval_m"] = n.interval_m;
  j["rule"] = n.rule;
  j["closed"] = n.closed;
  Json kids = Json::array();
  for (const auto& c : n.children) kids.push_back(tableau_json(c));
  j["children"] = kids;
  return j;
}

void print_text(const Json& j, const std::string& prefix = "") {
  for (const auto& [k, v] : j.items()) {
    if (v.is_object()) {
      print_text(v, prefix + k + ".");
    } else if (v.is_string()) {
      std::string s = v.get<std::string>();
      if (s.find('\n') != std::string::npos)
        std::cout << prefix << k << ":\n" << s;
      else
        std::cout << prefix << k << ": " << s << "\n";
    } else {
      std::cout << prefix << k << ": " << v.dump() << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic preorders: simulation distance, faster-than, WLWB and TML tools"};
  app.require_subcommand(1);
  std::string format = "json";
  int grid_points = 0;
  double scheduler_limit = kSchedulerLimit;
  std::uint64_t seed = 1;
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--grid-points", grid_points,
                 "CDF comparison grid size (default from STOCHPRE_GRID_POINTS, else 2048)")
      ->check(CLI::Range(16, 1 << 22));
  app.add_option("--scheduler-limit", scheduler_limit, "Cap on enumerated schedulers")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed for randomised commands");

  Json out;
  std::function<void()> action;
  std::string a1, a2, a3, a4, a5, a6;

  auto* mc_wlwb = app.add_subcommand("mc-wlwb", "Model-check a WLWB formula at a WTS state");
  mc_wlwb->add_option("model", a1)->required();
  mc_wlwb->add_option("state", a2)->required();
  mc_wlwb->add_option("formula", a3, "Formula text or file")->required();
  mc_wlwb->callback([&] {
    action = [&] {
      Wts m = load_wts(a1);
      WFormula f = parse_formula(a3, [](const std::string& t) { return parse_wlwb(t); });
      out["state"] = a2;
      out["formula"] = to_string(f);
      out["holds"] = model_check_wlwb(m, a2, f);
    };
  });

  bool with_tableau = false;
  auto* sat = app.add_subcommand("sat-wlwb", "Decide satisfiability of a WLWB formula");
  sat->add_option("formula", a1, "Formula text or file")->required();
  sat->add_flag("--tableau", with_tableau, "Include the tableau");
  sat->callback([&] {
    action = [&] {
      WFormula f = parse_formula(a1, [](const std::string& t) { return parse_wlwb(t); });
      auto r = satisfiable_wlwb(f);
      out["formula"] = to_string(f);
      out["sat"] = r.sat;
      if (r.sat) {
        out["witness"] = r.model.name(r.witness);
        out["model"] = to_text(r.model);
      }
      if (with_tableau) out["tableau"] = tableau_json(r.tableau);
    };
  });

  auto* bisim = app.add_subcommand("bisim", "Weighted bisimilarity of two WTS states");
  bisim->add_option("model", a1)->required();
  bisim->add_option("s", a2)->required();
  bisim->add_option("t", a3)->required();
  bisim->callback([&] {
    action = [&] {
      Wts m = load_wts(a1);
      int s = m.index(a2), t = m.index(a3);
      bool b = weighted_bisim(m, s, t);
      out["bisimilar"] = b;
      // the logic characterises the generalized relation, so a formula may not exist
      if (!b)
        if (auto f = distinguishing_formula(m, s, t)) out["distinguishing"] = to_string(*f);
    };
  });

  auto* gbisim = app.add_subcommand("gen-bisim", "Generalized weighted bisimilarity");
  gbisim->add_option("model", a1)->required();
  gbisim->add_option("s", a2)->required();
  gbisim->add_option("t", a3)->required();
  gbisim->callback([&] {
    action = [&] {
      Wts m = load_wts(a1);
      out["bisimilar"] = gen_weighted_bisim(m, m.index(a2), m.index(a3));
    };
  });

  bool with_relation = false;
  auto* simdist = app.add_subcommand("simdist", "Simulation distance d(s1, s2)");
  simdist->add_option("model", a1)->required();
  simdist->add_option("s1", a2)->required();
  simdist->add_option("s2", a3)->required();
  simdist->add_flag("--relation", with_relation, "Include the eps-simulation witnessing d");
  simdist->callback([&] {
    action = [&] {
      Smp m = load_smp(a1);
      auto d = simulation_distance(m, m.index(a2), m.index(a3));
      out["distance"] = num(d.value);
      if (with_relation) {
        Json pairs = Json::array();
        for (int x = 0; x < m.size() && !d.witness.empty(); ++x)
          for (int y = 0; y < m.size(); ++y)
            if (d.witness[x][y]) pairs.push_back({m.name(x), m.name(y)});
        out["relation"] = pairs;
      }
    };
  });

  auto* epssim = app.add_subcommand("eps-sim", "Decide s1 eps-simulated by s2");
  epssim->add_option("model", a1)->required();
  epssim->add_option("s1", a2)->required();
  epssim->add_option("s2", a3)->required();
  epssim->add_option("eps", a4)->required();
  epssim->callback([&] {
    action = [&] {
      Smp m = load_smp(a1);
      double eps = parse_number(a4);
      if (!(eps >= 1)) throw FileError("<argument>", 0, "eps must be at least 1");
      out["eps"] = num(eps);
      out["simulates"] = eps_simulates(m, m.index(a2), m.index(a3), eps);
    };
  });

  auto* mctml = app.add_subcommand("mc-tml", "Model-check a TML formula at an SMP state");
  mctml->add_option("model", a1)->required();
  mctml->add_option("state", a2)->required();
  mctml->add_option("formula", a3, "Formula text or file")->required();
  mctml->callback([&] {
    action = [&] {
      Smp m = load_smp(a1);
      TFormula f = parse_formula(a3, [](const std::string& t) { return parse_tml(t); });
      out["state"] = a2;
      out["formula"] = to_string(f);
      out["holds"] = model_check_tml(m, m.index(a2), f);
    };
  });

  auto* pert = app.add_subcommand("perturb", "Rescale the time constants of a TML formula");
  pert->add_option("formula", a1, "Formula text or file")->required();
  pert->add_option("eps", a2)->required();
  pert->callback([&] {
    action = [&] {
      TFormula f = parse_formula(a1, [](const std::string& t) { return parse_tml(t); });
      Rational eps = parse_rational(a2);
      if (eps < 1) throw FileError("<argument>", 0, "eps must be at least 1");
      out["formula"] = to_string(perturb(f, eps));
    };
  });

  bool unambiguous = false;
  std::vector<std::string> approx;
  std::string u0_name, v0_name;
  int horizon = 0;
  auto* faster = app.add_subcommand("faster-than", "Trace-based faster-than between two processes");
  faster->add_option("modelU", a1)->required();
  faster->add_option("modelV", a2)->required();
  faster->add_option("--u0", u0_name, "Start state of U (default: first)");
  faster->add_option("--v0", v0_name, "Start state of V (default: first)");
  auto* unamb_flag = faster->add_flag("--unambiguous", unambiguous, "Exact decider for unambiguous processes");
  faster->add_option("--approx", approx, "Additive approximation: eps b")
      ->expected(2)
      ->excludes(unamb_flag);
  faster->add_option("--horizon", horizon, "Cap the approximation's word length")
      ->check(CLI::PositiveNumber);
  faster->callback([&] {
    action = [&] {
      Smp u = load_smp(a1), v = load_smp(a2);
      int u0 = u0_name.empty() ? 0 : u.index(u0_name), v0 = v0_name.empty() ? 0 : v.index(v0_name);
      FasterVerdict r;
      if (!approx.empty()) {
        ApproxOptions opt;
        opt.limit = scheduler_limit;
        if (horizon > 0) opt.horizon_override = horizon;
        r = time_bounded_additive_faster(u, u0, v, v0, parse_number(approx[0]),
                                         parse_number(approx[1]), opt);
      } else {
        r = faster_than_unambiguous(u, u0, v, v0);
      }
      out["method"] = r.method;
      out["holds"] = r.holds;
      out["exact"] = r.exact;
      if (!r.exact)
        out["caveat"] =
            "grid comparison over enumerated deterministic schedulers; not a decision procedure";
      out["checks"] = r.checks;
      if (r.witness) out["witness"] = witness_json(v, *r.witness);
    };
  });

  int reach_horizon = 20;
  double precision = 1.0;
  auto* reach = app.add_subcommand("reach", "Time-bounded reachability under the uniform scheduler");
  reach->add_option("model", a1)->required();
  reach->add_option("state", a2)->required();
  reach->add_option("target", a3, "TML formula (text or file) for the target")->required();
  reach->add_option("t", a4)->required();
  reach->add_option("--horizon", reach_horizon, "Transitions explored")->check(CLI::PositiveNumber);
  reach->add_option("--precision", precision, "Fail when upper - lower exceeds this");
  reach->callback([&] {
    action = [&] {
      Smp m = load_smp(a1);
      TFormula beta = parse_formula(a3, [](const std::string& t) { return parse_tml(t); });
      auto r = reachability_prob(m, Scheduler::uniform(m), m.index(a2), beta, parse_number(a4),
                                 reach_horizon, precision);
      out["scheduler"] = "uniform";
      out["lower"] = num(r.lower);
      out["upper"] = num(r.upper);
    };
  });

  auto* comp = app.add_subcommand("compose", "Synchronous parallel composition");
  comp->add_option("modelU", a1)->required();
  comp->add_option("modelV", a2)->required();
  comp->add_option("star", a3, "max-cdf, min-cdf, product-rate, min-rate or max-rate")->required();
  comp->callback([&] {
    action = [&] {
      Smp c = compose(load_smp(a1), load_smp(a2), parse_composition_kind(a3));
      out["states"] = c.size();
      out["model"] = to_text(c);
    };
  });

  int bounded = 0;
  auto* mono = app.add_subcommand("check-monotonic", "Strong monotonicity of U, V in contexts W, W2");
  mono->add_option("modelU", a1)->required();
  mono->add_option("modelV", a2)->required();
  mono->add_option("modelW", a3)->required();
  mono->add_option("modelW2", a4, "Context of V (default: modelW)");
  mono->add_option("--star", a5, "max-cdf, min-cdf, product-rate, min-rate or max-rate")
      ->required();
  mono->add_option("--bounded", bounded,
                   "Check the scheduler-existential conditions up to this path length instead")
      ->check(CLI::PositiveNumber);
  mono->callback([&] {
    action = [&] {
      Smp u = load_smp(a1), v = load_smp(a2), w = load_smp(a3);
      Smp w2 = a4.empty() ? w : load_smp(a4);
      auto star = parse_composition_kind(a5);
      auto r = bounded > 0
                   ? monotonic_bounded(u, 0, v, 0, w, 0, w2, 0, star, bounded, scheduler_limit)
                   : strong_monotonic(u, v, w, w2, star);
      out["holds"] = r.holds;
      out["complete"] = r.complete;
      out["numeric"] = r.numeric;
      out["bound"] = r.bound;
      if (r.violated) out["violated"] = to_string(*r.violated);
      if (r.witness) {
        Json j;
        j["path"] = r.witness->path;
        j["context_path"] = r.witness->context_path;
        j["index"] = r.witness->index;
        if (r.witness->t) j["t"] = num(*r.witness->t);
        if (!r.witness->input.empty()) j["input"] = r.witness->input;
        if (!r.witness->detail.empty()) j["detail"] = r.witness->detail;
        out["witness"] = j;
      }
    };
  });

  auto* anom = app.add_subcommand("anomaly", "Look for a parallel timing anomaly");
  anom->add_option("modelU", a1)->required();
  anom->add_option("modelV", a2)->required();
  anom->add_option("modelW", a3)->required();
  anom->add_option("--star", a4, "max-cdf, min-cdf, product-rate, min-rate or max-rate")
      ->required();
  anom->add_option("--word", a5, "Input word, e.g. aa or a,b")->required();
  anom->add_option("--t", a6, "Time bound")->required();
  anom->callback([&] {
    action = [&] {
      Smp u = load_smp(a1), v = load_smp(a2), w = load_smp(a3);
      auto r = detect_anomaly(u, v, w, parse_composition_kind(a4), split_word(a5), parse_number(a6));
      out["p_uw"] = num(r.p_uw);
      out["p_vw"] = num(r.p_vw);
      out["p_u"] = num(r.p_u);
      out["p_v"] = num(r.p_v);
      out["anomaly"] = r.anomaly;
    };
  });

  int n_models = 200, per_model = 8;
  auto* axioms = app.add_subcommand("axioms", "Random soundness check of the WLWB axioms and rules");
  axioms->add_option("--models", n_models)->check(CLI::PositiveNumber);
  axioms->add_option("--per-model", per_model)->check(CLI::PositiveNumber);
  axioms->callback([&] {
    action = [&] {
      auto r = axiom_soundness_suite(seed, n_models, per_model);
      out["seed"] = seed;
      out["instances"] = r.instances;
      out["sound"] = r.violations.empty();
      out["violations"] = r.violations;
    };
  });

  auto* self = app.add_subcommand("selftest", "Run the worked examples and compare with known answers");
  self->callback([&] {
    action = [&] {
      auto rows = selftest::run();
      bool all = true;
      if (format == "text") {
        for (const auto& r : rows) {
          std::cout << (r.pass ? "PASS" : "FAIL") << "  [" << r.criterion << "] " << r.name
                    << "\n      expected: " << r.expected << "\n      actual:   " << r.actual
                    << "\n";
          all = all && r.pass;
        }
        std::cout << (all ? "all passed" : "some failed") << "\n";
        return;
      }
      Json arr = Json::array();
      for (const auto& r : rows) {
        arr.push_back({{"criterion", r.criterion},
                       {"name", r.name},
                       {"expected", r.expected},
                       {"actual", r.actual},
                       {"pass", r.pass}});
        all = all && r.pass;
      }
      out["rows"] = arr;
      out["pass"] = all;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  if (grid_points > 0) setenv("STOCHPRE_GRID_POINTS", std::to_string(grid_points).c_str(), 1);

  try {
    action();
  } catch (const FileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ExplosionGuard& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return kGuard;
  } catch (const HorizonTooShort& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return kGuard;
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }

  if (out.is_null()) return 0;
  if (format == "text")
    print_text(out);
  else
    std::cout << out.dump(2) << "\n";
  return 0;
}
