// One PASS/FAIL line per acceptance criterion. Criterion 6 runs the property
// suite binary and reads its gtest summary.

#include <array>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <sys/wait.h>

#include "stochpre/selftest.hpp"

namespace {

struct Line {
  bool pass = true;
  std::string detail;
  double seconds = 0;
};

const std::map<int, std::string> kTitles{
    {1, "simulation distance on the Exp(4)/Exp(2) pair"},
    {2, "parallel timing anomalies (product, minimum, maximum)"},
    {3, "WLWB satisfiability"},
    {4, "generalized bisimulation figure"},
    {5, "acceleration constants, closed form vs numeric"},
    {6, "property suites, 500 instances each, under 5 min"},
    {7, "faster-than incomparability"},
    {8, "slow bound and additive self-comparison"},
};

Line property_suites() {
  Line l;
  auto t0 = std::chrono::steady_clock::now();
  std::string cmd = std::string(STOCHPRE_PROPERTIES_BIN) + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {false, "cannot start " STOCHPRE_PROPERTIES_BIN, 0};
  std::string out;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), p)) out += buf.data();
  int status = pclose(p);
  l.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::set<std::string> failed;
  const std::string tag = "[  FAILED  ] ";
  for (std::size_t pos = out.find(tag); pos != std::string::npos; pos = out.find(tag, pos + 1)) {
    std::size_t end = out.find_first_of(" \n", pos + tag.size());
    std::string name = out.substr(pos + tag.size(), end - pos - tag.size());
    if (name.find('.') != std::string::npos) failed.insert(name);
  }
  bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
  l.pass = ok && l.seconds < 300;
  if (!failed.empty()) {
    l.detail = "failed:";
    for (const auto& f : failed) l.detail += " " + f;
  } else if (!ok) {
    l.detail = "suite did not complete";
  } else {
    l.detail = "all suites passed";
  }
  if (l.seconds >= 300) l.detail += "; over the 300 s budget";
  return l;
}

}  // namespace

int main() {
  std::map<int, Line> lines;
  for (const auto& row : stochpre::selftest::run()) {
    Line& l = lines[row.criterion];
    l.seconds += row.seconds;
    if (!row.pass) {
      l.pass = false;
      l.detail += (l.detail.empty() ? "" : "; ") + row.name + ": " + row.actual;
    }
  }
  lines[6] = property_suites();
  bool all = true;
  for (const auto& [id, title] : kTitles) {
    const Line& l = lines[id];
    all = all && l.pass;
    std::printf("%s %d %s (%.2f s)%s%s\n", l.pass ? "PASS" : "FAIL", id, title.c_str(), l.seconds,
                l.detail.empty() ? "" : " - ", l.detail.c_str());
  }
  return all ? 0 : 1;
}
