#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <set>

#include "dgstgcn/runtime.hpp"
#include "dgstgcn/verify/checks.hpp"

// Usage: acceptance [criterion ids...] [-v]. Prints one line per criterion.
int main(int argc, char **argv) {
  dgstgcn::tune_allocator();
  std::set<int> only;
  bool verbose = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "-v")
      verbose = true;
    else
      only.insert(std::atoi(argv[i]));
  }
  int failed = 0;
  for (const auto &c : dgstgcn::verify::acceptance_criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    dgstgcn::verify::CheckList result;
    try {
      result = c.run();
    } catch (const std::exception &e) {
      result.add("exception", false, e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = seconds < c.budget_seconds;
    const bool ok = result.passed() && in_budget;
    failed += !ok;
    std::string note = result.summary();
    if (!in_budget) note += "; over the " + std::to_string(static_cast<int>(c.budget_seconds)) + " s budget";
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", ok ? "PASS" : "FAIL", c.id, c.title.c_str(), note.c_str(),
                seconds);
    if (verbose || !ok)
      for (const auto &item : result.items)
        std::printf("    %s %s  %s\n", item.passed ? "ok  " : "FAIL", item.name.c_str(), item.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
