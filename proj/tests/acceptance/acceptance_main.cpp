// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Optional arguments restrict the run to the listed criterion ids.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "bbm/harness/acceptance.hpp"
#include "bbm/harness/parallel.hpp"

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::stoi(argv[i]));

  bbm::acceptance::Options opt;
  opt.workers = bbm::harness::resolve_workers(0);
  opt.log = &std::cerr;

  int failures = 0;
  const auto results = bbm::acceptance::run_suite(opt, ids, [&](const auto& r) {
    std::cout << bbm::acceptance::format_line(r) << std::endl;
    if (!r.passed) ++failures;
  });
  std::cout << (failures == 0 ? "ALL PASS" : "FAILURES: " + std::to_string(failures)) << " (" << results.size()
            << " criteria)" << std::endl;
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
