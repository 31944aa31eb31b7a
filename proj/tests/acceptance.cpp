// Runs acceptance criteria 1-10 and prints one line per criterion.
// Usage: acceptance [work_dir] [criterion ...]

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "nld/checks.hpp"

int main(int argc, char** argv) {
  const std::string work = argc > 1 ? argv[1] : (std::filesystem::temp_directory_path() / "nld_acceptance").string();
  std::vector<int> ids;
  for (int k = 2; k < argc; ++k) ids.push_back(std::atoi(argv[k]));
  if (ids.empty())
    for (int k = 1; k <= nld::CheckSuite::kCount; ++k) ids.push_back(k);
  std::filesystem::create_directories(work);

  nld::CheckSuite suite(work);
  const auto results = suite.run(ids, &std::cout);
  int failed = 0;
  for (const auto& r : results) failed += !r.passed;
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
