#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nld/experiments.hpp"

namespace nld {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double limit_seconds = 0.0;
};

/// Runs the numbered acceptance criteria (1-10). Results of the long
/// optimization runs are shared between criteria within one suite.
class CheckSuite {
 public:
  /// Output of the table runs goes below `work_dir`.
  explicit CheckSuite(std::string work_dir, int threads = 0);

  CheckResult run(int id);
  std::vector<CheckResult> run(std::span<const int> ids, std::ostream* progress = nullptr);

  static constexpr int kCount = 10;

 private:
  CheckResult oracle_equivalence();
  CheckResult gradient_check();
  CheckResult coefficient_bracket();
  CheckResult partition_identity();
  CheckResult table_local_row();
  CheckResult table_nonlocal_row();
  CheckResult asymptotic_compatibility();
  CheckResult descent();
  CheckResult limit_probes();
  CheckResult determinism();

  StudyConfig table_config(const std::string& text, const std::string& subdir) const;

  std::string work_dir_;
  int threads_;
  std::map<std::string, std::vector<std::vector<double>>> histories_;
};

std::string format_check_line(const CheckResult& r);

}  // namespace nld
