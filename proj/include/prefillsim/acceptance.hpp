#pragma once

// Self-contained acceptance gate: ten numbered criteria covering oracle
// equivalence, formula exactness, direction-of-effect reproduction, and
// determinism. Every tolerance is pinned in the implementation; each
// result carries the measured numbers so a failure is diagnosable from
// the one-line report alone.

#include <string>
#include <vector>

namespace prefillsim {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;  // measured values and the tolerance applied
};

// Runs all ten criteria in order. Never throws: an unexpected exception
// inside a criterion is reported as that criterion's failure.
std::vector<CriterionResult> run_acceptance();

// Prints one [PASS]/[FAIL] line per criterion plus a summary line.
// Returns 0 iff every criterion passed.
int acceptance_main();

}  // namespace prefillsim
