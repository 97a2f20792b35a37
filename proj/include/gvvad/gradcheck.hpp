#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace gvvad {

struct GradcheckBlock {
  std::string name;  // w1, b1, w2, b2, rho
  double max_rel_error = 0.0;
  std::size_t count = 0;
};

struct GradcheckReport {
  std::vector<GradcheckBlock> blocks;
  std::size_t batches = 0;
  double max_rel_error = 0.0;
  double tolerance = 1e-4;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Compares analytic gradients of L_total with central differences (h=1e-5)
/// on `batches` randomized small batches covering top-k selection, SSLS in
/// both granularities, the learnable-λ path and a non-zero hook term.
/// `corrupt` perturbs one analytic entry (negative control).
GradcheckReport run_gradcheck(std::uint64_t seed, std::size_t batches = 10, bool corrupt = false);

void print_report(const GradcheckReport& report, std::ostream& os);

}  // namespace gvvad
