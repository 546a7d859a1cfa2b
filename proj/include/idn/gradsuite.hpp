#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "idn/gradcheck.hpp"
#include "idn/objectives.hpp"

namespace idn {

// Finite-difference sweep over every loss term on small random models.
//
// Cases where a stencil straddles a kink even at the smallest step, or where a
// Euclidean distance comes within `margin_factor * eps` of zero, are redrawn:
// differences across a kink measure a secant rather than the derivative.
// The step is large because tiny gradients (1e-7 and below) need the
// rounding error of the difference quotient well under 1e-11.
struct GradSuiteOptions {
  std::uint64_t seed = 1;
  std::size_t cases = 100;
  Real eps = 1e-3;
  Real margin_factor = 20;
  std::size_t max_redraws = 1000;
};

struct GradSuiteResult {
  // Worst relative error per loss term and per layer (parameter name without
  // its trailing ".w" / ".b").
  std::map<std::string, Real> per_loss;
  std::map<std::string, Real> per_layer;
  Real max_error = 0;
  std::size_t cases = 0;
  std::size_t redraws = 0;
};

// Names of the checked loss terms, in report order.
std::vector<std::string> gradsuite_losses();

GradSuiteResult run_gradsuite(const GradSuiteOptions& options = {});

}  // namespace idn
