#pragma once

#include <functional>
#include <map>
#include <span>
#include <vector>
#include <string>

#include "idn/autodiff.hpp"

namespace idn {

// A differentiable scalar function of the parameters bound to the graph.
using ScalarFn = std::function<Var(Graph&)>;
// Several scalars sharing one forward pass.
using MultiFn = std::function<std::vector<Var>(Graph&)>;

struct GradCheckReport {
  Real max_relative_error = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  Real analytic = 0;
  Real numeric = 0;
  // Margins of the unperturbed evaluation; see Graph.
  Real kink_margin = 0;
  Real singular_margin = 0;
  // Entries whose stencil still straddled a kink at the smallest step.
  std::size_t kink_crossings = 0;
  std::size_t entries = 0;
  // Largest error per parameter name, over the parameters the function reads.
  std::map<std::string, Real> per_parameter;
};

Real evaluate_scalar(const ScalarFn& f, const ParamSet& params);

// Compares analytic gradients against a fourth-order central difference
// starting at step eps. When a probe lands on a different piece of a
// piecewise function (ReLU side, hinge side, threshold argmin) the step is
// halved, up to 12 times; entries that never settle count as kink_crossings.
// Relative error per entry is |a - n| / max(|a|, |n|, 1e-8). Parameters the
// function never reads are not perturbed; their analytic gradient must be 0.
GradCheckReport grad_check_report(const ScalarFn& f, const ParamSet& params, Real eps);
// Same, against caller-supplied analytic gradients.
GradCheckReport grad_check_report(const ScalarFn& f, const ParamSet& params, Real eps, const Gradients& analytic);

// One report per output, all outputs probed from the same perturbed
// evaluations. The kink signature covers every output together.
std::vector<GradCheckReport> grad_check_reports(const MultiFn& f, const ParamSet& params, Real eps);
std::vector<GradCheckReport> grad_check_reports(const MultiFn& f, const ParamSet& params, Real eps,
                                                std::span<const Gradients> analytic);

Real grad_check(const ScalarFn& f, const ParamSet& params, Real eps);

}  // namespace idn
