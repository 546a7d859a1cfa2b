#include "idn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace idn {

Real evaluate_scalar(const ScalarFn& f, const ParamSet& params) {
  Graph g(&params);
  const Real v = g.scalar(f(g));
  if (!std::isfinite(v)) throw NumericError("function value is not finite");
  return v;
}

namespace {

struct Probe {
  std::vector<Real> values;
  std::uint64_t signature;
};

Probe probe_at(const MultiFn& f, const ParamSet& params) {
  Graph g(&params);
  const auto outs = f(g);
  Probe p{{}, 0};
  for (Var v : outs) {
    const Real x = g.scalar(v);
    if (!std::isfinite(x)) throw NumericError("function value is not finite");
    p.values.push_back(x);
  }
  p.signature = g.kink_signature();
  return p;
}

constexpr int kMaxHalvings = 12;

}  // namespace

std::vector<GradCheckReport> grad_check_reports(const MultiFn& f, const ParamSet& params, Real eps,
                                                std::span<const Gradients> analytic) {
  if (!(eps > 0)) throw ContractError(fmt::format("finite-difference step must be positive, got {}", eps));
  std::vector<GradCheckReport> reports;
  std::vector<std::vector<std::string>> touched;
  std::vector<std::string> any_touched;
  std::uint64_t base_signature = 0;
  {
    Graph g(&params);
    const auto outs = f(g);
    if (outs.size() != analytic.size()) {
      throw ContractError(fmt::format("{} outputs but {} analytic gradients", outs.size(), analytic.size()));
    }
    // Which parameters each output reads; an output that never reads a
    // parameter must report an exactly zero gradient for it.
    for (Var v : outs) {
      if (!std::isfinite(g.scalar(v))) throw NumericError("function value is not finite");
      touched.push_back(g.parameters_reaching(v));
      GradCheckReport r;
      r.kink_margin = g.kink_margin();
      r.singular_margin = g.singular_margin();
      reports.push_back(r);
    }
    base_signature = g.kink_signature();
    any_touched = g.touched_parameters();
  }
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    for (const auto& name : params.names()) {
      if (!analytic[k].contains(name)) throw ContractError("no analytic gradient for '" + name + "'");
    }
  }
  auto reads = [&](std::size_t k, const std::string& name) {
    return std::binary_search(touched[k].begin(), touched[k].end(), name);
  };

  ParamSet probe = params;
  for (const auto& name : params.names()) {
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      if (reads(k, name)) continue;
      for (Real a : analytic[k].at(name).data()) {
        if (a != 0) throw ContractError("nonzero analytic gradient for unread parameter '" + name + "'");
      }
    }
    if (!std::binary_search(any_touched.begin(), any_touched.end(), name)) continue;
    const Tensor original = params.at(name);
    for (std::size_t i = 0; i < original.size(); ++i) {
      Tensor& p = probe.mutable_at(name);
      std::vector<Real> numeric(analytic.size(), 0);
      bool clean = false;
      // Fourth-order central stencil; the step shrinks until all four points
      // sit on the same smooth piece as the unperturbed evaluation.
      Real h = eps;
      for (int step = 0; step <= kMaxHalvings && !clean; ++step, h /= 2) {
        std::vector<Real> vals[4];
        const Real offsets[4] = {2 * h, h, -h, -2 * h};
        clean = true;
        for (int j = 0; j < 4; ++j) {
          p[i] = original[i] + offsets[j];
          Probe r = probe_at(f, probe);
          vals[j] = std::move(r.values);
          clean = clean && r.signature == base_signature;
        }
        for (std::size_t k = 0; k < numeric.size(); ++k) {
          // Differences first: a flat direction must give exactly zero.
          numeric[k] = (8 * (vals[1][k] - vals[2][k]) - (vals[0][k] - vals[3][k])) / (12 * h);
        }
      }
      p[i] = original[i];
      for (std::size_t k = 0; k < analytic.size(); ++k) {
        if (!reads(k, name)) continue;
        GradCheckReport& report = reports[k];
        if (!clean) ++report.kink_crossings;
        const Real a = analytic[k].at(name)[i];
        const Real denom = std::max({std::abs(a), std::abs(numeric[k]), Real{1e-8}});
        const Real err = std::abs(a - numeric[k]) / denom;
        ++report.entries;
        Real& param_worst = report.per_parameter[name];
        param_worst = std::max(param_worst, err);
        if (err > report.max_relative_error || report.worst_parameter.empty()) {
          report.max_relative_error = err;
          report.worst_parameter = name;
          report.worst_index = i;
          report.analytic = a;
          report.numeric = numeric[k];
        }
      }
    }
  }
  return reports;
}

std::vector<GradCheckReport> grad_check_reports(const MultiFn& f, const ParamSet& params, Real eps) {
  std::vector<Gradients> analytic;
  std::size_t outputs = 0;
  {
    Graph g(&params);
    outputs = f(g).size();
  }
  for (std::size_t k = 0; k < outputs; ++k) {
    Graph g(&params);
    analytic.push_back(g.backward(f(g).at(k)));
  }
  return grad_check_reports(f, params, eps, analytic);
}

GradCheckReport grad_check_report(const ScalarFn& f, const ParamSet& params, Real eps, const Gradients& analytic) {
  const MultiFn multi = [&f](Graph& g) { return std::vector<Var>{f(g)}; };
  return grad_check_reports(multi, params, eps, std::span(&analytic, 1)).front();
}

GradCheckReport grad_check_report(const ScalarFn& f, const ParamSet& params, Real eps) {
  Graph g(&params);
  const Gradients analytic = g.backward(f(g));
  return grad_check_report(f, params, eps, analytic);
}

Real grad_check(const ScalarFn& f, const ParamSet& params, Real eps) {
  return grad_check_report(f, params, eps).max_relative_error;
}

}  // namespace idn
