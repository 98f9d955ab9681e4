#include "sdh/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdh/error.hpp"

namespace sdh {

GradCheckReport finite_difference_check(std::span<const ParamBlock> blocks,
                                        const std::function<LossProbe()>& evaluate, double step) {
  GradCheckReport report;
  const LossProbe base = evaluate();
  for (const ParamBlock& block : blocks) {
    if (block.values.size() != block.analytic.size()) {
      throw InternalError("gradient block size does not match its parameter block");
    }
    for (std::size_t i = 0; i < block.values.size(); ++i) {
      double& p = block.values[i];
      const double saved = p;
      p = saved + step;
      const LossProbe plus = evaluate();
      p = saved - step;
      const LossProbe minus = evaluate();
      p = saved;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++report.excluded;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * step);
      const double err = std::abs(block.analytic[i] - numeric) / std::max(std::abs(numeric), 1e-8);
      const double noise = 8.0 * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(plus.value), std::abs(minus.value)) / step;
      const double resolved =
          std::max(0.0, std::abs(block.analytic[i] - numeric) - noise) / std::max(std::abs(numeric), 1e-8);
      report.max_resolved_relative_error = std::max(report.max_resolved_relative_error, resolved);
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_analytic = block.analytic[i];
        report.worst_numeric = numeric;
      }
      ++report.checked;
    }
  }
  return report;
}

GradCheckReport check_gradients(const NetConfig& config, NetParams& params, const Tensor& image,
                                const OutputLossFn& loss, double step) {
  const ForwardResult f = forward(config, params, image);
  const OutputLoss at = loss(f.g1, f.g2);
  const NetGradients grads = backward(config, params, f.cache, at.grad_g1, at.grad_g2);

  std::vector<ParamBlock> blocks;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& p = params.layers[i];
    const auto& g = grads.layers[i];
    if (!p.weight.empty()) blocks.push_back({p.weight.values(), g.weight.values()});
    if (!p.bias.empty()) blocks.push_back({p.bias.values(), g.bias.values()});
  }
  return finite_difference_check(
      blocks,
      [&] {
        const ForwardResult r = forward(config, params, image);
        const OutputLoss l = loss(r.g1, r.g2);
        return LossProbe{l.value, mix_signature(l.signature, r.cache.routing_signature())};
      },
      step);
}

}  // namespace sdh
