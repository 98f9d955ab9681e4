#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sdh/net.hpp"

namespace sdh {

// A loss evaluation plus a signature of every discrete choice it made (active
// hinges, max selections, pooling routes). Two probes with different signatures
// straddle a kink, where a central difference is not a derivative.
struct LossProbe {
  double value = 0.0;
  std::uint64_t signature = 0;
};

struct ParamBlock {
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckReport {
  // max over checked parameters of |analytic - numeric| / max(|numeric|, 1e-8)
  double max_relative_error = 0.0;
  // analytic and numeric values at the worst parameter
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Same ratio with the rounding noise of the difference quotient,
  // 8 eps max(|L+|, |L-|) / step, taken off the numerator first. True
  // gradients near 1e-8 sit at that floor, which the 1e-8 guard cannot resolve.
  double max_resolved_relative_error = 0.0;
  std::size_t checked = 0;
  // Parameters skipped because the +/- step crossed a kink or pooling tie.
  std::size_t excluded = 0;
};

// Central differences on every entry of every block. The closure must read the
// block storage, which is perturbed in place and restored after each probe.
GradCheckReport finite_difference_check(std::span<const ParamBlock> blocks,
                                        const std::function<LossProbe()>& evaluate, double step = 1e-5);

struct OutputLoss {
  double value = 0.0;
  Tensor grad_g1;
  Tensor grad_g2;
  std::uint64_t signature = 0;
};

// Loss defined on the network outputs (g1, g2) of one image.
using OutputLossFn = std::function<OutputLoss(const Tensor& g1, const Tensor& g2)>;

// Compares backward() against central differences for every network parameter.
GradCheckReport check_gradients(const NetConfig& config, NetParams& params, const Tensor& image,
                                const OutputLossFn& loss, double step = 1e-5);

// Combine discrete-choice signatures.
inline std::uint64_t mix_signature(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

}  // namespace sdh
