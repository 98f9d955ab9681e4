#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "sdh/batcher.hpp"
#include "sdh/losses.hpp"
#include "sdh/model.hpp"

namespace sdh {

enum class LossKind { Contrastive, Triplet, Structured };

LossKind parse_loss_kind(std::string_view name);
std::string_view loss_kind_name(LossKind kind);

struct TrainConfig {
  LossKind loss = LossKind::Structured;
  GradientMode grad_mode = GradientMode::Exact;
  std::size_t epochs = 100;
  double learning_rate = 0.1;
  double momentum = 0.0;
  double margin = 1.0;
  std::uint64_t seed = 1;
  // Structured batches; batch_size counts pair slots plus negative slots.
  MiningConfig mining;
  std::size_t contrastive_batch_size = 128;
  std::size_t triplet_batch_size = 120;
  // Replace each image in a batch by one of its five translated crops (or itself).
  bool augment = false;
};

struct TrainingSet {
  std::vector<Tensor> images;  // normalized to [-1, 1]
  std::vector<std::int64_t> identities;
  std::vector<std::int64_t> cameras;
  std::vector<std::int64_t> query_cameras = {0};
};

struct BatchLog {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::size_t batches = 0;
  std::size_t mining_fallbacks = 0;
  bool refreshed = false;
};

struct TrainHooks {
  std::function<void(const BatchLog&)> on_batch;
  std::function<void(std::size_t epoch, const Model&)> on_epoch;
};

struct TrainReport {
  // Entry 0 is the loss of the untrained model over one epoch of batches.
  std::vector<EpochLog> epochs;

  // First epoch whose mean loss is at most fraction * epochs[0].mean_loss.
  std::optional<std::size_t> epochs_to_fraction(double fraction) const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Plain SGD (optional momentum) with seeded batch order. Contrastive and triplet
// losses are averaged over their terms; the structured loss is already a mean.
// Throws TrainingDiverged on a non-finite loss.
TrainReport train(Model& model, const TrainingSet& data, const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace sdh
