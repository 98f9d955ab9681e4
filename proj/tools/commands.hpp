#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdh/config_io.hpp"
#include "sdh/metrics.hpp"
#include "sdh/synthgen.hpp"
#include "sdh/training.hpp"

namespace sdh::cli {

namespace fs = std::filesystem;

struct GenerateOptions {
  SynthConfig synth;
  fs::path out;
  // When set, also writes train.csv, val.csv, test.csv and test_query.csv.
  std::optional<SplitCounts> split;
  std::uint64_t split_seed = 7;
  std::uint64_t query_seed = 11;
};

Manifest cmd_generate(const GenerateOptions& options);

struct TrainOptions {
  fs::path config;  // model config file; empty selects the built-in desk config
  fs::path manifest;
  TrainConfig train;
  std::optional<std::size_t> bits;
  fs::path out;
};

// Writes checkpoint.bin after every epoch (epoch 0 is the initialization),
// loss.csv with one row per mini-batch and epoch_loss.csv with epoch means.
TrainReport cmd_train(const TrainOptions& options);

// One gallery record per manifest row, image id = row index.
void cmd_encode(const fs::path& checkpoint, const fs::path& manifest, const fs::path& out);

struct QueryOptions {
  fs::path gallery;
  fs::path checkpoint;
  fs::path queries;  // manifest of query images
  std::optional<std::uint32_t> radius;
  std::optional<std::size_t> top_n;
  fs::path out;
};

// results CSV: query,query_identity,query_camera,rank,image_id,distance,identity,camera
void cmd_query(const QueryOptions& options);

struct EvaluateOptions {
  fs::path results;
  fs::path manifest;  // ground truth for the gallery the results rank
  ReportOptions report;
  std::optional<std::uint64_t> single_shot_seed;
  fs::path out;
};

MetricsReport cmd_evaluate(const EvaluateOptions& options);

struct LossCurve {
  LossKind loss = LossKind::Structured;
  std::size_t batch_size = 0;
  std::vector<double> epoch_means;  // index 0 is the untrained model
  std::optional<std::size_t> epochs_to_half;
  bool diverged = false;
  std::string diagnostic;
};

struct Comparison {
  std::vector<LossCurve> curves;  // contrastive, triplet, structured
};

// Trains the three losses from the same initialization with otherwise identical
// settings; batch sizes follow each loss's own default.
Comparison compare_losses(const ModelConfig& model_config, const TrainingSet& data, const TrainConfig& base);

struct CompareOptions {
  fs::path config;
  fs::path manifest;
  TrainConfig train;
  std::optional<std::size_t> bits;
  fs::path out;
};

// curves.csv (epoch and one column per loss) and summary.csv.
Comparison cmd_compare_losses(const CompareOptions& options);

ModelConfig resolve_model_config(const fs::path& config, std::optional<std::size_t> bits);
TrainingSet load_training_set(const Manifest& manifest, const NetConfig& net);

}  // namespace sdh::cli
