#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>
#include <vector>

#include "sdh/losses.hpp"
#include "sdh/tensor.hpp"

namespace sdh {

struct ImageRecord {
  std::int64_t identity = 0;
  std::int64_t camera = 0;
  std::vector<double> descriptor;
};

// Training images with their current mining descriptors. A record's position is
// its image id. Query-view cameras supply anchors x_i; all other cameras form the
// gallery view that supplies matches y_i and every negative.
struct DatasetIndex {
  std::vector<ImageRecord> records;
  std::vector<std::int64_t> query_cameras = {0};

  bool is_query_view(const ImageRecord& r) const;
  std::size_t descriptor_dim() const { return records.empty() ? 0 : records.front().descriptor.size(); }
  void validate() const;
};

enum class DescriptorSource { RawPixels, CurrentEmbedding };
enum class MiningRule {
  // Nearest negatives that are still farther from the anchor than its positive.
  SemiHard,
  // Nearest cross-identity negatives regardless of the positive.
  Nearest,
};

DescriptorSource parse_descriptor_source(std::string_view name);
MiningRule parse_mining_rule(std::string_view name);

struct MiningConfig {
  // Structured batches count one slot per positive pair plus one per negative.
  std::size_t batch_size = 128;
  std::size_t negatives_per_side = 2;
  std::size_t refresh_interval = 50;
  DescriptorSource source = DescriptorSource::CurrentEmbedding;
  MiningRule rule = MiningRule::SemiHard;

  void validate() const;
  // Positive pairs that fit in one batch: batch_size / (1 + 2K).
  std::size_t pairs_per_batch() const { return batch_size / (1 + 2 * negatives_per_side); }
};

// Average-pooled pixel descriptor over cell x cell blocks.
std::vector<double> raw_descriptor(const Tensor& image, std::size_t cell = 4);

DatasetIndex make_index(std::span<const Tensor> images, std::span<const std::int64_t> identities,
                        std::span<const std::int64_t> cameras, std::vector<std::int64_t> query_cameras = {0});

struct PositivePair {
  std::size_t query = 0;    // query-view record
  std::size_t gallery = 0;  // gallery-view record of the same identity

  friend bool operator==(const PositivePair&, const PositivePair&) = default;
};

struct PairListing {
  std::vector<PositivePair> pairs;  // grouped by identity, ascending
  // Identities seen in only one view; they contribute no pairs.
  std::vector<std::int64_t> skipped_identities;
};

PairListing positive_pairs(const DatasetIndex& index);

struct MinedNegatives {
  std::vector<std::size_t> query_side;  // y_k for x_i
  std::vector<std::size_t> match_side;  // y_l for y_i
  bool query_fallback = false;
  bool match_fallback = false;
};

// K gallery-view negatives for each side of the pair, ordered by descriptor
// distance. Under SemiHard a side with no admissible candidate falls back to its
// K nearest cross-identity images and is flagged.
MinedNegatives mine_hard_negatives(const DatasetIndex& index, const PositivePair& pair, std::size_t k,
                                   MiningRule rule = MiningRule::SemiHard);

struct MinedPair {
  PositivePair pair;
  MinedNegatives negatives;
};

// A mini-batch with its slot table: losses index into `images` (record ids).
struct StructuredMiniBatch {
  std::vector<std::size_t> images;
  StructuredBatch batch;
  std::vector<MinedPair> mined;
  std::vector<std::int64_t> identities;
  // Set when one identity had more pairs than fit and was split across batches.
  bool split_identity = false;
  std::size_t fallbacks = 0;

  std::size_t element_count() const;
};

struct PairMiniBatch {
  std::vector<std::size_t> images;
  std::vector<PairTerm> pairs;
};

struct TripletMiniBatch {
  std::vector<std::size_t> images;
  std::vector<TripletTerm> triplets;
};

// Every identity's pairs, grouped greedily into batches of whole identities in a
// seeded order, each pair mined for K negatives per side.
std::vector<StructuredMiniBatch> structured_epoch(const DatasetIndex& index, const MiningConfig& config,
                                                  std::uint64_t seed, double margin = 1.0);
// The first batch of structured_epoch with the same arguments.
StructuredMiniBatch build_structured_batch(const DatasetIndex& index, const MiningConfig& config, std::uint64_t seed,
                                           double margin = 1.0);

// All positive pairs plus one random cross-identity gallery negative per positive
// (negative:positive ratio 1), shuffled and cut into batches of batch_size pairs.
std::vector<PairMiniBatch> contrastive_epoch(const DatasetIndex& index, std::size_t batch_size, std::uint64_t seed);
// One triplet (x_i, y_i, random cross-identity y_j) per positive pair.
std::vector<TripletMiniBatch> triplet_epoch(const DatasetIndex& index, std::size_t batch_size, std::uint64_t seed);

// True when descriptors should be refreshed after `completed_epoch` (1-based).
bool refresh_due(std::size_t completed_epoch, std::size_t interval);

// Replaces every descriptor with embed(record id) for CurrentEmbedding; RawPixels is a no-op.
DatasetIndex refresh_descriptors(const DatasetIndex& index, DescriptorSource source,
                                 const std::function<std::vector<double>(std::size_t)>& embed);

struct Crop {
  Tensor image;
  double dy = 0.0;
  double dx = 0.0;
};

// Bilinear translation by (dy, dx) pixels with clamp-to-edge borders.
Tensor translate(const Tensor& image, double dy, double dx);

// `count` translated copies with offsets uniform in [-0.05H, 0.05H] x [-0.05W, 0.05W].
std::vector<Crop> augment(const Tensor& image, std::mt19937_64& rng, std::size_t count = 5);

}  // namespace sdh
