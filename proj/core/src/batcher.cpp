#include "sdh/batcher.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>

#include "sdh/error.hpp"

namespace sdh {

bool DatasetIndex::is_query_view(const ImageRecord& r) const {
  return std::find(query_cameras.begin(), query_cameras.end(), r.camera) != query_cameras.end();
}

void DatasetIndex::validate() const {
  for (const auto& r : records) {
    if (r.descriptor.size() != descriptor_dim()) throw UsageError("descriptors differ in length within an index");
  }
}

DescriptorSource parse_descriptor_source(std::string_view name) {
  if (name == "raw-pixels") return DescriptorSource::RawPixels;
  if (name == "current-embedding") return DescriptorSource::CurrentEmbedding;
  throw UsageError("unknown descriptor source '" + std::string(name) + "'");
}

MiningRule parse_mining_rule(std::string_view name) {
  if (name == "semi-hard") return MiningRule::SemiHard;
  if (name == "nearest") return MiningRule::Nearest;
  throw UsageError("unknown mining rule '" + std::string(name) + "'");
}

void MiningConfig::validate() const {
  if (negatives_per_side == 0) throw UsageError("mining needs at least one negative per side");
  if (batch_size < 2 * (1 + negatives_per_side)) {
    throw UsageError("batch size " + std::to_string(batch_size) + " is below 2(1 + K) = " +
                     std::to_string(2 * (1 + negatives_per_side)));
  }
}

std::vector<double> raw_descriptor(const Tensor& image, std::size_t cell) {
  const Shape& s = image.shape();
  if (s.size() != 3 || cell == 0) throw UsageError("raw descriptor needs an (H, W, C) image");
  const std::size_t gh = (s[0] + cell - 1) / cell;
  const std::size_t gw = (s[1] + cell - 1) / cell;
  std::vector<double> out(gh * gw * s[2], 0.0);
  std::vector<double> counts(gh * gw, 0.0);
  for (std::size_t y = 0; y < s[0]; ++y) {
    for (std::size_t x = 0; x < s[1]; ++x) {
      const std::size_t g = (y / cell) * gw + x / cell;
      counts[g] += 1.0;
      for (std::size_t c = 0; c < s[2]; ++c) out[g * s[2] + c] += image[(y * s[1] + x) * s[2] + c];
    }
  }
  for (std::size_t g = 0; g < counts.size(); ++g) {
    for (std::size_t c = 0; c < s[2]; ++c) out[g * s[2] + c] /= counts[g];
  }
  return out;
}

DatasetIndex make_index(std::span<const Tensor> images, std::span<const std::int64_t> identities,
                        std::span<const std::int64_t> cameras, std::vector<std::int64_t> query_cameras) {
  if (images.size() != identities.size() || images.size() != cameras.size()) {
    throw UsageError("images, identities and cameras differ in length");
  }
  DatasetIndex index;
  index.query_cameras = std::move(query_cameras);
  index.records.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    index.records.push_back({identities[i], cameras[i], raw_descriptor(images[i])});
  }
  index.validate();
  return index;
}

PairListing positive_pairs(const DatasetIndex& index) {
  std::map<std::int64_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> views;
  for (std::size_t i = 0; i < index.records.size(); ++i) {
    auto& [query, gallery] = views[index.records[i].identity];
    (index.is_query_view(index.records[i]) ? query : gallery).push_back(i);
  }
  PairListing out;
  for (const auto& [identity, v] : views) {
    const auto& [query, gallery] = v;
    if (query.empty() || gallery.empty()) {
      out.skipped_identities.push_back(identity);
      continue;
    }
    for (std::size_t q : query) {
      for (std::size_t g : gallery) out.pairs.push_back({q, g});
    }
  }
  return out;
}

namespace {

double descriptor_distance(const DatasetIndex& index, std::size_t a, std::size_t b) {
  return squared_distance(index.records[a].descriptor, index.records[b].descriptor);
}

std::vector<std::size_t> mine_side(const DatasetIndex& index, std::size_t anchor, std::size_t positive,
                                   std::int64_t identity, std::size_t k, MiningRule rule, bool& fallback) {
  const double positive_distance = descriptor_distance(index, anchor, positive);
  std::vector<std::pair<double, std::size_t>> admissible;
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < index.records.size(); ++i) {
    const ImageRecord& r = index.records[i];
    if (r.identity == identity || index.is_query_view(r)) continue;
    const double d = descriptor_distance(index, anchor, i);
    all.emplace_back(d, i);
    if (rule == MiningRule::Nearest || positive_distance < d) admissible.emplace_back(d, i);
  }
  if (all.empty()) throw UsageError("gallery view has no cross-identity images to mine");
  fallback = admissible.empty();
  auto& pool = fallback ? all : admissible;
  const std::size_t take = std::min(k, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(pool[i].second);
  return out;
}

std::size_t slot_of(std::vector<std::size_t>& images, std::map<std::size_t, std::size_t>& slots, std::size_t record) {
  const auto [it, inserted] = slots.emplace(record, images.size());
  if (inserted) images.push_back(record);
  return it->second;
}

struct IdentityGroup {
  std::int64_t identity;
  std::vector<PositivePair> pairs;
};

std::vector<IdentityGroup> groups_by_identity(const DatasetIndex& index) {
  std::vector<IdentityGroup> groups;
  for (const PositivePair& p : positive_pairs(index).pairs) {
    const std::int64_t id = index.records[p.query].identity;
    if (groups.empty() || groups.back().identity != id) groups.push_back({id, {}});
    groups.back().pairs.push_back(p);
  }
  return groups;
}

struct PlannedBatch {
  std::vector<PositivePair> pairs;
  std::vector<std::int64_t> identities;
  bool split = false;
};

std::vector<PlannedBatch> plan_batches(const DatasetIndex& index, const MiningConfig& config, std::uint64_t seed) {
  auto groups = groups_by_identity(index);
  std::mt19937_64 rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);
  const std::size_t capacity = config.pairs_per_batch();
  std::vector<PlannedBatch> plan;
  PlannedBatch current;
  const auto flush = [&] {
    if (!current.pairs.empty()) plan.push_back(std::move(current));
    current = {};
  };
  for (auto& g : groups) {
    if (g.pairs.size() > capacity) {
      flush();
      for (std::size_t start = 0; start < g.pairs.size(); start += capacity) {
        const auto end = std::min(g.pairs.size(), start + capacity);
        PlannedBatch part;
        part.pairs.assign(g.pairs.begin() + static_cast<std::ptrdiff_t>(start),
                          g.pairs.begin() + static_cast<std::ptrdiff_t>(end));
        part.identities = {g.identity};
        part.split = true;
        plan.push_back(std::move(part));
      }
      continue;
    }
    if (current.pairs.size() + g.pairs.size() > capacity) flush();
    current.pairs.insert(current.pairs.end(), g.pairs.begin(), g.pairs.end());
    current.identities.push_back(g.identity);
  }
  flush();
  return plan;
}

StructuredMiniBatch mine_batch(const DatasetIndex& index, const MiningConfig& config, const PlannedBatch& planned,
                               double margin) {
  StructuredMiniBatch out;
  out.identities = planned.identities;
  out.split_identity = planned.split;
  out.batch.margin = margin;
  std::map<std::size_t, std::size_t> slots;
  for (const PositivePair& p : planned.pairs) {
    MinedNegatives neg = mine_hard_negatives(index, p, config.negatives_per_side, config.rule);
    out.fallbacks += static_cast<std::size_t>(neg.query_fallback) + static_cast<std::size_t>(neg.match_fallback);
    StructuredTerm term;
    term.x = slot_of(out.images, slots, p.query);
    term.y = slot_of(out.images, slots, p.gallery);
    for (std::size_t n : neg.query_side) term.x_negatives.push_back(slot_of(out.images, slots, n));
    for (std::size_t n : neg.match_side) term.y_negatives.push_back(slot_of(out.images, slots, n));
    out.batch.terms.push_back(std::move(term));
    out.mined.push_back({p, std::move(neg)});
  }
  return out;
}

std::size_t random_negative(const DatasetIndex& index, const std::vector<std::size_t>& gallery, std::int64_t identity,
                            std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, gallery.size() - 1);
  for (;;) {
    const std::size_t c = gallery[pick(rng)];
    if (index.records[c].identity != identity) return c;
  }
}

std::vector<std::size_t> gallery_records(const DatasetIndex& index) {
  std::vector<std::size_t> out;
  std::int64_t first_identity = 0;
  bool mixed = false;
  for (std::size_t i = 0; i < index.records.size(); ++i) {
    if (index.is_query_view(index.records[i])) continue;
    if (out.empty()) first_identity = index.records[i].identity;
    mixed = mixed || index.records[i].identity != first_identity;
    out.push_back(i);
  }
  if (!mixed) throw UsageError("random negatives need at least two identities in the gallery view");
  return out;
}

}  // namespace

MinedNegatives mine_hard_negatives(const DatasetIndex& index, const PositivePair& pair, std::size_t k,
                                   MiningRule rule) {
  if (k == 0) throw UsageError("mining needs K >= 1");
  const std::int64_t identity = index.records.at(pair.query).identity;
  if (index.records.at(pair.gallery).identity != identity) throw UsageError("positive pair spans two identities");
  MinedNegatives out;
  out.query_side = mine_side(index, pair.query, pair.gallery, identity, k, rule, out.query_fallback);
  out.match_side = mine_side(index, pair.gallery, pair.query, identity, k, rule, out.match_fallback);
  return out;
}

std::size_t StructuredMiniBatch::element_count() const {
  std::size_t n = batch.terms.size();
  for (const auto& t : batch.terms) n += t.x_negatives.size() + t.y_negatives.size();
  return n;
}

std::vector<StructuredMiniBatch> structured_epoch(const DatasetIndex& index, const MiningConfig& config,
                                                  std::uint64_t seed, double margin) {
  config.validate();
  if (index.records.empty()) throw UsageError("cannot build batches from an empty index");
  std::vector<StructuredMiniBatch> out;
  for (const auto& planned : plan_batches(index, config, seed)) out.push_back(mine_batch(index, config, planned, margin));
  return out;
}

StructuredMiniBatch build_structured_batch(const DatasetIndex& index, const MiningConfig& config, std::uint64_t seed,
                                           double margin) {
  config.validate();
  if (index.records.empty()) throw UsageError("cannot build batches from an empty index");
  const auto plan = plan_batches(index, config, seed);
  if (plan.empty()) throw UsageError("index has no positive pairs");
  return mine_batch(index, config, plan.front(), margin);
}

std::vector<PairMiniBatch> contrastive_epoch(const DatasetIndex& index, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 2) throw UsageError("contrastive batches need room for a positive and a negative pair");
  const auto gallery = gallery_records(index);
  std::mt19937_64 rng(seed);
  std::vector<std::tuple<std::size_t, std::size_t, bool>> items;
  for (const PositivePair& p : positive_pairs(index).pairs) {
    const std::int64_t id = index.records[p.query].identity;
    items.emplace_back(p.query, p.gallery, true);
    items.emplace_back(p.query, random_negative(index, gallery, id, rng), false);
  }
  std::shuffle(items.begin(), items.end(), rng);
  std::vector<PairMiniBatch> out;
  std::map<std::size_t, std::size_t> slots;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i % batch_size == 0) {
      out.emplace_back();
      slots.clear();
    }
    auto& b = out.back();
    const auto& [x, y, same] = items[i];
    b.pairs.push_back({slot_of(b.images, slots, x), slot_of(b.images, slots, y), same});
  }
  return out;
}

std::vector<TripletMiniBatch> triplet_epoch(const DatasetIndex& index, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw UsageError("triplet batches need a positive size");
  const auto gallery = gallery_records(index);
  std::mt19937_64 rng(seed);
  auto pairs = positive_pairs(index).pairs;
  std::shuffle(pairs.begin(), pairs.end(), rng);
  std::vector<TripletMiniBatch> out;
  std::map<std::size_t, std::size_t> slots;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i % batch_size == 0) {
      out.emplace_back();
      slots.clear();
    }
    auto& b = out.back();
    const PositivePair& p = pairs[i];
    const std::size_t neg = random_negative(index, gallery, index.records[p.query].identity, rng);
    b.triplets.push_back(
        {slot_of(b.images, slots, p.query), slot_of(b.images, slots, p.gallery), slot_of(b.images, slots, neg)});
  }
  return out;
}

bool refresh_due(std::size_t completed_epoch, std::size_t interval) {
  return interval > 0 && completed_epoch > 0 && completed_epoch % interval == 0;
}

DatasetIndex refresh_descriptors(const DatasetIndex& index, DescriptorSource source,
                                 const std::function<std::vector<double>(std::size_t)>& embed) {
  DatasetIndex out = index;
  if (source == DescriptorSource::RawPixels) return out;
  for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].descriptor = embed(i);
  out.validate();
  return out;
}

Tensor translate(const Tensor& image, double dy, double dx) {
  const Shape& s = image.shape();
  if (s.size() != 3) throw UsageError("translate needs an (H, W, C) image");
  const auto h = static_cast<long>(s[0]);
  const auto w = static_cast<long>(s[1]);
  const std::size_t c = s[2];
  Tensor out(s);
  const auto at = [&](long y, long x, std::size_t ch) {
    y = std::clamp(y, 0L, h - 1);
    x = std::clamp(x, 0L, w - 1);
    return image[(static_cast<std::size_t>(y) * s[1] + static_cast<std::size_t>(x)) * c + ch];
  };
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      // Output pixel (y, x) samples the source at (y - dy, x - dx).
      const double sy = static_cast<double>(y) - dy;
      const double sx = static_cast<double>(x) - dx;
      const double fy = std::floor(sy);
      const double fx = std::floor(sx);
      const double ty = sy - fy;
      const double tx = sx - fx;
      const auto y0 = static_cast<long>(fy);
      const auto x0 = static_cast<long>(fx);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = (1 - tx) * at(y0, x0, ch) + (tx == 0 ? 0.0 : tx * at(y0, x0 + 1, ch));
        const double bottom = ty == 0 ? 0.0 : (1 - tx) * at(y0 + 1, x0, ch) + (tx == 0 ? 0.0 : tx * at(y0 + 1, x0 + 1, ch));
        out[(static_cast<std::size_t>(y) * s[1] + static_cast<std::size_t>(x)) * c + ch] = (1 - ty) * top + ty * bottom;
      }
    }
  }
  return out;
}

std::vector<Crop> augment(const Tensor& image, std::mt19937_64& rng, std::size_t count) {
  const Shape& s = image.shape();
  if (s.size() != 3) throw UsageError("augment needs an (H, W, C) image");
  const double max_dy = 0.05 * static_cast<double>(s[0]);
  const double max_dx = 0.05 * static_cast<double>(s[1]);
  std::uniform_real_distribution<double> uy(-max_dy, max_dy);
  std::uniform_real_distribution<double> ux(-max_dx, max_dx);
  std::vector<Crop> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double dy = uy(rng);
    const double dx = ux(rng);
    out.push_back({translate(image, dy, dx), dy, dx});
  }
  return out;
}

}  // namespace sdh
