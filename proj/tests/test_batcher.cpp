#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "sdh/batcher.hpp"
#include "sdh/error.hpp"
#include "sdh/synthgen.hpp"

#include "support.hpp"

using namespace sdh;

namespace {

ImageRecord rec(std::int64_t id, std::int64_t cam, double d) { return {id, cam, {d}}; }

// Synthetic index: identities x views x per_view images, raw-pixel descriptors.
DatasetIndex synth_index(std::size_t identities, std::size_t per_view, std::uint64_t seed = 1) {
  SynthConfig sc;
  sc.identities = identities;
  sc.images_per_view = per_view;
  sc.seed = seed;
  std::vector<Tensor> images;
  std::vector<std::int64_t> ids, cams;
  for (const auto& img : generate_images(sc)) {
    images.push_back(img.pixels);
    ids.push_back(img.row.identity);
    cams.push_back(img.row.camera);
  }
  return make_index(images, ids, cams);
}

}  // namespace

TEST_CASE("positive pairs: counting and one-view identities") {
  DatasetIndex idx;
  for (std::int64_t id : {0, 1})
    for (std::int64_t cam : {0, 1})
      for (int k = 0; k < 2; ++k) idx.records.push_back(rec(id, cam, 0.0));
  idx.records.push_back(rec(2, 0, 0.0));
  const PairListing p = positive_pairs(idx);
  CHECK(p.pairs.size() == 8);
  CHECK(p.skipped_identities == std::vector<std::int64_t>{2});
  for (const auto& pair : p.pairs) {
    CHECK(idx.records[pair.query].identity == idx.records[pair.gallery].identity);
    CHECK(idx.records[pair.query].camera == 0);
    CHECK(idx.records[pair.gallery].camera == 1);
  }
}

TEST_CASE("positive pairs equal a brute-force enumeration") {
  const DatasetIndex idx = synth_index(7, 3);
  std::set<std::pair<std::size_t, std::size_t>> expect;
  for (std::size_t a = 0; a < idx.records.size(); ++a)
    for (std::size_t b = 0; b < idx.records.size(); ++b)
      if (idx.records[a].identity == idx.records[b].identity && idx.records[a].camera == 0 &&
          idx.records[b].camera != 0)
        expect.insert({a, b});
  std::set<std::pair<std::size_t, std::size_t>> got;
  for (const auto& p : positive_pairs(idx).pairs) got.insert({p.query, p.gallery});
  CHECK(got == expect);
  CHECK(expect.size() == 7 * 9);
}

TEST_CASE("semi-hard mining on one-dimensional descriptors") {
  DatasetIndex idx;
  idx.records = {rec(0, 0, 0.0), rec(0, 1, 0.1), rec(1, 1, 0.05), rec(2, 1, 0.3), rec(3, 1, 0.9)};
  const MinedNegatives n1 = mine_hard_negatives(idx, {0, 1}, 1);
  CHECK(n1.query_side == std::vector<std::size_t>{3});
  CHECK_FALSE(n1.query_fallback);
  const MinedNegatives n2 = mine_hard_negatives(idx, {0, 1}, 3);
  CHECK(n2.query_side == std::vector<std::size_t>{3, 4});

  SUBCASE("nearest rule ignores the positive") {
    CHECK(mine_hard_negatives(idx, {0, 1}, 1, MiningRule::Nearest).query_side == std::vector<std::size_t>{2});
  }
  SUBCASE("empty predicate falls back to nearest, flagged") {
    DatasetIndex far = idx;
    far.records[1].descriptor = {5.0};
    const MinedNegatives f = mine_hard_negatives(far, {0, 1}, 2);
    CHECK(f.query_fallback);
    CHECK(f.query_side == std::vector<std::size_t>{2, 3});
  }
  SUBCASE("negatives come from the gallery view only") {
    DatasetIndex mixed = idx;
    mixed.records.push_back(rec(5, 0, 0.31));
    CHECK(mine_hard_negatives(mixed, {0, 1}, 1).query_side == std::vector<std::size_t>{3});
  }
}

TEST_CASE("K = gallery size - 1 returns every admissible candidate in distance order") {
  std::mt19937_64 rng(2);
  DatasetIndex idx;
  idx.records.push_back(rec(0, 0, 0.0));
  idx.records.push_back(rec(0, 1, 0.2));
  for (int i = 0; i < 12; ++i) idx.records.push_back(rec(1 + i, 1, test::random_vector(1, rng, -1, 1)[0]));
  const auto got = mine_hard_negatives(idx, {0, 1}, 12).query_side;
  std::vector<std::pair<double, std::size_t>> expect;
  for (std::size_t i = 2; i < idx.records.size(); ++i) {
    const double d = idx.records[i].descriptor[0] * idx.records[i].descriptor[0];
    if (d > 0.04) expect.emplace_back(d, i);
  }
  std::sort(expect.begin(), expect.end());
  REQUIRE(got.size() == expect.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expect[i].second);
}

TEST_CASE("structured batches: whole identities, cross-identity negatives, capacity") {
  const DatasetIndex idx = synth_index(20, 3);
  MiningConfig mc;
  mc.batch_size = 128;
  const auto epoch = structured_epoch(idx, mc, 5);
  std::map<std::int64_t, std::size_t> pairs_per_identity;
  std::size_t total_pairs = 0;
  for (const auto& b : epoch) {
    CHECK(b.element_count() <= mc.batch_size);
    CHECK_FALSE(b.split_identity);
    for (const auto& m : b.mined) {
      const auto id = idx.records[m.pair.query].identity;
      ++pairs_per_identity[id];
      for (auto n : m.negatives.query_side) CHECK(idx.records[n].identity != id);
      for (auto n : m.negatives.match_side) CHECK(idx.records[n].identity != id);
      CHECK(m.negatives.query_side.size() == 2);
      CHECK(m.negatives.match_side.size() == 2);
    }
    // all pairs of every sampled identity are in this batch
    for (auto id : b.identities) {
      std::size_t in_batch = 0;
      for (const auto& m : b.mined) in_batch += idx.records[m.pair.query].identity == id;
      CHECK(in_batch == 9);
    }
    // slot table resolves back to the mined records
    for (std::size_t t = 0; t < b.batch.terms.size(); ++t) {
      CHECK(b.images[b.batch.terms[t].x] == b.mined[t].pair.query);
      CHECK(b.images[b.batch.terms[t].y] == b.mined[t].pair.gallery);
    }
    total_pairs += b.mined.size();
  }
  CHECK(total_pairs == 20 * 9);
  CHECK(pairs_per_identity.size() == 20);
}

TEST_CASE("ten pairs with K = 2 occupy at most 50 slots, fewer after dedup") {
  const DatasetIndex idx = synth_index(12, 2);  // 4 pairs per identity
  MiningConfig mc;
  mc.batch_size = 50;  // 10 pairs
  const StructuredMiniBatch b = build_structured_batch(idx, mc, 3);
  CHECK(b.batch.terms.size() <= 10);
  CHECK(b.element_count() <= 50);
  std::set<std::size_t> distinct;
  for (const auto& m : b.mined) {
    distinct.insert(m.pair.query);
    distinct.insert(m.pair.gallery);
    distinct.insert(m.negatives.query_side.begin(), m.negatives.query_side.end());
    distinct.insert(m.negatives.match_side.begin(), m.negatives.match_side.end());
  }
  CHECK(b.images.size() == distinct.size());
}

TEST_CASE("oversize identity is split across batches and flagged") {
  const DatasetIndex idx = synth_index(4, 4);  // 16 pairs per identity
  MiningConfig mc;
  mc.batch_size = 25;  // 5 pairs
  const auto epoch = structured_epoch(idx, mc, 1);
  CHECK(std::any_of(epoch.begin(), epoch.end(), [](const auto& b) { return b.split_identity; }));
  std::size_t pairs = 0;
  for (const auto& b : epoch) pairs += b.mined.size();
  CHECK(pairs == 64);
  MiningConfig tiny;
  tiny.batch_size = 5;
  CHECK_THROWS_AS(structured_epoch(idx, tiny, 1), UsageError);
}

TEST_CASE("batch composition is fixed by the seed") {
  const DatasetIndex idx = synth_index(15, 2);
  MiningConfig mc;
  const auto a = structured_epoch(idx, mc, 42);
  const auto b = structured_epoch(idx, mc, 42);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].images == b[i].images);
    CHECK(a[i].identities == b[i].identities);
  }
  const auto c = structured_epoch(idx, mc, 43);
  CHECK(c.front().identities != a.front().identities);
}

TEST_CASE("random baselines draw about one negative per positive") {
  const DatasetIndex idx = synth_index(20, 3);
  std::size_t pos = 0, neg = 0;
  for (const auto& b : contrastive_epoch(idx, 128, 3))
    for (const auto& p : b.pairs) {
      (p.same ? pos : neg) += 1;
      const auto x = b.images[p.x], y = b.images[p.y];
      CHECK((idx.records[x].identity == idx.records[y].identity) == p.same);
    }
  const double ratio = static_cast<double>(neg) / static_cast<double>(pos);
  CHECK(ratio >= 0.9);
  CHECK(ratio <= 1.1);

  std::size_t triplets = 0;
  for (const auto& b : triplet_epoch(idx, 120, 3)) {
    CHECK(b.triplets.size() <= 120);
    for (const auto& t : b.triplets) {
      const auto a = b.images[t.anchor], p = b.images[t.positive], n = b.images[t.negative];
      CHECK(idx.records[a].identity == idx.records[p].identity);
      CHECK(idx.records[a].identity != idx.records[n].identity);
    }
    triplets += b.triplets.size();
  }
  CHECK(triplets == 20 * 9);
}

TEST_CASE("descriptor refresh schedule and sources") {
  std::vector<std::size_t> due;
  for (std::size_t e = 1; e <= 120; ++e)
    if (refresh_due(e, 50)) due.push_back(e);
  CHECK(due == std::vector<std::size_t>{50, 100});

  const DatasetIndex idx = synth_index(3, 2);
  const auto embed = [](std::size_t i) { return std::vector<double>(48, 0.01 * static_cast<double>(i)); };
  const DatasetIndex same = refresh_descriptors(idx, DescriptorSource::RawPixels, embed);
  CHECK(same.descriptor_dim() == idx.descriptor_dim());
  for (std::size_t i = 0; i < idx.records.size(); ++i) CHECK(same.records[i].descriptor == idx.records[i].descriptor);
  const DatasetIndex fresh = refresh_descriptors(idx, DescriptorSource::CurrentEmbedding, embed);
  CHECK(fresh.descriptor_dim() == 48);
  CHECK(fresh.records[2].descriptor == embed(2));
}

TEST_CASE("augmentation offsets and translation") {
  std::mt19937_64 rng(9);
  const Tensor img = test::random_tensor({160, 60, 3}, rng, 0.0, 1.0);
  std::mt19937_64 a(5), b(5);
  const auto crops = augment(img, a, 5);
  const auto again = augment(img, b, 5);
  REQUIRE(crops.size() == 5);
  for (std::size_t i = 0; i < crops.size(); ++i) {
    CHECK(std::abs(crops[i].dy) <= 8.0);
    CHECK(std::abs(crops[i].dx) <= 3.0);
    CHECK(crops[i].image.shape() == img.shape());
    CHECK(crops[i].dy == again[i].dy);
    CHECK(crops[i].dx == again[i].dx);
  }
  CHECK(translate(img, 0.0, 0.0) == img);

  // integer shift moves content; the vacated border repeats the edge
  Tensor ramp({3, 4, 1}, std::vector<double>{0, 1, 2, 3, 10, 11, 12, 13, 20, 21, 22, 23});
  const Tensor shifted = translate(ramp, 0.0, 1.0);
  CHECK(shifted == Tensor({3, 4, 1}, std::vector<double>{0, 0, 1, 2, 10, 10, 11, 12, 20, 20, 21, 22}));
}
