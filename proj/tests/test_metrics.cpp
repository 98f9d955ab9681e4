#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sdh/codebank.hpp"
#include "sdh/error.hpp"
#include "sdh/metrics.hpp"
#include "support.hpp"

using namespace sdh;

namespace {

// List of ids 0..n-1 at distance = rank; relevant ids given by mask bits.
QueryJudgment list_from_mask(unsigned mask, std::size_t n) {
  QueryJudgment j;
  for (std::size_t i = 0; i < n; ++i) {
    j.ranked.push_back({static_cast<std::int64_t>(i), static_cast<std::uint32_t>(i)});
    if ((mask >> i) & 1u) j.relevant.push_back(static_cast<std::int64_t>(i));
  }
  return j;
}

QueryJudgment list_with_hits(std::vector<std::size_t> ranks_1based, std::size_t n) {
  unsigned mask = 0;
  for (auto r : ranks_1based) mask |= 1u << (r - 1);
  return list_from_mask(mask, n);
}

// AP by brute force: for each relevant item, count relevant items ranked at or
// above it by scanning the whole list again.
double brute_ap(const QueryJudgment& j) {
  const auto rel = [&](std::int64_t id) {
    return std::find(j.relevant.begin(), j.relevant.end(), id) != j.relevant.end();
  };
  double sum = 0.0;
  for (std::size_t a = 0; a < j.ranked.size(); ++a) {
    if (!rel(j.ranked[a].image_id)) continue;
    std::size_t above = 0;
    for (std::size_t b = 0; b <= a; ++b) above += rel(j.ranked[b].image_id);
    sum += static_cast<double>(above) / static_cast<double>(a + 1);
  }
  return sum / static_cast<double>(j.relevant.size());
}

std::size_t brute_first_hit(const QueryJudgment& j) {
  for (std::size_t a = 0; a < j.ranked.size(); ++a)
    for (auto r : j.relevant)
      if (j.ranked[a].image_id == r) return a + 1;
  return 0;
}

}  // namespace

TEST_CASE("AP equals the brute-force scan for every relevance pattern of length 10") {
  for (unsigned mask = 1; mask < 1024; ++mask) {
    const QueryJudgment j = list_from_mask(mask, 10);
    REQUIRE(std::abs(*average_precision(j) - brute_ap(j)) <= 1e-12);
  }
  CHECK_FALSE(average_precision(list_from_mask(0, 10)).has_value());
}

TEST_CASE("AP examples") {
  CHECK(*average_precision(list_with_hits({1, 2, 3}, 10)) == 1.0);
  CHECK(*average_precision(list_with_hits({1, 5}, 10)) == doctest::Approx(0.7).epsilon(1e-15));
  for (std::size_t k = 1; k <= 10; ++k)
    CHECK(*average_precision(list_with_hits({k}, 10)) == doctest::Approx(1.0 / static_cast<double>(k)));
  // a relevant id that never appears contributes zero
  QueryJudgment missing = list_with_hits({1}, 5);
  missing.relevant.push_back(99);
  CHECK(*average_precision(missing) == 0.5);
}

TEST_CASE("lists with identical CMC(1) and different AP") {
  // A: both matches on top. B: one match, on top. C: matches at ranks 1 and 5.
  const std::vector<QueryJudgment> lists = {list_with_hits({1, 2}, 8), list_with_hits({1}, 8),
                                            list_with_hits({1, 5}, 8)};
  CHECK(*average_precision(lists[0]) == 1.0);
  CHECK(*average_precision(lists[1]) == 1.0);
  CHECK(*average_precision(lists[2]) == doctest::Approx(0.7).epsilon(1e-15));
  for (const auto& l : lists) CHECK(cmc(std::vector<QueryJudgment>{l}, 1).front().rate == 1.0);
}

TEST_CASE("MAP") {
  const std::vector<QueryJudgment> perfect = {list_with_hits({1}, 4), list_with_hits({1, 2}, 4)};
  CHECK(mean_average_precision(perfect) == 1.0);
  const std::vector<QueryJudgment> mixed = {list_with_hits({1, 2}, 6), list_with_hits({1, 5}, 6),
                                            list_from_mask(0, 6)};
  CHECK(mean_average_precision(mixed) == doctest::Approx(0.85).epsilon(1e-15));
  const std::vector<QueryJudgment> none = {list_from_mask(0, 3)};
  CHECK_THROWS_AS(mean_average_precision(none), UsageError);
}

TEST_CASE("precision within Hamming radius") {
  SUBCASE("all top-N relevant and within the radius") {
    QueryJudgment j = list_with_hits({1, 2, 3}, 3);
    for (auto& e : j.ranked) e.distance = 1;
    CHECK(precision_within_radius(std::vector<QueryJudgment>{j}, 3) == 1.0);
  }
  SUBCASE("nothing within the radius") {
    QueryJudgment j = list_with_hits({1, 2}, 4);
    for (auto& e : j.ranked) e.distance = 5;
    CHECK(precision_within_radius(std::vector<QueryJudgment>{j}, 4) == 0.0);
  }
  SUBCASE("three relevant within radius among the top five") {
    QueryJudgment j = list_with_hits({1, 2, 4, 6}, 8);
    const std::uint32_t d[] = {0, 1, 2, 2, 2, 3, 4, 5};
    for (std::size_t i = 0; i < 8; ++i) j.ranked[i].distance = d[i];
    // top 5: ids 0..4, all within radius 2, relevant 0, 1, 3 -> 3/5
    CHECK(precision_within_radius(std::vector<QueryJudgment>{j}, 5) == doctest::Approx(0.6));
    // alternative denominator: 3 relevant of 5 within
    CHECK(precision_within_radius(std::vector<QueryJudgment>{j}, 5, 2, RadiusDenominator::WithinRadius) ==
          doctest::Approx(0.6));
    // N = 8: radius keeps 5 items, 3 relevant -> 3/8 vs 3/5
    CHECK(precision_within_radius(std::vector<QueryJudgment>{j}, 8) == doctest::Approx(3.0 / 8.0));
    CHECK(precision_within_radius(std::vector<QueryJudgment>{j}, 8, 2, RadiusDenominator::WithinRadius) ==
          doctest::Approx(0.6));
  }
  CHECK_THROWS_AS(precision_within_radius(std::vector<QueryJudgment>{list_with_hits({1}, 2)}, 0), UsageError);
}

TEST_CASE("CMC") {
  const std::vector<QueryJudgment> one = {list_with_hits({3, 5}, 6)};
  const auto c = cmc(one, 6);
  CHECK(c[0].rate == 0.0);
  CHECK(c[1].rate == 0.0);
  for (std::size_t k = 2; k < 6; ++k) CHECK(c[k].rate == 1.0);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<QueryJudgment> js;
    for (int q = 0; q < 7; ++q) js.push_back(list_from_mask(1u + static_cast<unsigned>(rng() % 1023), 10));
    const auto curve = cmc(js, 10);
    for (std::size_t k = 1; k <= 10; ++k) {
      std::size_t hits = 0;
      for (const auto& j : js) hits += brute_first_hit(j) <= k;
      CHECK(curve[k - 1].rate == doctest::Approx(static_cast<double>(hits) / 7.0));
      if (k > 1) CHECK(curve[k - 1].rate >= curve[k - 2].rate);
    }
    CHECK(curve.back().rate == 1.0);
  }
}

TEST_CASE("precision at N") {
  const std::vector<QueryJudgment> js = {list_with_hits({1, 2}, 5), list_with_hits({4}, 5)};
  CHECK(precision_at_n(js, 1) == doctest::Approx(0.5));
  CHECK(precision_at_n(js, 5) == doctest::Approx((2.0 / 5 + 1.0 / 5) / 2));
}

TEST_CASE("PR curves") {
  const auto perfect = precision_recall_curve(list_with_hits({1, 2, 3}, 3));
  for (const auto& p : perfect) CHECK(p.precision == 1.0);
  const auto last = precision_recall_curve(list_with_hits({4, 5}, 5));
  CHECK(last.back().recall == 1.0);
  CHECK(last.back().precision == doctest::Approx(2.0 / 5.0));

  for (unsigned mask = 1; mask < 1024; ++mask) {
    const QueryJudgment j = list_from_mask(mask, 10);
    const auto curve = precision_recall_curve(j);
    double area = 0.0, prev = 0.0;
    for (const auto& p : curve) {
      REQUIRE(p.recall >= prev);
      area += p.precision * (p.recall - prev);
      prev = p.recall;
    }
    REQUIRE(std::abs(area - *average_precision(j)) <= 1e-9);
  }
}

TEST_CASE("junk records in the gallery never change AP") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    CodeBank with_junk(16), without(16);
    QueryJudgment jw, jo;
    const QueryInfo info{0, 0, std::nullopt};
    for (std::int64_t i = 0; i < 40; ++i) {
      BinaryCode c(16);
      for (std::size_t b = 0; b < 16; ++b) c.set(b, rng() & 1u);
      const std::int64_t identity = static_cast<std::int64_t>(rng() % 4);
      const std::int64_t camera = static_cast<std::int64_t>(rng() % 2);
      with_junk.add({c, identity, camera, i});
      if (identity == 0 && camera == 0) continue;
      without.add({c, identity, camera, i});
      if (identity == 0) {
        jw.relevant.push_back(i);
        jo.relevant.push_back(i);
      }
    }
    if (jw.relevant.empty()) continue;
    BinaryCode q(16);
    for (std::size_t b = 0; b < 16; ++b) q.set(b, rng() & 1u);
    jw.ranked = with_junk.rank(q, info);
    jo.ranked = without.rank(q, info);
    CHECK(*average_precision(jw) == *average_precision(jo));
  }
}

TEST_CASE("report values and files") {
  test::TempDir dir("report");
  const std::vector<QueryJudgment> js = {list_with_hits({1, 2}, 6), list_with_hits({1, 5}, 6), list_from_mask(0, 6)};
  const MetricsReport r = build_report(js, {});
  CHECK(r.map == doctest::Approx(0.85));
  CHECK(r.included_queries == 2);
  CHECK(r.excluded_queries == 1);
  CHECK(r.precision_at_hamming2.count(48) == 1);
  for (std::size_t k = 1; k < r.cmc.size(); ++k) CHECK(r.cmc[k].rate >= r.cmc[k - 1].rate);
  write_report(dir.path(), r);
  for (const char* f : {"report.json", "pr.csv", "cmc.csv", "prec_at_n.csv"}) CHECK(std::filesystem::exists(dir / f));
  CHECK(test::read_file(dir / "report.json").find("\"map\"") != std::string::npos);
}

TEST_CASE("single-shot keeps one relevant item per query") {
  // relevant at ranks 2, 4, 7 of 8
  const std::vector<QueryJudgment> lists = {list_with_hits({2, 4, 7}, 8), QueryJudgment{{{0, 0}, {1, 1}}, {}}};
  const auto a = single_shot(lists, 5);
  const auto b = single_shot(lists, 5);
  REQUIRE(a.size() == 2);
  REQUIRE(a[0].relevant.size() == 1);
  CHECK(a[0].ranked.size() == 6);
  CHECK(std::count_if(a[0].ranked.begin(), a[0].ranked.end(),
                      [&](const RankedEntry& e) { return e.image_id == a[0].relevant[0]; }) == 1);
  CHECK(a[0].relevant == b[0].relevant);
  CHECK(a[1].relevant.empty());
  CHECK(a[1].ranked.size() == 2);
  // the kept item's AP is 1 / its new rank
  std::size_t pos = 0;
  while (a[0].ranked[pos].image_id != a[0].relevant[0]) ++pos;
  CHECK(*average_precision(a[0]) == doctest::Approx(1.0 / static_cast<double>(pos + 1)));
  // across seeds every relevant item gets picked
  std::set<std::int64_t> picked;
  for (std::uint64_t s = 0; s < 64; ++s) picked.insert(single_shot(lists, s)[0].relevant[0]);
  CHECK(picked.size() == 3);
}
