#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sdh/codebank.hpp"

namespace sdh {

struct QueryJudgment {
  RankedList ranked;
  // Cross-camera ground truths. May be empty, in which case the query is
  // excluded from every aggregate and counted separately.
  std::vector<std::int64_t> relevant;
};

// (1/m) sum_k precision at the rank of the k-th relevant item; relevant items
// missing from the list contribute zero. nullopt when there are no relevant ids.
std::optional<double> average_precision(const QueryJudgment& judgment);

// Mean AP over queries with at least one relevant id. Throws UsageError if none.
double mean_average_precision(std::span<const QueryJudgment> judgments);

enum class RadiusDenominator {
  TopN,         // relevant items within the radius among the top N, divided by N
  WithinRadius  // same numerator, divided by the number of top-N items within the radius
};

double precision_within_radius(std::span<const QueryJudgment> judgments, std::size_t n, std::uint32_t radius = 2,
                               RadiusDenominator denominator = RadiusDenominator::TopN);

// Mean over queries of (relevant items in the top N) / N.
double precision_at_n(std::span<const QueryJudgment> judgments, std::size_t n);

struct CmcPoint {
  std::size_t rank = 0;
  double rate = 0.0;
};

// rate(k) = fraction of queries whose first relevant item sits at rank <= k.
std::vector<CmcPoint> cmc(std::span<const QueryJudgment> judgments, std::size_t max_rank);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

// One point per rank cut of a single list.
std::vector<PrPoint> precision_recall_curve(const QueryJudgment& judgment);
// Precision and recall averaged over queries at each rank cut; shorter lists hold their last value.
std::vector<PrPoint> precision_recall_curve(std::span<const QueryJudgment> judgments);

// Single-shot protocol: per query keep one relevant item, drawn with the seed,
// and drop the other relevant items from its ranked list. Queries without
// relevant items pass through unchanged.
std::vector<QueryJudgment> single_shot(std::span<const QueryJudgment> judgments, std::uint64_t seed);

struct MetricsReport {
  double map = 0.0;
  std::size_t included_queries = 0;
  std::size_t excluded_queries = 0;
  // Keyed by code length in bits.
  std::map<std::size_t, double> precision_at_hamming2;
  std::vector<PrPoint> pr_curve;
  std::vector<std::pair<std::size_t, double>> precision_at_n;
  std::vector<CmcPoint> cmc;
};

struct ReportOptions {
  std::size_t bits = 48;
  std::uint32_t radius = 2;
  std::size_t radius_top_n = 10;
  RadiusDenominator radius_denominator = RadiusDenominator::TopN;
  std::vector<std::size_t> top_n = {1, 5, 10, 20, 50, 100};
  std::size_t max_rank = 20;
};

MetricsReport build_report(std::span<const QueryJudgment> judgments, const ReportOptions& options);

std::string report_json(const MetricsReport& report);
// report.json plus pr.csv, cmc.csv and prec_at_n.csv in dir.
void write_report(const std::filesystem::path& dir, const MetricsReport& report);

}  // namespace sdh
