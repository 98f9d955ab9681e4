#include "sdh/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "sdh/error.hpp"

namespace sdh {

namespace {

bool is_relevant(const QueryJudgment& j, std::int64_t id) {
  return std::binary_search(j.relevant.begin(), j.relevant.end(), id);
}

std::vector<const QueryJudgment*> includable(std::span<const QueryJudgment> judgments) {
  std::vector<const QueryJudgment*> out;
  for (const auto& j : judgments) {
    if (!j.relevant.empty()) out.push_back(&j);
  }
  return out;
}

QueryJudgment canonical(const QueryJudgment& j) {
  QueryJudgment c = j;
  std::sort(c.relevant.begin(), c.relevant.end());
  c.relevant.erase(std::unique(c.relevant.begin(), c.relevant.end()), c.relevant.end());
  return c;
}

}  // namespace

std::optional<double> average_precision(const QueryJudgment& judgment) {
  const QueryJudgment j = canonical(judgment);
  if (j.relevant.empty()) return std::nullopt;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < j.ranked.size(); ++pos) {
    if (is_relevant(j, j.ranked[pos].image_id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
    }
  }
  return sum / static_cast<double>(j.relevant.size());
}

double mean_average_precision(std::span<const QueryJudgment> judgments) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& j : judgments) {
    if (const auto ap = average_precision(j)) {
      sum += *ap;
      ++n;
    }
  }
  if (n == 0) throw UsageError("mean average precision needs at least one query with relevant items");
  return sum / static_cast<double>(n);
}

double precision_within_radius(std::span<const QueryJudgment> judgments, std::size_t n, std::uint32_t radius,
                               RadiusDenominator denominator) {
  if (n == 0) throw UsageError("precision within radius needs N > 0");
  const auto queries = includable(judgments);
  if (queries.empty()) return 0.0;
  double sum = 0.0;
  for (const QueryJudgment* q : queries) {
    const QueryJudgment j = canonical(*q);
    std::size_t within = 0;
    std::size_t hits = 0;
    for (std::size_t pos = 0; pos < std::min(n, j.ranked.size()); ++pos) {
      if (j.ranked[pos].distance > radius) continue;
      ++within;
      if (is_relevant(j, j.ranked[pos].image_id)) ++hits;
    }
    if (denominator == RadiusDenominator::TopN) {
      sum += static_cast<double>(hits) / static_cast<double>(n);
    } else if (within > 0) {
      sum += static_cast<double>(hits) / static_cast<double>(within);
    }
  }
  return sum / static_cast<double>(queries.size());
}

double precision_at_n(std::span<const QueryJudgment> judgments, std::size_t n) {
  if (n == 0) throw UsageError("precision at N needs N > 0");
  const auto queries = includable(judgments);
  if (queries.empty()) return 0.0;
  double sum = 0.0;
  for (const QueryJudgment* q : queries) {
    const QueryJudgment j = canonical(*q);
    std::size_t hits = 0;
    for (std::size_t pos = 0; pos < std::min(n, j.ranked.size()); ++pos) {
      if (is_relevant(j, j.ranked[pos].image_id)) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(n);
  }
  return sum / static_cast<double>(queries.size());
}

std::vector<CmcPoint> cmc(std::span<const QueryJudgment> judgments, std::size_t max_rank) {
  const auto queries = includable(judgments);
  std::vector<std::size_t> first_hit_counts(max_rank + 1, 0);
  for (const QueryJudgment* q : queries) {
    const QueryJudgment j = canonical(*q);
    for (std::size_t pos = 0; pos < j.ranked.size() && pos < max_rank; ++pos) {
      if (is_relevant(j, j.ranked[pos].image_id)) {
        ++first_hit_counts[pos + 1];
        break;
      }
    }
  }
  std::vector<CmcPoint> out;
  std::size_t cumulative = 0;
  for (std::size_t k = 1; k <= max_rank; ++k) {
    cumulative += first_hit_counts[k];
    const double rate =
        queries.empty() ? 0.0 : static_cast<double>(cumulative) / static_cast<double>(queries.size());
    out.push_back({k, rate});
  }
  return out;
}

std::vector<PrPoint> precision_recall_curve(const QueryJudgment& judgment) {
  const QueryJudgment j = canonical(judgment);
  std::vector<PrPoint> out;
  if (j.relevant.empty()) return out;
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < j.ranked.size(); ++pos) {
    if (is_relevant(j, j.ranked[pos].image_id)) ++hits;
    out.push_back({static_cast<double>(hits) / static_cast<double>(j.relevant.size()),
                   static_cast<double>(hits) / static_cast<double>(pos + 1)});
  }
  return out;
}

std::vector<PrPoint> precision_recall_curve(std::span<const QueryJudgment> judgments) {
  std::vector<std::vector<PrPoint>> curves;
  std::size_t longest = 0;
  for (const QueryJudgment* q : includable(judgments)) {
    curves.push_back(precision_recall_curve(*q));
    longest = std::max(longest, curves.back().size());
  }
  std::vector<PrPoint> out(longest);
  for (std::size_t k = 0; k < longest; ++k) {
    for (const auto& c : curves) {
      const PrPoint p = c.empty() ? PrPoint{} : c[std::min(k, c.size() - 1)];
      out[k].recall += p.recall;
      out[k].precision += p.precision;
    }
    out[k].recall /= static_cast<double>(curves.size());
    out[k].precision /= static_cast<double>(curves.size());
  }
  return out;
}

std::vector<QueryJudgment> single_shot(std::span<const QueryJudgment> judgments, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<QueryJudgment> out;
  out.reserve(judgments.size());
  for (const auto& q : judgments) {
    QueryJudgment j = canonical(q);
    if (!j.relevant.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, j.relevant.size() - 1);
      const std::int64_t keep = j.relevant[pick(rng)];
      std::erase_if(j.ranked, [&](const RankedEntry& e) { return e.image_id != keep && is_relevant(j, e.image_id); });
      j.relevant = {keep};
    }
    out.push_back(std::move(j));
  }
  return out;
}

MetricsReport build_report(std::span<const QueryJudgment> judgments, const ReportOptions& options) {
  MetricsReport r;
  r.included_queries = includable(judgments).size();
  r.excluded_queries = judgments.size() - r.included_queries;
  r.map = mean_average_precision(judgments);
  r.precision_at_hamming2[options.bits] =
      precision_within_radius(judgments, options.radius_top_n, options.radius, options.radius_denominator);
  r.pr_curve = precision_recall_curve(judgments);
  for (std::size_t n : options.top_n) r.precision_at_n.emplace_back(n, precision_at_n(judgments, n));
  r.cmc = cmc(judgments, options.max_rank);
  return r;
}

std::string report_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["map"] = report.map;
  j["included_queries"] = report.included_queries;
  j["excluded_queries"] = report.excluded_queries;
  nlohmann::ordered_json radius = nlohmann::ordered_json::object();
  for (const auto& [bits, v] : report.precision_at_hamming2) radius[std::to_string(bits)] = v;
  j["precision_at_hamming2"] = radius;
  nlohmann::ordered_json pn = nlohmann::ordered_json::array();
  for (const auto& [n, v] : report.precision_at_n) pn.push_back({{"n", n}, {"precision", v}});
  j["precision_at_n"] = pn;
  nlohmann::ordered_json c = nlohmann::ordered_json::array();
  for (const auto& p : report.cmc) c.push_back({{"rank", p.rank}, {"rate", p.rate}});
  j["cmc"] = c;
  return j.dump(2) + "\n";
}

void write_report(const std::filesystem::path& dir, const MetricsReport& report) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out << std::setprecision(17);
    return out;
  };
  {
    auto out = open("report.json");
    out << report_json(report);
  }
  {
    auto out = open("pr.csv");
    out << "recall,precision\n";
    for (const auto& p : report.pr_curve) out << p.recall << ',' << p.precision << '\n';
  }
  {
    auto out = open("cmc.csv");
    out << "rank,rate\n";
    for (const auto& p : report.cmc) out << p.rank << ',' << p.rate << '\n';
  }
  {
    auto out = open("prec_at_n.csv");
    out << "n,precision\n";
    for (const auto& [n, v] : report.precision_at_n) out << n << ',' << v << '\n';
  }
}

}  // namespace sdh
