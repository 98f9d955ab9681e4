#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdh/codebank.hpp"
#include "sdh/metrics.hpp"
#include "sdh/model.hpp"

namespace sdh {

// One query per (identity, camera) pair, drawn with the seed. Returns sorted indices.
std::vector<std::size_t> select_queries(std::span<const std::int64_t> identities,
                                        std::span<const std::int64_t> cameras, std::uint64_t seed);

// Codes for every image; image ids are positions.
CodeBank encode_gallery(const Model& model, std::span<const Tensor> images, std::span<const std::int64_t> identities,
                        std::span<const std::int64_t> cameras);

// Cross-camera judgment: rank the bank with junk filtering; relevant ids are the
// bank records of the query identity seen by a different camera.
QueryJudgment judge_query(const CodeBank& bank, const BinaryCode& code, const QueryInfo& info);

struct RetrievalRun {
  std::vector<QueryJudgment> judgments;
  MetricsReport report;
};

// Full protocol on a held-out set: every image goes into the gallery, one query
// per identity and camera is drawn with query_seed.
RetrievalRun evaluate_retrieval(const Model& model, std::span<const Tensor> images,
                                std::span<const std::int64_t> identities, std::span<const std::int64_t> cameras,
                                std::uint64_t query_seed, ReportOptions options = {});

}  // namespace sdh
