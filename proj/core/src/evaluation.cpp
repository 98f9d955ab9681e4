#include "sdh/evaluation.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "sdh/error.hpp"

namespace sdh {

std::vector<std::size_t> select_queries(std::span<const std::int64_t> identities,
                                        std::span<const std::int64_t> cameras, std::uint64_t seed) {
  if (identities.size() != cameras.size()) throw UsageError("identities and cameras differ in length");
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < identities.size(); ++i) groups[{identities[i], cameras[i]}].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  for (const auto& [key, rows] : groups) {
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    out.push_back(rows[pick(rng)]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

CodeBank encode_gallery(const Model& model, std::span<const Tensor> images, std::span<const std::int64_t> identities,
                        std::span<const std::int64_t> cameras) {
  if (images.size() != identities.size() || images.size() != cameras.size()) {
    throw UsageError("images, identities and cameras differ in length");
  }
  CodeBank bank(model.config.hash.bits);
  for (std::size_t i = 0; i < images.size(); ++i) {
    bank.add({model.encode(images[i]), identities[i], cameras[i], static_cast<std::int64_t>(i)});
  }
  return bank;
}

QueryJudgment judge_query(const CodeBank& bank, const BinaryCode& code, const QueryInfo& info) {
  QueryJudgment j;
  j.ranked = bank.rank(code, info);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const GalleryRecord r = bank.record(i);
    if (r.identity == info.identity && r.camera != info.camera && r.image_id != info.image_id) {
      j.relevant.push_back(r.image_id);
    }
  }
  std::sort(j.relevant.begin(), j.relevant.end());
  return j;
}

RetrievalRun evaluate_retrieval(const Model& model, std::span<const Tensor> images,
                                std::span<const std::int64_t> identities, std::span<const std::int64_t> cameras,
                                std::uint64_t query_seed, ReportOptions options) {
  const CodeBank bank = encode_gallery(model, images, identities, cameras);
  RetrievalRun run;
  for (std::size_t q : select_queries(identities, cameras, query_seed)) {
    const GalleryRecord r = bank.record(q);
    run.judgments.push_back(judge_query(bank, r.code, {r.identity, r.camera, r.image_id}));
  }
  options.bits = model.config.hash.bits;
  run.report = build_report(run.judgments, options);
  return run;
}

}  // namespace sdh
