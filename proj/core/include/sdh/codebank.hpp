#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sdh/hash_head.hpp"

namespace sdh {

struct GalleryRecord {
  BinaryCode code;
  std::int64_t identity = 0;
  std::int64_t camera = 0;
  std::int64_t image_id = 0;

  friend bool operator==(const GalleryRecord&, const GalleryRecord&) = default;
};

struct RankedEntry {
  std::int64_t image_id = 0;
  std::uint32_t distance = 0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

// Ascending distance, ties by ascending image id.
using RankedList = std::vector<RankedEntry>;

// Query metadata for cross-camera junk filtering: gallery records with the same
// identity AND camera as the query are dropped, as is the query image itself.
struct QueryInfo {
  std::int64_t identity = 0;
  std::int64_t camera = 0;
  std::optional<std::int64_t> image_id;
};

std::uint32_t hamming(const BinaryCode& a, const BinaryCode& b);

// Immutable after construction; queries may run concurrently.
class CodeBank {
 public:
  CodeBank() = default;
  explicit CodeBank(std::size_t bits) : bits_(bits), words_per_code_(BinaryCode::word_count(bits)) {}
  CodeBank(std::size_t bits, std::vector<GalleryRecord> records);

  void add(GalleryRecord record);

  std::size_t bits() const { return bits_; }
  std::size_t size() const { return meta_.size(); }
  bool empty() const { return meta_.empty(); }
  GalleryRecord record(std::size_t i) const;

  // Distance from query to every record, in storage order.
  std::vector<std::uint32_t> distances(const BinaryCode& query) const;

  RankedList rank(const BinaryCode& query, const QueryInfo& info) const;
  // Image ids with distance <= radius, junk-filtered, ascending.
  std::vector<std::int64_t> radius_search(const BinaryCode& query, const QueryInfo& info,
                                          std::uint32_t radius = 2) const;

 private:
  struct Meta {
    std::int64_t identity;
    std::int64_t camera;
    std::int64_t image_id;
  };

  void check_query(const BinaryCode& query) const;
  bool is_junk(const Meta& m, const QueryInfo& info) const;

  std::size_t bits_ = 0;
  std::size_t words_per_code_ = 0;
  std::vector<std::uint64_t> words_;  // codes back to back
  std::vector<Meta> meta_;
  // Record indices sorted by image id; ranking scans in this order.
  std::vector<std::uint32_t> by_image_id_;
};

// Gallery file:
//   "SDHGALR1" | u32 bits | u64 count | count x (ceil(bits/64) u64 words, i64 identity, i64 camera)
// Little-endian throughout. A record's image id is its position in the file.
void save_gallery(const std::filesystem::path& path, const CodeBank& bank);
CodeBank load_gallery(const std::filesystem::path& path);

}  // namespace sdh
