#include "sdh/codebank.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "sdh/error.hpp"

namespace sdh {

std::uint32_t hamming(const BinaryCode& a, const BinaryCode& b) {
  if (a.bits() != b.bits()) {
    throw UsageError("hamming distance between codes of " + std::to_string(a.bits()) + " and " +
                     std::to_string(b.bits()) + " bits");
  }
  const auto wa = a.words();
  const auto wb = b.words();
  std::uint32_t d = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) d += static_cast<std::uint32_t>(std::popcount(wa[i] ^ wb[i]));
  return d;
}

CodeBank::CodeBank(std::size_t bits, std::vector<GalleryRecord> records) : CodeBank(bits) {
  words_.reserve(records.size() * words_per_code_);
  meta_.reserve(records.size());
  for (auto& r : records) add(std::move(r));
}

void CodeBank::add(GalleryRecord record) {
  if (record.code.bits() != bits_) {
    throw UsageError("gallery record has " + std::to_string(record.code.bits()) + " bits, bank uses " +
                     std::to_string(bits_));
  }
  words_.insert(words_.end(), record.code.words().begin(), record.code.words().end());
  meta_.push_back({record.identity, record.camera, record.image_id});
  const auto index = static_cast<std::uint32_t>(meta_.size() - 1);
  if (by_image_id_.empty() || meta_[by_image_id_.back()].image_id <= record.image_id) {
    by_image_id_.push_back(index);
    return;
  }
  const auto pos = std::upper_bound(by_image_id_.begin(), by_image_id_.end(), record.image_id,
                                    [&](std::int64_t id, std::uint32_t i) { return id < meta_[i].image_id; });
  by_image_id_.insert(pos, index);
}

GalleryRecord CodeBank::record(std::size_t i) const {
  const auto first = words_.begin() + static_cast<std::ptrdiff_t>(i * words_per_code_);
  return {BinaryCode(bits_, std::vector<std::uint64_t>(first, first + static_cast<std::ptrdiff_t>(words_per_code_))),
          meta_[i].identity, meta_[i].camera, meta_[i].image_id};
}

void CodeBank::check_query(const BinaryCode& query) const {
  if (query.bits() != bits_) {
    throw UsageError("query code has " + std::to_string(query.bits()) + " bits, gallery uses " +
                     std::to_string(bits_));
  }
}

bool CodeBank::is_junk(const Meta& m, const QueryInfo& info) const {
  if (info.image_id && m.image_id == *info.image_id) return true;
  return m.identity == info.identity && m.camera == info.camera;
}

std::vector<std::uint32_t> CodeBank::distances(const BinaryCode& query) const {
  check_query(query);
  const auto q = query.words();
  std::vector<std::uint32_t> out(meta_.size());
  const std::uint64_t* w = words_.data();
  if (words_per_code_ == 2) {
    for (std::size_t i = 0; i < out.size(); ++i, w += 2) {
      out[i] = static_cast<std::uint32_t>(std::popcount(w[0] ^ q[0]) + std::popcount(w[1] ^ q[1]));
    }
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i, w += words_per_code_) {
    std::uint32_t d = 0;
    for (std::size_t k = 0; k < words_per_code_; ++k) d += static_cast<std::uint32_t>(std::popcount(w[k] ^ q[k]));
    out[i] = d;
  }
  return out;
}

RankedList CodeBank::rank(const BinaryCode& query, const QueryInfo& info) const {
  const auto dist = distances(query);
  // Counting sort on distance; scanning in image-id order keeps ties ascending by id.
  std::vector<std::uint32_t> counts(bits_ + 2, 0);
  std::size_t kept = 0;
  for (std::uint32_t i : by_image_id_) {
    if (is_junk(meta_[i], info)) continue;
    ++counts[dist[i] + 1];
    ++kept;
  }
  for (std::size_t d = 1; d < counts.size(); ++d) counts[d] += counts[d - 1];
  RankedList out(kept);
  for (std::uint32_t i : by_image_id_) {
    if (is_junk(meta_[i], info)) continue;
    out[counts[dist[i]]++] = {meta_[i].image_id, dist[i]};
  }
  return out;
}

std::vector<std::int64_t> CodeBank::radius_search(const BinaryCode& query, const QueryInfo& info,
                                                  std::uint32_t radius) const {
  const auto dist = distances(query);
  std::vector<std::int64_t> out;
  for (std::uint32_t i : by_image_id_) {
    if (dist[i] <= radius && !is_junk(meta_[i], info)) out.push_back(meta_[i].image_id);
  }
  return out;
}

namespace {

constexpr char kGalleryMagic[8] = {'S', 'D', 'H', 'G', 'A', 'L', 'R', '1'};

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void save_gallery(const std::filesystem::path& path, const CodeBank& bank) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write gallery " + path.string());
  out.write(kGalleryMagic, sizeof kGalleryMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(bank.bits()));
  put<std::uint64_t>(out, bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const GalleryRecord r = bank.record(i);
    if (r.image_id != static_cast<std::int64_t>(i)) {
      throw UsageError("gallery files store records in image-id order starting at 0");
    }
    for (std::uint64_t w : r.code.words()) put(out, w);
    put<std::int64_t>(out, r.identity);
    put<std::int64_t>(out, r.camera);
  }
  if (!out) throw IoError("short write on gallery " + path.string());
}

CodeBank load_gallery(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open gallery " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kGalleryMagic, sizeof magic) != 0) {
    throw IoError(path.string() + " is not a gallery file");
  }
  const auto bits = get<std::uint32_t>(in);
  const auto count = get<std::uint64_t>(in);
  if (!in || bits == 0) throw IoError("corrupt gallery header in " + path.string());
  CodeBank bank(bits);
  const std::size_t words = BinaryCode::word_count(bits);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::vector<std::uint64_t> code(words);
    for (auto& w : code) w = get<std::uint64_t>(in);
    const auto identity = get<std::int64_t>(in);
    const auto camera = get<std::int64_t>(in);
    if (!in) throw IoError("truncated gallery " + path.string());
    bank.add({BinaryCode(bits, std::move(code)), identity, camera, static_cast<std::int64_t>(i)});
  }
  return bank;
}

}  // namespace sdh
