#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdh/tensor.hpp"

namespace sdh {

struct ManifestRow {
  std::string image_path;  // relative to the manifest's directory unless absolute
  std::int64_t identity = 0;
  std::int64_t camera = 0;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

// CSV with header "image_path,identity_id,camera_id". A row's image id is its
// zero-based position.
struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRow> rows;

  std::filesystem::path resolve(const ManifestRow& row) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Binary PGM (1 channel) or PPM (3 channels), 8-bit. Pixels are returned as
// (H, W, C) doubles in [0, 255].
Tensor read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Tensor& pixels);

// Loads every image of a manifest and rescales it to [-1, 1].
std::vector<Tensor> load_images(const Manifest& manifest);

}  // namespace sdh
