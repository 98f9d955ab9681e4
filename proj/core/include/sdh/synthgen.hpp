#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sdh/dataset.hpp"
#include "sdh/tensor.hpp"

namespace sdh {

// Multi-camera pedestrian stand-in: every identity has a colored body template,
// every camera applies a fixed brightness/color-cast/shift transform, and every
// image adds independent pixel noise.
struct SynthConfig {
  std::size_t identities = 20;
  std::size_t images_per_view = 4;
  std::size_t views = 2;
  std::size_t height = 24;
  std::size_t width = 12;
  std::size_t channels = 3;
  // Spread of template colors around mid-gray, as a fraction of the 8-bit range.
  double identity_separation = 0.8;
  // Strength of the per-camera transform in [0, 1].
  double view_shift = 0.3;
  // Pixel noise standard deviation as a fraction of the 8-bit range.
  double noise = 0.03;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthImage {
  ManifestRow row;
  Tensor pixels;  // (H, W, C) in [0, 255], integer valued
};

// Images in manifest order: identity-major, then camera, then image index.
std::vector<SynthImage> generate_images(const SynthConfig& config);

// Noise-free rendering of one identity as seen by one camera.
Tensor render_identity(const SynthConfig& config, std::size_t identity, std::size_t view);

// Writes images/<id>_c<cam>_<k>.p?m and manifest.csv under out_dir.
Manifest generate(const SynthConfig& config, const std::filesystem::path& out_dir);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct DatasetSplit {
  Manifest train;
  Manifest val;
  Manifest test;
};

// Identity-disjoint partition; identities are shuffled with the seed.
DatasetSplit split(const Manifest& manifest, const SplitCounts& counts, std::uint64_t seed);

}  // namespace sdh
