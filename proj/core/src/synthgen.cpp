#include "sdh/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "sdh/error.hpp"

namespace sdh {

void SynthConfig::validate() const {
  if (identities == 0 || images_per_view == 0 || height < 8 || width < 4) {
    throw UsageError("synthetic config needs identities, images per view and an image of at least 8x4");
  }
  if (views < 2) throw UsageError("synthetic config needs at least two camera views");
  if (channels != 1 && channels != 3) throw UsageError("synthetic images have 1 or 3 channels");
  if (identity_separation <= 0 || view_shift < 0 || noise < 0) {
    throw UsageError("identity separation must be positive; view shift and noise non-negative");
  }
}

namespace {

struct Color {
  double c[3];
};

struct Blob {
  std::size_t y0, y1, x0, x1;
  Color color;
};

struct Template {
  Color head, torso, legs;
  std::vector<Blob> blobs;
};

struct ViewTransform {
  double gain;
  Color cast;
  long shift;
  double background;
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{seed & 0xffffffffu, seed >> 32, a, b};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t{out[0]} << 32) | out[1];
}

Color random_color(std::mt19937_64& rng, double separation) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Color c{};
  for (double& v : c.c) v = 127.5 + 127.5 * separation * u(rng);
  return c;
}

Template make_template(const SynthConfig& cfg, std::size_t identity) {
  std::mt19937_64 rng(stream_seed(cfg.seed, 1, identity));
  Template t;
  t.head = random_color(rng, cfg.identity_separation);
  t.torso = random_color(rng, cfg.identity_separation);
  t.legs = random_color(rng, cfg.identity_separation);
  const std::size_t h = cfg.height;
  const std::size_t w = cfg.width;
  for (int b = 0; b < 2; ++b) {
    std::uniform_int_distribution<std::size_t> ys(h / 5, h - h / 4);
    std::uniform_int_distribution<std::size_t> xs(w / 4, w - w / 4 - 1);
    const std::size_t y0 = ys(rng);
    const std::size_t x0 = xs(rng);
    t.blobs.push_back({y0, std::min(h, y0 + std::max<std::size_t>(2, h / 6)), x0,
                       std::min(w, x0 + std::max<std::size_t>(2, w / 4)), random_color(rng, cfg.identity_separation)});
  }
  return t;
}

ViewTransform make_view(const SynthConfig& cfg, std::size_t view) {
  std::mt19937_64 rng(stream_seed(cfg.seed, 2, view));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ViewTransform v{};
  v.gain = 1.0 + 0.5 * cfg.view_shift * u(rng);
  for (double& c : v.cast.c) c = 40.0 * cfg.view_shift * u(rng);
  v.shift = std::lround(cfg.view_shift * 0.15 * static_cast<double>(cfg.width) * u(rng));
  v.background = 100.0 + 80.0 * cfg.view_shift * u(rng);
  return v;
}

// Region of the body mask a template pixel belongs to: 0 background, 1 head, 2 torso, 3 legs.
int body_region(std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
  const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(w) - 0.5;
  if (fy < 0.18) {
    const double dy = (fy - 0.09) / 0.09;
    const double dx = fx / 0.18;
    return dx * dx + dy * dy <= 1.0 ? 1 : 0;
  }
  if (fy < 0.55) return std::abs(fx) <= 0.32 ? 2 : 0;
  return (std::abs(fx) <= 0.28 && std::abs(fx) >= 0.03) ? 3 : 0;
}

Tensor render(const SynthConfig& cfg, const Template& t, const ViewTransform& v) {
  const std::size_t h = cfg.height;
  const std::size_t w = cfg.width;
  Tensor img({h, w, cfg.channels});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      // Clamp-to-edge horizontal camera shift.
      const long sx = std::clamp<long>(static_cast<long>(x) - v.shift, 0, static_cast<long>(w) - 1);
      const auto ux = static_cast<std::size_t>(sx);
      const int region = body_region(y, ux, h, w);
      Color c{{v.background, v.background, v.background}};
      if (region == 1) c = t.head;
      if (region == 2) c = t.torso;
      if (region == 3) c = t.legs;
      if (region != 0) {
        for (const Blob& b : t.blobs) {
          if (y >= b.y0 && y < b.y1 && ux >= b.x0 && ux < b.x1) c = b.color;
        }
      }
      for (std::size_t k = 0; k < cfg.channels; ++k) {
        double value = cfg.channels == 1 ? (c.c[0] + c.c[1] + c.c[2]) / 3.0 : c.c[k];
        if (region != 0) value = value * v.gain + (cfg.channels == 1 ? v.cast.c[0] : v.cast.c[k]);
        img[(y * w + x) * cfg.channels + k] = value;
      }
    }
  }
  return img;
}

std::string image_name(const SynthConfig& cfg, std::size_t identity, std::size_t view, std::size_t k) {
  return "images/" + std::to_string(identity) + "_c" + std::to_string(view) + "_" + std::to_string(k) +
         (cfg.channels == 1 ? ".pgm" : ".ppm");
}

}  // namespace

Tensor render_identity(const SynthConfig& config, std::size_t identity, std::size_t view) {
  Tensor img = render(config, make_template(config, identity), make_view(config, view));
  for (double& v : img.values()) v = std::clamp(std::round(v), 0.0, 255.0);
  return img;
}

std::vector<SynthImage> generate_images(const SynthConfig& config) {
  config.validate();
  std::vector<ViewTransform> views;
  for (std::size_t v = 0; v < config.views; ++v) views.push_back(make_view(config, v));
  std::vector<SynthImage> out;
  out.reserve(config.identities * config.views * config.images_per_view);
  const double sigma = 255.0 * config.noise;
  for (std::size_t id = 0; id < config.identities; ++id) {
    const Template t = make_template(config, id);
    for (std::size_t v = 0; v < config.views; ++v) {
      const Tensor clean = render(config, t, views[v]);
      for (std::size_t k = 0; k < config.images_per_view; ++k) {
        std::mt19937_64 rng(stream_seed(config.seed, 3, (id * config.views + v) * config.images_per_view + k));
        std::normal_distribution<double> noise(0.0, 1.0);
        Tensor img = clean;
        for (double& px : img.values()) {
          if (sigma > 0) px += sigma * noise(rng);
          px = std::clamp(std::round(px), 0.0, 255.0);
        }
        out.push_back({{image_name(config, id, v, k), static_cast<std::int64_t>(id), static_cast<std::int64_t>(v)},
                       std::move(img)});
      }
    }
  }
  return out;
}

Manifest generate(const SynthConfig& config, const std::filesystem::path& out_dir) {
  const auto images = generate_images(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());
  Manifest m;
  m.base_dir = out_dir;
  for (const auto& img : images) {
    write_pnm(out_dir / img.row.image_path, img.pixels);
    m.rows.push_back(img.row);
  }
  write_manifest(out_dir / "manifest.csv", m);
  return m;
}

DatasetSplit split(const Manifest& manifest, const SplitCounts& counts, std::uint64_t seed) {
  std::set<std::int64_t> unique;
  for (const auto& r : manifest.rows) unique.insert(r.identity);
  std::vector<std::int64_t> ids(unique.begin(), unique.end());
  if (counts.train + counts.val + counts.test > ids.size()) {
    throw UsageError("split asks for " + std::to_string(counts.train + counts.val + counts.test) +
                     " identities but the dataset has " + std::to_string(ids.size()));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::map<std::int64_t, int> bucket;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    int b = -1;
    if (i < counts.train) {
      b = 0;
    } else if (i < counts.train + counts.val) {
      b = 1;
    } else if (i < counts.train + counts.val + counts.test) {
      b = 2;
    }
    bucket[ids[i]] = b;
  }
  DatasetSplit s;
  s.train.base_dir = s.val.base_dir = s.test.base_dir = manifest.base_dir;
  for (const auto& r : manifest.rows) {
    switch (bucket[r.identity]) {
      case 0:
        s.train.rows.push_back(r);
        break;
      case 1:
        s.val.rows.push_back(r);
        break;
      case 2:
        s.test.rows.push_back(r);
        break;
      default:
        break;
    }
  }
  return s;
}

}  // namespace sdh
