#include "sdh/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sdh/error.hpp"
#include "sdh/net.hpp"

namespace sdh {

std::filesystem::path Manifest::resolve(const ManifestRow& row) const {
  const std::filesystem::path p(row.image_path);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) return m;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "image_path,identity_id,camera_id") {
    throw IoError(path.string() + ": expected header 'image_path,identity_id,camera_id'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestRow row;
    std::string id;
    std::string cam;
    if (!std::getline(fields, row.image_path, ',') || !std::getline(fields, id, ',') ||
        !std::getline(fields, cam, ',')) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected three columns");
    }
    try {
      row.identity = std::stoll(id);
      row.camera = std::stoll(cam);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": identity and camera must be integers");
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << "image_path,identity_id,camera_id\n";
  for (const auto& r : manifest.rows) out << r.image_path << ',' << r.identity << ',' << r.camera << '\n';
  if (!out) throw IoError("short write on manifest " + path.string());
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] != '#') return tok;
    std::string rest;
    std::getline(in, rest);
  }
  return {};
}

}  // namespace

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  const std::string magic = next_token(in);
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw IoError(path.string() + " is not a binary PGM/PPM image");
  }
  std::size_t w = 0;
  std::size_t h = 0;
  int maxval = 0;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PNM header");
  }
  if (maxval != 255 || w == 0 || h == 0) throw IoError(path.string() + ": only 8-bit images are supported");
  in.get();  // single whitespace byte before the raster
  std::vector<unsigned char> raster(w * h * channels);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!in) throw IoError(path.string() + ": truncated raster");
  Tensor t({h, w, channels});
  for (std::size_t i = 0; i < raster.size(); ++i) t[i] = raster[i];
  return t;
}

void write_pnm(const std::filesystem::path& path, const Tensor& pixels) {
  const Shape& s = pixels.shape();
  if (s.size() != 3 || (s[2] != 1 && s[2] != 3)) {
    throw UsageError("PNM output needs an (H, W, 1) or (H, W, 3) tensor, got " + shape_string(s));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << (s[2] == 1 ? "P5" : "P6") << '\n' << s[1] << ' ' << s[0] << "\n255\n";
  std::vector<unsigned char> raster(pixels.size());
  for (std::size_t i = 0; i < raster.size(); ++i) {
    raster[i] = static_cast<unsigned char>(std::clamp(std::lround(pixels[i]), 0L, 255L));
  }
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("short write on image " + path.string());
}

std::vector<Tensor> load_images(const Manifest& manifest) {
  std::vector<Tensor> out;
  out.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) out.push_back(normalize_image(read_pnm(manifest.resolve(row))));
  return out;
}

}  // namespace sdh
