#include "sacnet/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>

#include "sacnet/error.hpp"
#include "sacnet/random.hpp"

namespace sacnet {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

// Header tokens are separated by whitespace; '#' starts a comment running
// to the end of the line.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const std::string& origin)
      : bytes_(bytes), origin_(origin) {}

  int next_int(const char* what) {
    skip_space_and_comments();
    int64_t v = 0;
    size_t digits = 0;
    while (pos_ < bytes_.size() &&
           std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1 << 24)) fail(std::string(what) + " too large");
      ++digits;
    }
    if (digits == 0) fail(std::string("malformed header: expected ") + what);
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  size_t raster_start() {
    if (pos_ >= bytes_.size() ||
        !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail("malformed header: no separator before raster");
    }
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(origin_ + ": " + msg);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  const std::string& origin_;
  size_t pos_ = 2;
};

uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

std::string encode_pnm(const Tensor& t, int channels) {
  if (t.n() != 1 || t.c() != channels) {
    throw ShapeError("encode: expected (1," + std::to_string(channels) +
                     ",H,W), got " + t.shape().str());
  }
  std::string out = (channels == 3 ? "P6\n" : "P5\n") + std::to_string(t.w()) +
                    " " + std::to_string(t.h()) + "\n255\n";
  const int64_t hw = t.h() * t.w();
  out.reserve(out.size() + static_cast<size_t>(hw * channels));
  for (int64_t i = 0; i < hw; ++i) {
    for (int c = 0; c < channels; ++c) {
      out.push_back(static_cast<char>(quantize(t.plane(0, c)[i])));
    }
  }
  return out;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Smooth random field in roughly [-1, 1]: sum of bilinearly interpolated
// lattice noise, octave o on a (2^(o+1)+1)^2 lattice with weight 2^-o.
std::vector<float> value_noise(int size, int octaves, Rng& rng) {
  std::vector<double> field(static_cast<size_t>(size) * size, 0.0);
  double total_weight = 0;
  for (int o = 0; o < octaves; ++o) {
    const int cells = 2 << o;
    const int side = cells + 1;
    std::vector<double> lattice(static_cast<size_t>(side) * side);
    for (double& v : lattice) v = uniform(rng, -1.0, 1.0);
    const double weight = std::ldexp(1.0, -o);
    total_weight += weight;
    for (int y = 0; y < size; ++y) {
      const double fy = (y + 0.5) / size * cells;
      const int y0 = std::min(static_cast<int>(fy), cells - 1);
      const double ty = fy - y0;
      for (int x = 0; x < size; ++x) {
        const double fx = (x + 0.5) / size * cells;
        const int x0 = std::min(static_cast<int>(fx), cells - 1);
        const double tx = fx - x0;
        auto at = [&](int yy, int xx) { return lattice[yy * side + xx]; };
        const double top = at(y0, x0) * (1 - tx) + at(y0, x0 + 1) * tx;
        const double bottom = at(y0 + 1, x0) * (1 - tx) + at(y0 + 1, x0 + 1) * tx;
        field[static_cast<size_t>(y) * size + x] +=
            weight * (top * (1 - ty) + bottom * ty);
      }
    }
  }
  std::vector<float> out(field.size());
  for (size_t i = 0; i < field.size(); ++i) {
    out[i] = static_cast<float>(total_weight > 0 ? field[i] / total_weight : 0.0);
  }
  return out;
}

struct Point {
  double x;
  double y;
};

// One random shape as an inside test on pixel centers.
class Shape2d {
 public:
  static Shape2d random(int size, Rng& rng) {
    Shape2d s;
    s.kind_ = static_cast<int>(uniform_index(rng, 3));
    s.cx_ = uniform(rng, 0.15, 0.85) * size;
    s.cy_ = uniform(rng, 0.15, 0.85) * size;
    const double r = uniform(rng, 0.08, 0.3) * size;
    s.a_ = r * uniform(rng, 0.5, 1.0);
    s.b_ = r * uniform(rng, 0.5, 1.0);
    s.theta_ = uniform(rng, 0.0, std::numbers::pi);
    if (s.kind_ == 2) {
      // Vertices on an ellipse in angular order form a convex polygon.
      const int k = 3 + static_cast<int>(uniform_index(rng, 5));
      std::vector<double> angles(k);
      for (double& t : angles) t = uniform(rng, 0.0, 2 * std::numbers::pi);
      std::sort(angles.begin(), angles.end());
      for (double t : angles) s.poly_.push_back({s.a_ * std::cos(t), s.b_ * std::sin(t)});
    }
    return s;
  }

  bool contains(double px, double py) const {
    const double dx = px - cx_, dy = py - cy_;
    const double u = dx * std::cos(theta_) + dy * std::sin(theta_);
    const double v = -dx * std::sin(theta_) + dy * std::cos(theta_);
    switch (kind_) {
      case 0:
        return (u / a_) * (u / a_) + (v / b_) * (v / b_) <= 1.0;
      case 1:
        return std::abs(u) <= a_ && std::abs(v) <= b_;
      default: {
        const size_t k = poly_.size();
        for (size_t i = 0; i < k; ++i) {
          const Point& p = poly_[i];
          const Point& q = poly_[(i + 1) % k];
          if ((q.x - p.x) * (v - p.y) - (q.y - p.y) * (u - p.x) < 0) return false;
        }
        return true;
      }
    }
  }

 private:
  int kind_ = 0;
  double cx_ = 0, cy_ = 0, a_ = 1, b_ = 1, theta_ = 0;
  std::vector<Point> poly_;
};

std::string sample_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05d", index);
  return buf;
}

}  // namespace

Tensor decode_pnm(const std::string& bytes, int channels,
                  const std::string& origin) {
  const char* magic = channels == 3 ? "P6" : "P5";
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0) {
    throw DataError(origin + ": expected " + magic + " header");
  }
  HeaderReader header(bytes, origin);
  const int w = header.next_int("width");
  const int h = header.next_int("height");
  const int maxval = header.next_int("maxval");
  if (w < 1 || h < 1) header.fail("empty raster");
  if (maxval != 255) {
    header.fail("unsupported maxval " + std::to_string(maxval) + " (need 255)");
  }
  const size_t start = header.raster_start();
  const size_t need = static_cast<size_t>(w) * h * channels;
  if (bytes.size() < start + need) {
    header.fail("truncated raster: " + std::to_string(bytes.size() - std::min(bytes.size(), start)) +
                " of " + std::to_string(need) + " bytes");
  }
  Tensor t({1, channels, h, w});
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  const int64_t hw = static_cast<int64_t>(w) * h;
  for (int64_t i = 0; i < hw; ++i) {
    for (int c = 0; c < channels; ++c) {
      t.plane(0, c)[i] = static_cast<float>(raster[i * channels + c]) / 255.0f;
    }
  }
  return t;
}

Tensor load_image(const fs::path& path) {
  return decode_pnm(read_file(path), 3, path.string());
}

Tensor load_gray(const fs::path& path) {
  return decode_pnm(read_file(path), 1, path.string());
}

Tensor load_mask(const fs::path& path) {
  Tensor t = load_gray(path);
  // Exact in float: v * 255 recovers the stored byte.
  for (float& v : t.data()) v = v * 255.0f >= 128.0f ? 1.0f : 0.0f;
  return t;
}

void save_image(const fs::path& path, const Tensor& image) {
  write_file(path, encode_pnm(image, 3));
}

void save_gray(const fs::path& path, const Tensor& map) {
  write_file(path, encode_pnm(map, 1));
}

void SynthConfig::validate() const {
  if (size < 8) throw ConfigError("synth.size must be >= 8");
  if (count < 1) throw ConfigError("synth.count must be >= 1");
  if (max_shapes < 1) throw ConfigError("synth.max_shapes must be >= 1");
  if (octaves < 1 || octaves > 8) throw ConfigError("synth.octaves must be in 1..8");
  if (min_contrast < 0 || max_contrast < min_contrast || max_contrast > 0.3) {
    throw ConfigError("synth contrast range must satisfy 0 <= min <= max <= 0.3");
  }
  if (!(0 < min_fraction && min_fraction < max_fraction && max_fraction < 1)) {
    throw ConfigError("synth foreground fraction range must lie inside (0, 1)");
  }
}

Sample synth_sample(const SynthConfig& cfg, int index) {
  cfg.validate();
  Rng rng(splitmix64(cfg.seed ^ splitmix64(static_cast<uint64_t>(index))));
  const int n = cfg.size;
  const int64_t hw = static_cast<int64_t>(n) * n;

  Tensor mask({1, 1, n, n});
  int64_t fg = 0;
  for (int attempt = 0;; ++attempt) {
    const int shapes = 1 + static_cast<int>(uniform_index(rng, cfg.max_shapes));
    std::vector<Shape2d> drawn;
    for (int s = 0; s < shapes; ++s) drawn.push_back(Shape2d::random(n, rng));
    fg = 0;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        bool in = false;
        for (const auto& s : drawn) in = in || s.contains(x + 0.5, y + 0.5);
        mask.at(0, 0, y, x) = in ? 1.0f : 0.0f;
        fg += in ? 1 : 0;
      }
    }
    const double fraction = static_cast<double>(fg) / hw;
    if (fraction >= cfg.min_fraction && fraction <= cfg.max_fraction) break;
    if (attempt > 1000) {
      throw ConfigError("synth: cannot meet the foreground fraction range");
    }
  }

  // Colors: background base in [0.3, 0.7] per channel; the foreground base
  // sits contrast away along a random direction pointing toward the
  // farther end of each channel's range, which keeps both inside [0, 1].
  std::array<double, 3> bg_base{}, dir{};
  double norm = 0;
  for (int c = 0; c < 3; ++c) {
    bg_base[c] = uniform(rng, 0.3, 0.7);
    dir[c] = std::abs(normal(rng)) + 1e-3;
    norm += dir[c] * dir[c];
  }
  norm = std::sqrt(norm);
  const double contrast = uniform(rng, cfg.min_contrast, cfg.max_contrast);
  Tensor image({1, 3, n, n});
  for (int c = 0; c < 3; ++c) {
    const double sign = bg_base[c] < 0.5 ? 1.0 : -1.0;
    const double offset = sign * contrast * dir[c] / norm;
    const std::vector<float> bg_tex = value_noise(n, cfg.octaves, rng);
    const std::vector<float> fg_tex = value_noise(n, cfg.octaves, rng);
    float* px = image.plane(0, c);
    const float* m = mask.plane(0, 0);
    double fg_sum = 0, bg_sum = 0;
    for (int64_t i = 0; i < hw; ++i) {
      if (m[i] > 0) {
        px[i] = static_cast<float>(bg_base[c] + offset +
                                   0.3 * cfg.texture_amplitude * fg_tex[i]);
        fg_sum += px[i];
      } else {
        px[i] = static_cast<float>(bg_base[c] + cfg.texture_amplitude * bg_tex[i]);
        bg_sum += px[i];
      }
    }
    // Pin the realized mean difference to the drawn offset.
    const double shift =
        (bg_sum / static_cast<double>(hw - fg) + offset) - fg_sum / static_cast<double>(fg);
    for (int64_t i = 0; i < hw; ++i) {
      if (m[i] > 0) px[i] = static_cast<float>(px[i] + shift);
      px[i] = std::clamp(px[i], 0.0f, 1.0f);
    }
  }
  return {std::move(image), std::move(mask), sample_id(index)};
}

std::vector<Sample> synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) out.push_back(synth_sample(cfg, i));
  return out;
}

void save_dataset(const fs::path& root, const std::vector<Sample>& samples) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  std::string index;
  for (const auto& s : samples) {
    save_image(root / "images" / (s.id + ".ppm"), s.image);
    save_gray(root / "masks" / (s.id + ".pgm"), s.mask);
    index += s.id + "\n";
  }
  write_file(root / "index.txt", index);
}

std::vector<Sample> load_dataset(const fs::path& root) {
  const fs::path index_path = root / "index.txt";
  if (!fs::exists(index_path)) {
    throw DataError("dataset index not found: " + index_path.string());
  }
  std::ifstream in(index_path);
  std::vector<Sample> out;
  std::string id;
  while (std::getline(in, id)) {
    while (!id.empty() && std::isspace(static_cast<unsigned char>(id.back()))) id.pop_back();
    if (id.empty()) continue;
    Sample s;
    s.id = id;
    s.image = load_image(root / "images" / (id + ".ppm"));
    s.mask = load_mask(root / "masks" / (id + ".pgm"));
    if (s.image.h() != s.mask.h() || s.image.w() != s.mask.w()) {
      throw DataError("sample " + id + ": image " + s.image.shape().str() +
                      " and mask " + s.mask.shape().str() + " differ in size");
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("dataset is empty: " + index_path.string());
  return out;
}

}  // namespace sacnet
