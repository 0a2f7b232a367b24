#include "easal/image.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace easal {

namespace fs = std::filesystem;

namespace {

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  std::vector<std::string> comments;
};

PnmHeader read_pnm_header(std::istream& in, const fs::path& path) {
  PnmHeader h;
  in >> h.magic;
  if (h.magic != "P5" && h.magic != "P6")
    throw std::runtime_error(path.string() + ": not a binary PGM/PPM file (magic '" + h.magic + "')");
  int fields[3];
  int got = 0;
  while (got < 3) {
    int c = in.peek();
    if (c == EOF) throw std::runtime_error(path.string() + ": truncated PNM header");
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string line;
      std::getline(in, line);
      if (!line.empty() && line[0] == '#') line.erase(0, 1);
      if (!line.empty() && line[0] == ' ') line.erase(0, 1);
      h.comments.push_back(line);
    } else {
      in >> fields[got++];
      if (!in) throw std::runtime_error(path.string() + ": malformed PNM header");
    }
  }
  h.width = fields[0];
  h.height = fields[1];
  h.maxval = fields[2];
  if (h.width < 1 || h.height < 1 || h.maxval != 255)
    throw std::runtime_error(path.string() + ": only 8-bit PNM images are supported");
  in.get();  // single whitespace before payload
  return h;
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t n, const fs::path& path) {
  std::vector<std::uint8_t> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw std::runtime_error(path.string() + ": truncated PNM payload");
  return buf;
}

void atomic_write(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::uint8_t quantize(double v) {
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

std::string pnm_header_text(const std::string& magic, int w, int h, const ImageMeta& meta) {
  std::ostringstream os;
  os << magic << "\n";
  for (const std::string& c : meta.comments) os << "# " << c << "\n";
  os << w << " " << h << "\n255\n";
  return os.str();
}

}  // namespace

Tensor read_image(const fs::path& path, ImageMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path.string());
  PnmHeader h = read_pnm_header(in, path);
  if (meta) meta->comments = h.comments;
  const std::size_t npix = static_cast<std::size_t>(h.width) * h.height;
  Tensor t({3, h.height, h.width});
  if (h.magic == "P6") {
    auto buf = read_payload(in, npix * 3, path);
    for (int y = 0; y < h.height; ++y)
      for (int x = 0; x < h.width; ++x)
        for (int c = 0; c < 3; ++c)
          t.at(c, y, x) = buf[(static_cast<std::size_t>(y) * h.width + x) * 3 + c] / 255.0;
  } else {
    auto buf = read_payload(in, npix, path);
    for (int y = 0; y < h.height; ++y)
      for (int x = 0; x < h.width; ++x)
        for (int c = 0; c < 3; ++c)
          t.at(c, y, x) = buf[static_cast<std::size_t>(y) * h.width + x] / 255.0;
  }
  return t;
}

Tensor read_gray(const fs::path& path, ImageMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path.string());
  PnmHeader h = read_pnm_header(in, path);
  if (h.magic != "P5") throw std::runtime_error(path.string() + ": expected grayscale PGM, got color");
  if (meta) meta->comments = h.comments;
  auto buf = read_payload(in, static_cast<std::size_t>(h.width) * h.height, path);
  Tensor t({1, h.height, h.width});
  for (std::size_t i = 0; i < buf.size(); ++i) t.data[i] = buf[i] / 255.0;
  return t;
}

void write_gray(const fs::path& path, const Tensor& map, const ImageMeta& meta) {
  if (map.rank() != 3 || map.dim(0) != 1) throw std::invalid_argument("write_gray: expected 1xHxW tensor");
  std::string bytes = pnm_header_text("P5", map.dim(2), map.dim(1), meta);
  bytes.reserve(bytes.size() + map.size());
  for (double v : map.data) bytes.push_back(static_cast<char>(quantize(v)));
  atomic_write(path, bytes);
}

void write_color(const fs::path& path, const Tensor& image, const ImageMeta& meta) {
  if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("write_color: expected 3xHxW tensor");
  const int h = image.dim(1), w = image.dim(2);
  std::string bytes = pnm_header_text("P6", w, h, meta);
  bytes.reserve(bytes.size() + image.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) bytes.push_back(static_cast<char>(quantize(image.at(c, y, x))));
  atomic_write(path, bytes);
}

void write_text_atomic(const fs::path& path, const std::string& text) { atomic_write(path, text); }

namespace {

// D65 reference white, 2-degree observer.
constexpr double kXn = 0.95047, kYn = 1.0, kZn = 1.08883;

double srgb_decode(double u) { return u <= 0.04045 ? u / 12.92 : std::pow((u + 0.055) / 1.055, 2.4); }
double srgb_encode(double u) { return u <= 0.0031308 ? 12.92 * u : 1.055 * std::pow(u, 1.0 / 2.4) - 0.055; }

double lab_f(double t) {
  constexpr double eps = 216.0 / 24389.0, kappa = 24389.0 / 27.0;
  return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
}

double lab_finv(double t) {
  constexpr double eps = 216.0 / 24389.0, kappa = 24389.0 / 27.0;
  const double t3 = t * t * t;
  return t3 > eps ? t3 : (116.0 * t - 16.0) / kappa;
}

}  // namespace

std::array<double, 3> srgb_to_lab(double r, double g, double b) {
  const double rl = srgb_decode(r), gl = srgb_decode(g), bl = srgb_decode(b);
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::array<double, 3> lab_to_srgb(double L, double a, double b) {
  const double fy = (L + 16.0) / 116.0;
  const double fx = fy + a / 500.0;
  const double fz = fy - b / 200.0;
  const double x = kXn * lab_finv(fx), y = kYn * lab_finv(fy), z = kZn * lab_finv(fz);
  double rl = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  double gl = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  double bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
  return {clamp01(srgb_encode(rl)), clamp01(srgb_encode(gl)), clamp01(srgb_encode(bl))};
}

}  // namespace easal
