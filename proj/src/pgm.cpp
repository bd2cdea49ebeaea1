#include "latentgibbs/pgm.hpp"

#include "latentgibbs/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace latentgibbs {

PgmImage quantize_pgm(const Vector &image, Index height, Index width, PgmMapping mapping,
                      double scale) {
  require(height > 0 && width > 0 && image.size() == height * width,
          "pgm: image size does not match its shape");
  require(image.allFinite(), "pgm: non-finite pixel");
  const Vector v = image * scale;
  double lo = 0.0, hi = 1.0;
  if (mapping == PgmMapping::affine) {
    lo = v.minCoeff();
    hi = v.maxCoeff();
  }
  PgmImage out{height, width, std::vector<std::uint16_t>(static_cast<std::size_t>(v.size()))};
  for (Index i = 0; i < v.size(); ++i) {
    double t = hi > lo ? (std::clamp(v[i], lo, hi) - lo) / (hi - lo) : 0.0;
    out.pixels[static_cast<std::size_t>(i)] =
        static_cast<std::uint16_t>(std::lround(t * 65535.0));
  }
  return out;
}

void write_pgm(const PgmImage &img, const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    fail(ErrorCode::io_failure, "pgm: cannot open " + path.string());
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (std::uint16_t p : img.pixels) {
    const char bytes[2] = {static_cast<char>(p >> 8), static_cast<char>(p & 0xff)};
    os.write(bytes, 2);
  }
  if (!os)
    fail(ErrorCode::io_failure, "pgm: write failed for " + path.string());
}

void emit_pgm(const Vector &image, Index height, Index width,
              const std::filesystem::path &path, PgmMapping mapping, double scale) {
  write_pgm(quantize_pgm(image, height, width, mapping, scale), path);
}

PgmImage read_pgm(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    fail(ErrorCode::io_failure, "pgm: cannot open " + path.string());
  std::string magic;
  PgmImage img;
  long maxval = 0;
  is >> magic >> img.width >> img.height >> maxval;
  if (!is || magic != "P5" || maxval != 65535 || img.width <= 0 || img.height <= 0)
    fail(ErrorCode::io_failure, "pgm: unsupported header in " + path.string());
  is.get();
  img.pixels.resize(static_cast<std::size_t>(img.width * img.height));
  for (auto &p : img.pixels) {
    unsigned char bytes[2];
    is.read(reinterpret_cast<char *>(bytes), 2);
    p = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
  }
  if (!is)
    fail(ErrorCode::io_failure, "pgm: truncated data in " + path.string());
  return img;
}

} // namespace latentgibbs
