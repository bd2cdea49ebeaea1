#pragma once

#include "latentgibbs/linops.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace latentgibbs {

/// affine maps [min, max] to [0, 65535]; clip01 clips to [0, 1] first, as
/// for reconstructions. `scale` multiplies values beforehand (x100 for
/// standard-deviation images).
enum class PgmMapping { affine, clip01 };

struct PgmImage {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint16_t> pixels;
};

PgmImage quantize_pgm(const Vector &image, Index height, Index width,
                      PgmMapping mapping, double scale = 1.0);
/// Binary P5 with maxval 65535, big-endian samples.
void emit_pgm(const Vector &image, Index height, Index width,
              const std::filesystem::path &path, PgmMapping mapping, double scale = 1.0);
void write_pgm(const PgmImage &img, const std::filesystem::path &path);
PgmImage read_pgm(const std::filesystem::path &path);

} // namespace latentgibbs
