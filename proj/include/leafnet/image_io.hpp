#pragma once

#include <filesystem>
#include <string>

#include "leafnet/tensor.hpp"

namespace leafnet {

// Decodes 8-bit binary PPM (P6) and PGM (P5) natively; PNG when the build
// has libpng (LEAFNET_HAVE_PNG). Pixels normalized to [0,1], layout (C,H,W).
Tensor read_image(const std::filesystem::path& path);

bool image_format_supported(const std::filesystem::path& path);

void write_ppm(const std::filesystem::path& path, const Tensor& img);  // (3,H,W)
void write_pgm(const std::filesystem::path& path, const Tensor& img);  // (1,H,W) or (H,W)
#ifdef LEAFNET_HAVE_PNG
void write_png(const std::filesystem::path& path, const Tensor& img);  // (1|3,H,W)
#endif

}  // namespace leafnet
