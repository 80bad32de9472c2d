#pragma once

#include <filesystem>

#include "e2f/tensor.hpp"

namespace e2f {

// Raw little-endian f32 in F,C,H,W order; the shape goes to "<path>.shape" as "F C H W".
void write_raw_f32(const std::filesystem::path& path, const Tensor4& tensor);
Tensor4 read_raw_f32(const std::filesystem::path& path);
std::filesystem::path shape_sidecar(const std::filesystem::path& path);

// 8-bit PGM (C == 1) or PPM (C == 3) of frame f, values clamped to [0, 1].
void write_netpbm(const std::filesystem::path& path, const Tensor4& frames, std::size_t f);
// Loads a PGM/PPM (P5/P6, maxval 255) as a 1 x C x H x W tensor in [0, 1].
Tensor4 read_netpbm(const std::filesystem::path& path);

}  // namespace e2f
