#pragma once

#include <filesystem>

#include "sodbench/image.hpp"

namespace sodbench {

// Supported containers: PNG (8-bit gray / gray+alpha / RGB / RGBA, alpha
// dropped) and binary PPM (P6) / PGM (P5) with maxval 255. Readers sniff the
// magic bytes; writers pick the container from the extension (.png, .ppm,
// .pgm). Gray sources replicate into all three channels.
Image load_image(const std::filesystem::path& path);

// 8-bit file on disk; values rounded half away from zero and clamped to
// [0, 255]. .png and .ppm write RGB, .pgm writes the rounded gray plane.
void save_image(const Image& img, const std::filesystem::path& path);

// Masks load from the 8-bit gray plane with threshold: byte >= 128 => 1.
// Color files are reduced to gray (rounded mean) first.
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);  // 0 / 255 gray

// Saliency maps store as 8-bit gray, byte = round(value * 255).
void save_saliency(const SaliencyMap& map, const std::filesystem::path& path);
SaliencyMap load_saliency(const std::filesystem::path& path);

// Reads only enough of the header to report (height, width); used for cheap
// dimension validation while scanning datasets.
std::pair<int, int> probe_dims(const std::filesystem::path& path);

}  // namespace sodbench
