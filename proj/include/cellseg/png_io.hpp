#pragma once

#include <filesystem>

#include "cellseg/image.hpp"

namespace cellseg {

// Reads an 8-bit PNG. Grayscale files become 1-channel buffers, everything else
// (palette, RGB, RGBA) is expanded to 3-channel RGB. Throws DataError naming the
// file on any failure.
ImageBuffer read_png(const std::filesystem::path& path);

// Writes a 1-channel (grayscale) or 3-channel (RGB) buffer as an 8-bit PNG.
// Values are clamped to [0,255] and rounded, so buffers holding small integers
// (masks, label codes) round-trip exactly.
void write_png(const std::filesystem::path& path, const ImageBuffer& image);

}  // namespace cellseg
