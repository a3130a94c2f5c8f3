#pragma once

#include <cstdint>
#include <string>

#include "facepaste/raster.hpp"

namespace facepaste {

// 8-bit grayscale or RGB PNG. Decode maps byte b -> b/255; encode rounds
// half-up. Other bit depths and color types are converted to these on read.
RasterImage read_png(const std::string& path);
void write_png(const std::string& path, const RasterImage& img);
RasterImage decode_png(const std::string& bytes);
std::string encode_png(const RasterImage& img);

std::uint8_t intensity_to_byte(double v);  // round half-up, clamped to [0,255]

// Snap every intensity to the 8-bit grid (the value a PNG round trip yields).
RasterImage quantize8(const RasterImage& img);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);  // throws InvalidParameterError

}  // namespace facepaste
