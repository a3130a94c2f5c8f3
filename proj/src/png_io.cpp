#include "facepaste/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "facepaste/errors.hpp"

namespace facepaste {

namespace {

RasterImage from_bytes(const std::vector<std::uint8_t>& bytes, int h, int w, int channels) {
  RasterImage img;
  img.height = h;
  img.width = w;
  img.channels = channels;
  img.data.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.data[i] = static_cast<float>(bytes[i] / 255.0);
  }
  return img;
}

std::vector<std::uint8_t> to_bytes(const RasterImage& img) {
  std::vector<std::uint8_t> bytes(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    bytes[i] = intensity_to_byte(img.data[i]);
  }
  return bytes;
}

RasterImage finish_read(png_image& image) {
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h) * w * channels);
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ConfigError("failed to decode PNG: " + msg);
  }
  return from_bytes(bytes, h, w, channels);
}

}  // namespace

std::uint8_t intensity_to_byte(double v) {
  double scaled = std::floor(v * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

RasterImage quantize8(const RasterImage& img) {
  RasterImage out = img;
  for (float& v : out.data) {
    v = static_cast<float>(intensity_to_byte(v) / 255.0);
  }
  return out;
}

RasterImage read_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ConfigError("cannot open PNG '" + path + "': " + msg);
  }
  return finish_read(image);
}

RasterImage decode_png(const std::string& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw InvalidParameterError("cannot decode PNG from memory: " + msg);
  }
  return finish_read(image);
}

namespace {

png_image make_write_image(const RasterImage& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw InvalidParameterError("write_png: expected 1 or 3 channels");
  }
  if (img.height < 1 || img.width < 1) {
    throw InvalidParameterError("write_png: empty image");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  return image;
}

}  // namespace

void write_png(const std::string& path, const RasterImage& img) {
  png_image image = make_write_image(img);
  std::vector<std::uint8_t> bytes = to_bytes(img);
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ConfigError("cannot write PNG '" + path + "': " + msg);
  }
}

std::string encode_png(const RasterImage& img) {
  png_image image = make_write_image(img);
  std::vector<std::uint8_t> bytes = to_bytes(img);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, bytes.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ConfigError("cannot size PNG buffer: " + msg);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, bytes.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ConfigError("cannot encode PNG to memory: " + msg);
  }
  out.resize(size);
  return out;
}

namespace {
constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                 static_cast<unsigned char>(bytes[i + 2]);
    out += kB64Chars[(v >> 18) & 63];
    out += kB64Chars[(v >> 12) & 63];
    out += kB64Chars[(v >> 6) & 63];
    out += kB64Chars[v & 63];
    i += 3;
  }
  std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out += kB64Chars[(v >> 18) & 63];
    out += kB64Chars[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += kB64Chars[(v >> 18) & 63];
    out += kB64Chars[(v >> 12) & 63];
    out += kB64Chars[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  std::string out;
  out.reserve(text.size() / 4 * 3);
  int buffer = 0;
  int bits = 0;
  std::size_t chars = 0;
  std::size_t padding = 0;
  for (char c : text) {
    if (c == '\n' || c == '\r') continue;
    if (c == '=') {
      ++padding;
      continue;
    }
    if (padding > 0) {
      throw InvalidParameterError("base64: data after padding");
    }
    int v = b64_value(c);
    if (v < 0) {
      throw InvalidParameterError("base64: invalid character");
    }
    ++chars;
    buffer = (buffer << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((buffer >> bits) & 0xFF);
    }
  }
  // every group of 4 must be complete, with padding only filling the last one
  if ((chars + padding) % 4 != 0 || padding > 2 || (padding == 1 && chars % 4 != 3) ||
      (padding == 2 && chars % 4 != 2)) {
    throw InvalidParameterError("base64: truncated input");
  }
  return out;
}

}  // namespace facepaste
