// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xdmg/io.hpp"

#include <png.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "xdmg/error.hpp"

namespace xdmg::io {

namespace fs = std::filesystem;

void atomic_write(const fs::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw DataError("write failed for '" + path.string() + "'");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot rename into '" + path.string() + "'");
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;
};

Decoded decode_png(const fs::path& path, bool want_gray) {
  const std::string data = read_text(path);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, data.data(), data.size()))
    throw DataError("cannot decode PNG '" + path.string() + "': " + img.message);
  img.format = want_gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Decoded d;
  d.height = static_cast<int>(img.height);
  d.width = static_cast<int>(img.width);
  d.channels = want_gray ? 1 : 3;
  d.bytes.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, d.bytes.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw DataError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  return d;
}

std::string encode_png(int height, int width, bool gray, const std::uint8_t* bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, bytes, 0, nullptr))
    throw RuntimeFailure(std::string("PNG encode failed: ") + img.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, bytes, 0, nullptr))
    throw RuntimeFailure(std::string("PNG encode failed: ") + img.message);
  out.resize(size);
  return out;
}

}  // namespace

Image read_rgb_png(const fs::path& path) {
  Decoded d = decode_png(path, false);
  std::vector<float> px(d.bytes.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(d.bytes[i]) / 255.0f;
  return Image(d.height, d.width, std::move(px));
}

std::string encode_rgb_png(const Image& image) {
  std::vector<std::uint8_t> bytes(image.pixels().size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<std::uint8_t>(std::lround(image.pixels()[i] * 255.0f));
  return encode_png(image.height(), image.width(), false, bytes.data());
}

DamageMask read_mask_png(const fs::path& path) {
  Decoded d = decode_png(path, true);
  for (std::uint8_t v : d.bytes)
    if (!is_valid_label(v))
      throw DataError("mask PNG '" + path.string() + "' holds label " + std::to_string(v) +
                      " outside {0..4, 255}");
  return DamageMask(d.height, d.width, std::move(d.bytes));
}

std::string encode_mask_png(const DamageMask& mask) {
  return encode_png(mask.height(), mask.width(), true, mask.labels().data());
}

}  // namespace xdmg::io
