#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#ifdef BOXSEG_HAVE_PNG
#include <png.h>
#endif

#include "boxseg/error.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/mask.hpp"

namespace boxseg {

/// 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
struct Image {
  ImageDims dims;
  int channels = 1;
  std::vector<std::uint8_t> data;
};

namespace detail {

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct PnmHeader {
  char kind = 0;  // '2','3','5','6'
  ImageDims dims;
  int maxval = 0;
  std::size_t data_offset = 0;
};

inline PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& b, const std::string& src) {
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '2' && b[1] != '3' && b[1] != '5' && b[1] != '6')) {
    throw DataError(src + ": not a supported PNM file");
  }
  PnmHeader h;
  h.kind = static_cast<char>(b[1]);
  std::size_t pos = 2;
  auto next_int = [&]() {
    while (pos < b.size()) {
      if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else if (std::isspace(b[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    long long v = 0;
    const std::size_t start = pos;
    while (pos < b.size() && std::isdigit(b[pos]) && v < 1'000'000'000) v = v * 10 + (b[pos++] - '0');
    if (pos == start) throw DataError(src + ": truncated PNM header");
    return static_cast<int>(v);
  };
  h.dims.width = next_int();
  h.dims.height = next_int();
  h.maxval = next_int();
  if (!h.dims.valid() || h.maxval < 1 || h.maxval > 255) {
    throw DataError(src + ": unsupported PNM header");
  }
  if (pos >= b.size() || !std::isspace(b[pos])) throw DataError(src + ": truncated PNM header");
  h.data_offset = pos + 1;
  if (h.kind == '5' || h.kind == '6') {
    const std::size_t need =
        static_cast<std::size_t>(h.dims.pixels()) * (h.kind == '6' ? 3 : 1);
    if (b.size() - h.data_offset < need) throw DataError(src + ": truncated PNM pixel data");
  }
  return h;
}

inline std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

inline bool is_png(const std::vector<std::uint8_t>& b) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  return b.size() >= 8 && std::equal(sig, sig + 8, b.begin());
}

inline ImageDims probe_png(const std::vector<std::uint8_t>& b, const std::string& src) {
  if (b.size() < 33 || std::string(b.begin() + 12, b.begin() + 16) != "IHDR") {
    throw DataError(src + ": truncated PNG header");
  }
  ImageDims d{static_cast<int>(be32(&b[16])), static_cast<int>(be32(&b[20]))};
  if (!d.valid()) throw DataError(src + ": invalid PNG dimensions");
  return d;
}

inline ImageDims probe_jpeg(const std::vector<std::uint8_t>& b, const std::string& src) {
  std::size_t pos = 2;
  while (pos + 4 <= b.size()) {
    if (b[pos] != 0xFF) throw DataError(src + ": corrupt JPEG marker stream");
    const std::uint8_t marker = b[pos + 1];
    if (marker == 0xFF) {
      ++pos;
      continue;
    }
    const std::size_t len = (std::size_t(b[pos + 2]) << 8) | b[pos + 3];
    const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 &&
                     marker != 0xCC;
    if (sof) {
      if (pos + 9 > b.size()) break;
      ImageDims d{(int(b[pos + 7]) << 8) | b[pos + 8], (int(b[pos + 5]) << 8) | b[pos + 6]};
      if (!d.valid()) throw DataError(src + ": invalid JPEG dimensions");
      return d;
    }
    if (len < 2) throw DataError(src + ": corrupt JPEG segment");
    pos += 2 + len;
  }
  throw DataError(src + ": JPEG frame header not found");
}

}  // namespace detail

/// Read only enough of an image file to learn its size. Supports PNM, PNG
/// and JPEG; anything else (or a damaged header) throws DataError.
inline ImageDims probe_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  const std::string src = path.string();
  if (bytes.size() >= 2 && bytes[0] == 'P') return detail::parse_pnm_header(bytes, src).dims;
  if (detail::is_png(bytes)) return detail::probe_png(bytes, src);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8) {
    return detail::probe_jpeg(bytes, src);
  }
  throw DataError(src + ": unrecognized image format");
}

inline Image read_pnm(const std::filesystem::path& path) {
  const auto b = detail::read_bytes(path);
  const std::string src = path.string();
  const auto h = detail::parse_pnm_header(b, src);
  Image img;
  img.dims = h.dims;
  img.channels = (h.kind == '3' || h.kind == '6') ? 3 : 1;
  const std::size_t n = static_cast<std::size_t>(h.dims.pixels()) * img.channels;
  img.data.resize(n);
  auto scale = [&](int v) { return static_cast<std::uint8_t>(v * 255 / h.maxval); };
  if (h.kind == '5' || h.kind == '6') {
    for (std::size_t i = 0; i < n; ++i) img.data[i] = scale(b[h.data_offset + i]);
  } else {
    std::size_t pos = h.data_offset;
    for (std::size_t i = 0; i < n; ++i) {
      while (pos < b.size() && std::isspace(b[pos])) ++pos;
      int v = 0;
      const std::size_t start = pos;
      while (pos < b.size() && std::isdigit(b[pos]) && v <= 255) v = v * 10 + (b[pos++] - '0');
      if (pos == start || v > h.maxval) throw DataError(src + ": bad PNM sample");
      img.data[i] = scale(v);
    }
  }
  return img;
}

#ifdef BOXSEG_HAVE_PNG
inline Image read_png_gray(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&png, path.c_str()) == 0) {
    throw DataError(path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_GRAY;
  Image img;
  img.dims = {static_cast<int>(png.width), static_cast<int>(png.height)};
  img.channels = 1;
  img.data.resize(PNG_IMAGE_SIZE(png));
  if (png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr) == 0) {
    std::string msg = png.message;
    png_image_free(&png);
    throw DataError(path.string() + ": " + msg);
  }
  return img;
}
#endif

inline void write_pnm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << (img.channels == 3 ? "P6\n" : "P5\n") << img.dims.width << ' ' << img.dims.height
      << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

/// Foreground iff the gray level is >= 128. RGB input uses the channel mean.
inline BinaryMask binarize(const Image& img) {
  Bitmap bm(img.dims);
  for (std::size_t i = 0; i < bm.pixels.size(); ++i) {
    int v = img.data[i * img.channels];
    if (img.channels == 3) v = (v + img.data[i * 3 + 1] + img.data[i * 3 + 2]) / 3;
    bm.pixels[i] = v >= 128 ? 1 : 0;
  }
  return rle_encode(bm);
}

/// Load a reference mask from a mask fixture (.mask/.rle), PNM, or PNG file.
inline BinaryMask read_gt_mask(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".mask" || ext == ".rle") return read_mask_file(path.string());
  if (ext == ".png") {
#ifdef BOXSEG_HAVE_PNG
    return binarize(read_png_gray(path));
#else
    throw DataError(path.string() + ": PNG support not compiled in");
#endif
  }
  return binarize(read_pnm(path));
}

}  // namespace boxseg
