#pragma once

// Minimal image I/O: PNG and JPEG decoding via libpng/libjpeg, plus a
// 24-bit BMP codec. Decoders dispatch on magic bytes, not extensions.
// Images are [H,W,3] tensors with values in [0,255].

#include <jpeglib.h>
#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "statecnn/tensor.hpp"

namespace statecnn {

namespace detail {

inline Tensor<float> rgb_to_tensor(const std::vector<unsigned char>& rgb, int64_t h,
                                   int64_t w) {
  Tensor<float> img({h, w, 3});
  for (size_t i = 0; i < rgb.size(); ++i)
    img.data[i] = static_cast<float>(rgb[i]);
  return img;
}

inline std::vector<unsigned char> tensor_to_rgb(const Tensor<float>& img) {
  if (img.shape.rank() != 3 || img.shape[2] != 3)
    fail(ErrorKind::shape, "image tensor must be [H,W,3], got " + img.shape.str());
  std::vector<unsigned char> rgb(img.data.size());
  for (size_t i = 0; i < rgb.size(); ++i) {
    float v = img.data[i];
    v = v < 0.0f ? 0.0f : (v > 255.0f ? 255.0f : v);
    rgb[i] = static_cast<unsigned char>(v + 0.5f);
  }
  return rgb;
}

inline Tensor<float> decode_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    fail(ErrorKind::io, "cannot read PNG '" + path + "': " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorKind::io, "cannot decode PNG '" + path + "'");
  }
  return rgb_to_tensor(buffer, image.height, image.width);
}

struct JpegErrorTrap {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

inline void jpeg_trap_exit(j_common_ptr cinfo) {
  auto* trap = reinterpret_cast<JpegErrorTrap*>(cinfo->err);
  std::longjmp(trap->jump, 1);
}

inline Tensor<float> decode_jpeg(const std::string& path) {
  std::FILE* file = std::fopen(path.c_str(), "rb");
  if (!file) fail(ErrorKind::io, "cannot open '" + path + "'");

  jpeg_decompress_struct cinfo;
  JpegErrorTrap trap;
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = jpeg_trap_exit;

  std::vector<unsigned char> pixels;
  int64_t height = 0, width = 0;
  if (setjmp(trap.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(file);
    fail(ErrorKind::io, "cannot decode JPEG '" + path + "'");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  height = cinfo.output_height;
  width = cinfo.output_width;
  pixels.resize(static_cast<size_t>(height) * width * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = pixels.data() + static_cast<size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(file);
  return rgb_to_tensor(pixels, height, width);
}

inline uint32_t read_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline void put_u16le(std::vector<unsigned char>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back(v >> 8);
}

inline void put_u32le(std::vector<unsigned char>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

// Uncompressed 24-bit bottom-up BMP.
inline Tensor<float> decode_bmp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 54 || bytes[0] != 'B' || bytes[1] != 'M')
    fail(ErrorKind::io, "cannot decode BMP '" + path + "'");
  uint32_t data_offset = read_u32le(&bytes[10]);
  int32_t width = static_cast<int32_t>(read_u32le(&bytes[18]));
  int32_t height = static_cast<int32_t>(read_u32le(&bytes[22]));
  uint16_t bpp = bytes[28] | (bytes[29] << 8);
  uint32_t compression = read_u32le(&bytes[30]);
  if (bpp != 24 || compression != 0 || width <= 0 || height == 0)
    fail(ErrorKind::io, "unsupported BMP variant in '" + path + "'");
  bool top_down = height < 0;
  int64_t h = top_down ? -height : height;
  int64_t w = width;
  size_t row_bytes = (static_cast<size_t>(w) * 3 + 3) & ~size_t(3);
  if (bytes.size() < data_offset + row_bytes * h)
    fail(ErrorKind::io, "truncated BMP '" + path + "'");

  Tensor<float> img({h, w, 3});
  for (int64_t y = 0; y < h; ++y) {
    int64_t src_row = top_down ? y : (h - 1 - y);
    const unsigned char* row = &bytes[data_offset + row_bytes * src_row];
    for (int64_t x = 0; x < w; ++x) {
      img.at(y, x, 0) = row[x * 3 + 2];  // BGR on disk
      img.at(y, x, 1) = row[x * 3 + 1];
      img.at(y, x, 2) = row[x * 3 + 0];
    }
  }
  return img;
}

}  // namespace detail

inline bool looks_like_image_file(const std::string& filename) {
  auto dot = filename.rfind('.');
  if (dot == std::string::npos) return false;
  std::string ext = filename.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  return ext == "png" || ext == "jpg" || ext == "jpeg" || ext == "bmp";
}

inline Tensor<float> decode_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  unsigned char magic[4] = {0, 0, 0, 0};
  probe.read(reinterpret_cast<char*>(magic), 4);
  if (!probe) fail(ErrorKind::io, "cannot read '" + path + "'");
  probe.close();

  if (magic[0] == 0x89 && magic[1] == 'P') return detail::decode_png(path);
  if (magic[0] == 0xff && magic[1] == 0xd8) return detail::decode_jpeg(path);
  if (magic[0] == 'B' && magic[1] == 'M') return detail::decode_bmp(path);
  fail(ErrorKind::io, "'" + path + "' is not a PNG, JPEG, or BMP image");
}

inline void write_png(const std::string& path, const Tensor<float>& img) {
  auto rgb = detail::tensor_to_rgb(img);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.shape[1]);
  image.height = static_cast<png_uint_32>(img.shape[0]);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr))
    fail(ErrorKind::io, "cannot write PNG '" + path + "': " + image.message);
}

inline void write_bmp(const std::string& path, const Tensor<float>& img) {
  auto rgb = detail::tensor_to_rgb(img);
  const int64_t h = img.shape[0], w = img.shape[1];
  const size_t row_bytes = (static_cast<size_t>(w) * 3 + 3) & ~size_t(3);
  const uint32_t data_size = static_cast<uint32_t>(row_bytes * h);

  std::vector<unsigned char> out;
  out.reserve(54 + data_size);
  out.push_back('B');
  out.push_back('M');
  detail::put_u32le(out, 54 + data_size);
  detail::put_u32le(out, 0);
  detail::put_u32le(out, 54);
  detail::put_u32le(out, 40);  // BITMAPINFOHEADER
  detail::put_u32le(out, static_cast<uint32_t>(w));
  detail::put_u32le(out, static_cast<uint32_t>(h));
  detail::put_u16le(out, 1);
  detail::put_u16le(out, 24);
  detail::put_u32le(out, 0);
  detail::put_u32le(out, data_size);
  detail::put_u32le(out, 2835);
  detail::put_u32le(out, 2835);
  detail::put_u32le(out, 0);
  detail::put_u32le(out, 0);

  std::vector<unsigned char> row(row_bytes, 0);
  for (int64_t y = h - 1; y >= 0; --y) {
    for (int64_t x = 0; x < w; ++x) {
      size_t src = (static_cast<size_t>(y) * w + x) * 3;
      row[x * 3 + 0] = rgb[src + 2];
      row[x * 3 + 1] = rgb[src + 1];
      row[x * 3 + 2] = rgb[src + 0];
    }
    out.insert(out.end(), row.begin(), row.end());
  }

  std::ofstream file(path, std::ios::binary);
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) fail(ErrorKind::io, "cannot write BMP '" + path + "'");
}

}  // namespace statecnn
