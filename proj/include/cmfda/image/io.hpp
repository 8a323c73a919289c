// Copyright 2026 The cmfda Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// PNG read/write (libpng simplified API) and JPEG read (libjpeg).

#ifndef CMFDA_IMAGE_IO_HPP_
#define CMFDA_IMAGE_IO_HPP_

#include <png.h>
#include <stdio.h>

#include <csetjmp>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include <jpeglib.h>

#include "cmfda/error.hpp"
#include "cmfda/image/raster.hpp"

namespace cmfda::image {

inline RasterImage read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw DataError("read_png: " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  RasterImage img(png.width, png.height);
  if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("read_png: " + path.string() + ": " + png.message);
  }
  return img;
}

/// Writes 8-bit RGB. The output bytes depend only on the pixel data.
inline void write_png(const std::filesystem::path& path, const RasterImage& img) {
  img.validate();
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.data.data(), 0, nullptr)) {
    throw DataError("write_png: " + path.string() + ": " + png.message);
  }
}

namespace detail {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace detail

inline RasterImage read_jpeg(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw DataError("read_jpeg: cannot open " + path.string());
  jpeg_decompress_struct cinfo;
  detail::JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = detail::jpeg_error_exit;
  RasterImage img;
  // No C++ objects with destructors may be created between setjmp and the
  // last libjpeg call; `img` is sized before decoding starts.
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DataError("read_jpeg: " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img.width = cinfo.output_width;
  img.height = cinfo.output_height;
  img.data.resize(img.width * img.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.data.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

/// Dispatches on extension: .png, .jpg/.jpeg.
inline RasterImage read_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return read_png(path);
  if (ext == ".jpg" || ext == ".jpeg") return read_jpeg(path);
  throw DataError("read_image: unsupported format " + path.string());
}

}  // namespace cmfda::image

#endif  // CMFDA_IMAGE_IO_HPP_
