// Copyright 2026 The StarLK Authors
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

#include "starlk/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>

#ifdef STARLK_HAVE_PNG
#include <png.h>
#endif
#ifdef STARLK_HAVE_JPEG
#include <csetjmp>
#include <jpeglib.h>
#endif

namespace starlk {
namespace {

std::vector<std::uint8_t> Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open image");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

[[noreturn]] void Corrupt(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error(path.string() + ": corrupt image (" + why + ")");
}

class PnmParser {
 public:
  PnmParser(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  Image8 Parse() {
    if (bytes_.size() < 2 || bytes_[0] != 'P') Corrupt(path_, "missing PNM magic");
    const char kind = static_cast<char>(bytes_[1]);
    pos_ = 2;
    Image8 img;
    bool ascii;
    switch (kind) {
      case '2': img.channels = 1; ascii = true; break;
      case '3': img.channels = 3; ascii = true; break;
      case '5': img.channels = 1; ascii = false; break;
      case '6': img.channels = 3; ascii = false; break;
      default: Corrupt(path_, std::string("unsupported PNM type P") + kind);
    }
    img.width = static_cast<int>(Number());
    img.height = static_cast<int>(Number());
    const long maxval = Number();
    if (img.width <= 0 || img.height <= 0) Corrupt(path_, "non-positive dimensions");
    if (maxval <= 0 || maxval > 65535) Corrupt(path_, "bad maxval");
    const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.pixels.resize(count);
    auto scale = [maxval](long v) {
      return static_cast<std::uint8_t>(std::lround(255.0 * static_cast<double>(v) / maxval));
    };
    if (ascii) {
      for (auto& p : img.pixels) p = scale(Number());
    } else {
      ++pos_;  // single whitespace after maxval
      const std::size_t bps = maxval > 255 ? 2 : 1;
      if (pos_ + count * bps > bytes_.size()) Corrupt(path_, "truncated pixel data");
      for (std::size_t i = 0; i < count; ++i) {
        long v = bytes_[pos_ + i * bps];
        if (bps == 2) v = (v << 8) | bytes_[pos_ + i * bps + 1];
        img.pixels[i] = maxval == 255 ? static_cast<std::uint8_t>(v) : scale(v);
      }
    }
    return img;
  }

 private:
  long Number() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) Corrupt(path_, "malformed header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1'000'000'000) Corrupt(path_, "number overflow");
    }
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

#ifdef STARLK_HAVE_PNG
Image8 DecodePng(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  const std::string name = path.string();
  if (!png_image_begin_read_from_file(&image, name.c_str())) Corrupt(path, image.message);
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = gray ? 1 : 3;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string why = image.message;
    png_image_free(&image);
    Corrupt(path, why);
  }
  return out;
}
#endif

#ifdef STARLK_HAVE_JPEG
struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void OnJpegError(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Image8 DecodeJpeg(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  jpeg_decompress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = OnJpegError;
  Image8 out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    Corrupt(path, err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.channels = cinfo.output_components;
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * out.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}
#endif

}  // namespace

Image8 ReadImage(const std::filesystem::path& path) {
  const auto bytes = Slurp(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] >= '1' && bytes[1] <= '7') {
    return PnmParser(bytes, path).Parse();
  }
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
#ifdef STARLK_HAVE_PNG
    return DecodePng(path);
#else
    throw std::runtime_error(path.string() + ": PNG support not compiled in");
#endif
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
#ifdef STARLK_HAVE_JPEG
    return DecodeJpeg(path, bytes);
#else
    throw std::runtime_error(path.string() + ": JPEG support not compiled in");
#endif
  }
  Corrupt(path, "unrecognized format");
}

Plane ToGrayPlane(const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw std::invalid_argument("image must have 1 or 3 channels");
  }
  Plane out(image.height, image.width);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (image.channels == 1) {
      out.values[i] = image.pixels[i] / 255.0;
    } else {
      const auto* p = &image.pixels[3 * i];
      out.values[i] = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
    }
  }
  return out;
}

void WritePgm(const std::filesystem::path& path, const Plane& plane) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << plane.cols << " " << plane.rows << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(plane.cols));
  for (std::int64_t r = 0; r < plane.rows; ++r) {
    for (std::int64_t c = 0; c < plane.cols; ++c) {
      const double v = std::clamp(plane.at(r, c), 0.0, 1.0);
      row[c] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Plane ResizeBilinear(const Plane& src, std::int64_t rows, std::int64_t cols) {
  if (src.empty()) throw std::invalid_argument("cannot resize an empty plane");
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("resize target must be positive");
  if (rows == src.rows && cols == src.cols) return src;
  struct Tap {
    std::int64_t i0, i1;
    double w1;
  };
  auto taps = [](std::int64_t out, std::int64_t in) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::int64_t o = 0; o < out; ++o) {
      double s = (static_cast<double>(o) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::int64_t>(std::floor(s));
      const auto i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, s - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(rows, src.rows);
  const auto tx = taps(cols, src.cols);
  Plane out(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto& y = ty[r];
    for (std::int64_t c = 0; c < cols; ++c) {
      const auto& x = tx[c];
      const double a = src.at(y.i0, x.i0), b = src.at(y.i0, x.i1);
      const double d = src.at(y.i1, x.i0), e = src.at(y.i1, x.i1);
      const double top = a + (b - a) * x.w1;
      const double bot = d + (e - d) * x.w1;
      out.at(r, c) = top + (bot - top) * y.w1;
    }
  }
  return out;
}

}  // namespace starlk
