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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "starlk/image.hpp"

#ifdef STARLK_TEST_PNG
#include <png.h>
#endif
#ifdef STARLK_TEST_JPEG
#include <jpeglib.h>
#endif

using namespace starlk;
namespace fs = std::filesystem;

namespace {

constexpr int kW = 6, kH = 4;

std::vector<std::uint8_t> Gradient() {
  std::vector<std::uint8_t> px(kW * kH);
  for (int i = 0; i < kW * kH; ++i) px[i] = static_cast<std::uint8_t>(i * 10);
  return px;
}

}  // namespace

TEST_CASE("binary and ascii netpbm") {
  const auto dir = fs::temp_directory_path();
  {
    std::ofstream out(dir / "starlk_ascii.pgm");
    out << "P2\n# comment\n3 1\n255\n0 128 255\n";
  }
  const auto img = ReadImage(dir / "starlk_ascii.pgm");
  CHECK(img.channels == 1);
  CHECK(img.pixels == std::vector<std::uint8_t>{0, 128, 255});
  Plane p(2, 2);
  p.values = {0.0, 0.25, 0.5, 1.5};
  WritePgm(dir / "starlk_rt.pgm", p);
  const auto back = ReadImage(dir / "starlk_rt.pgm");
  CHECK(back.pixels == std::vector<std::uint8_t>{0, 64, 128, 255});
  CHECK_THROWS_WITH_AS(ReadImage(dir / "starlk_nothing.pgm"), doctest::Contains("starlk_nothing.pgm"),
                       std::exception);
  fs::remove(dir / "starlk_ascii.pgm");
  fs::remove(dir / "starlk_rt.pgm");
}

TEST_CASE("bilinear resize identity and constants") {
  Plane p(3, 5);
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = static_cast<double>(i);
  CHECK(ResizeBilinear(p, 3, 5).values == p.values);
  const Plane flat(4, 4, 0.7);
  for (double v : ResizeBilinear(flat, 9, 3).values) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
}

#ifdef STARLK_TEST_PNG
TEST_CASE("png decode") {
  const auto file = fs::temp_directory_path() / "starlk_test.png";
  const auto px = Gradient();
  FILE* fp = std::fopen(file.c_str(), "wb");
  REQUIRE(fp);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_set_IHDR(png, info, kW, kH, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < kH; ++r) png_write_row(png, px.data() + r * kW);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
  const auto img = ReadImage(file);
  CHECK(img.width == kW);
  CHECK(img.height == kH);
  CHECK(img.pixels == px);
  fs::remove(file);
}
#endif

#ifdef STARLK_TEST_JPEG
TEST_CASE("jpeg decode") {
  const auto file = fs::temp_directory_path() / "starlk_test.jpg";
  const std::vector<std::uint8_t> px(kW * kH, 100);
  FILE* fp = std::fopen(file.c_str(), "wb");
  REQUIRE(fp);
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, fp);
  cinfo.image_width = kW;
  cinfo.image_height = kH;
  cinfo.input_components = 1;
  cinfo.in_color_space = JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, 100, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  for (int r = 0; r < kH; ++r) {
    JSAMPROW row = const_cast<JSAMPROW>(px.data() + r * kW);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(fp);
  const auto img = ReadImage(file);
  CHECK(img.width == kW);
  CHECK(img.channels == 1);
  for (auto v : img.pixels) CHECK(std::abs(int(v) - 100) <= 1);
  fs::remove(file);
}
#endif
