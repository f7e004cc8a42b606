#include "pva/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "pva/util.hpp"

namespace pva::img {

void write_png(const std::string& path, const nn::Tensor& chw) {
  require(chw.ndim() == 3 && chw.dim(0) == 3, ErrCode::param, "write_png expects [3,H,W]");
  int64_t H = chw.dim(1), W = chw.dim(2);
  FILE* fp = std::fopen(path.c_str(), "wb");
  require(fp != nullptr, ErrCode::io, "cannot open for write: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrCode::io, "png write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, png_uint_32(W), png_uint_32(H), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(size_t(W) * 3);
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = chw.at((c * H + y) * W + x);
        v = std::min(1.0f, std::max(0.0f, v));
        row[size_t(x) * 3 + size_t(c)] = static_cast<unsigned char>(v * 255.0f + 0.5f);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

nn::Tensor read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  require(fp != nullptr, ErrCode::io, "cannot open for read: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(ErrCode::io, "png read failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_uint_32 W = png_get_image_width(png, info);
  png_uint_32 H = png_get_image_height(png, info);
  png_byte color = png_get_color_type(png, info);
  png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  nn::Tensor out({3, int64_t(H), int64_t(W)});
  std::vector<unsigned char> row(size_t(W) * 3);
  for (png_uint_32 y = 0; y < H; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        out.at((c * H + y) * W + x) = float(row[size_t(x) * 3 + size_t(c)]) / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return out;
}

double mean_luminance(const nn::Tensor& chw) {
  int64_t plane = chw.dim(1) * chw.dim(2);
  double acc = 0;
  for (int64_t i = 0; i < plane; ++i)
    acc += 0.299 * chw.at(i) + 0.587 * chw.at(plane + i) + 0.114 * chw.at(2 * plane + i);
  return acc / double(plane);
}

nn::Tensor resize(const nn::Tensor& chw, int64_t oh, int64_t ow) {
  int64_t H = chw.dim(1), W = chw.dim(2);
  nn::Tensor out({3, oh, ow});
  for (int64_t i = 0; i < oh; ++i)
    for (int64_t j = 0; j < ow; ++j) {
      double sy = (oh == 1) ? 0 : double(i) * double(H - 1) / double(oh - 1);
      double sx = (ow == 1) ? 0 : double(j) * double(W - 1) / double(ow - 1);
      int64_t y0 = int64_t(sy), x0 = int64_t(sx);
      int64_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
      double fy = sy - double(y0), fx = sx - double(x0);
      for (int c = 0; c < 3; ++c) {
        const float* p = chw.ptr() + c * H * W;
        double v = p[y0 * W + x0] * (1 - fx) * (1 - fy) + p[y0 * W + x1] * fx * (1 - fy) +
                   p[y1 * W + x0] * (1 - fx) * fy + p[y1 * W + x1] * fx * fy;
        out.at((c * oh + i) * ow + j) = float(v);
      }
    }
  return out;
}

}  // namespace pva::img
