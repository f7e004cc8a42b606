#pragma once

#include <string>

#include "pva/tensor.hpp"

namespace pva::img {

// 8-bit RGB PNG round trip for [3,H,W] float tensors in [0,1]
void write_png(const std::string& path, const nn::Tensor& chw);
nn::Tensor read_png(const std::string& path);

double mean_luminance(const nn::Tensor& chw);

// bilinear resize to [3,oh,ow]
nn::Tensor resize(const nn::Tensor& chw, int64_t oh, int64_t ow);

}  // namespace pva::img
