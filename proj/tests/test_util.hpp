#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pva/autograd.hpp"
#include "pva/util.hpp"

namespace testutil {

// Relative-error gradient check: analytic grad of f() wrt `leaf` against
// central finite differences. Returns the worst relative error over the
// checked coordinates.
template <class T>
double gradcheck(pva::nn::Ptr<T> leaf, const std::function<pva::nn::Ptr<T>()>& f, double h,
                 int max_coords = 40) {
  using namespace pva::nn;
  leaf->ensure_grad();
  leaf->grad.fill(T(0));
  auto loss = f();
  backward(loss);
  pva::nn::TensorT<T> analytic = leaf->grad;
  leaf->grad.fill(T(0));

  int64_t n = leaf->val.numel();
  int64_t step = std::max<int64_t>(1, n / max_coords);
  double scale = 1e-8;
  for (int64_t i = 0; i < n; i += step) scale = std::max(scale, std::abs(double(analytic.at(i))));

  double worst = 0;
  for (int64_t i = 0; i < n; i += step) {
    T orig = leaf->val.at(i);
    leaf->val.at(i) = orig + T(h);
    double fp = double(f()->val.at(0));
    leaf->val.at(i) = orig - T(h);
    double fm = double(f()->val.at(0));
    leaf->val.at(i) = orig;
    double fd = (fp - fm) / (2 * h);
    double ga = double(analytic.at(i));
    // floor keeps finite-difference noise on near-zero coords from dominating
    double denom = std::max({std::abs(fd), std::abs(ga), 1e-4 * scale});
    worst = std::max(worst, std::abs(fd - ga) / denom);
  }
  return worst;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pva_test_" + tag + "_" + std::to_string(counter++) + "_" + std::to_string(getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::filesystem::path path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
