#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pva/autograd.hpp"

namespace pva::nn {

// Named parameter registry shared by every network in the project. Gives
// uniform serialization, checksumming and optimizer wiring.
template <class T>
struct ParamSetT {
  std::vector<std::pair<std::string, Ptr<T>>> params;

  Ptr<T> add(const std::string& name, TensorT<T> init) {
    auto p = make_leaf(std::move(init), true);
    params.emplace_back(name, p);
    return p;
  }

  Ptr<T> find(const std::string& name) const {
    for (auto& [k, v] : params)
      if (k == name) return v;
    fail(ErrCode::internal, "unknown parameter: " + name);
  }

  std::vector<Ptr<T>> all() const {
    std::vector<Ptr<T>> out;
    for (auto& [k, v] : params) out.push_back(v);
    return out;
  }

  void zero_grad() {
    for (auto& [k, v] : params) v->zero_grad();
  }

  uint64_t checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (auto& [k, v] : params) {
      h = fnv1a64(k, h);
      uint64_t c = v->val.checksum();
      h = fnv1a64(&c, sizeof(c), h);
    }
    return h;
  }

  int64_t count() const {
    int64_t n = 0;
    for (auto& [k, v] : params) n += v->val.numel();
    return n;
  }
};

using ParamSet = ParamSetT<float>;

// He-normal init for conv/linear weights
template <class T>
TensorT<T> he_init(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  return TensorT<T>::randn(std::move(shape), rng, T(std::sqrt(2.0 / double(fan_in))));
}

template <class T>
struct Conv2dT {
  Ptr<T> W, b;
  int64_t stride = 1, pad = 1;

  Conv2dT() = default;
  Conv2dT(ParamSetT<T>& ps, const std::string& name, int64_t in_ch, int64_t out_ch, int64_t k,
          int64_t stride_, int64_t pad_, Rng& rng, T w_scale = T(1)) {
    TensorT<T> w = he_init<T>({out_ch, in_ch, k, k}, in_ch * k * k, rng);
    if (w_scale != T(1))
      for (auto& v : w.data) v *= w_scale;
    W = ps.add(name + ".W", std::move(w));
    b = ps.add(name + ".b", TensorT<T>::zeros({out_ch}));
    stride = stride_;
    pad = pad_;
  }

  Ptr<T> operator()(Ptr<T> x) const { return conv2d(x, W, b, stride, pad); }
};

template <class T>
struct LinearT {
  Ptr<T> W, b;

  LinearT() = default;
  LinearT(ParamSetT<T>& ps, const std::string& name, int64_t in, int64_t out, Rng& rng,
          T w_scale = T(1)) {
    TensorT<T> w = he_init<T>({out, in}, in, rng);
    if (w_scale != T(1))
      for (auto& v : w.data) v *= w_scale;
    W = ps.add(name + ".W", std::move(w));
    b = ps.add(name + ".b", TensorT<T>::zeros({out}));
  }

  Ptr<T> operator()(Ptr<T> x) const { return linear(x, W, b); }
};

template <class T>
struct RnnT {
  Ptr<T> Wx, Wh, b;

  RnnT() = default;
  RnnT(ParamSetT<T>& ps, const std::string& name, int64_t in, int64_t hidden, Rng& rng) {
    Wx = ps.add(name + ".Wx", TensorT<T>::randn({hidden, in}, rng, T(std::sqrt(1.0 / double(in)))));
    // orthogonal-ish small recurrent init keeps long products stable
    Wh = ps.add(name + ".Wh",
                TensorT<T>::randn({hidden, hidden}, rng, T(std::sqrt(0.5 / double(hidden)))));
    b = ps.add(name + ".b", TensorT<T>::zeros({hidden}));
  }

  Ptr<T> operator()(Ptr<T> x) const { return rnn_tanh(x, Wx, Wh, b); }
};

// Adam with bias correction; update order is the param registration order,
// so runs are reproducible.
template <class T>
class AdamT {
 public:
  AdamT(std::vector<Ptr<T>> params, T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& p : params_) {
      m_.push_back(TensorT<T>::zeros(p->val.shape));
      v_.push_back(TensorT<T>::zeros(p->val.shape));
    }
  }

  void set_lr(T lr) { lr_ = lr; }

  void step() {
    ++t_;
    T bc1 = T(1) - std::pow(beta1_, T(t_));
    T bc2 = T(1) - std::pow(beta2_, T(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (p->grad.data.empty()) continue;
      for (int64_t j = 0; j < p->val.numel(); ++j) {
        T g = p->grad.at(j);
        m_[i].at(j) = beta1_ * m_[i].at(j) + (T(1) - beta1_) * g;
        v_[i].at(j) = beta2_ * v_[i].at(j) + (T(1) - beta2_) * g * g;
        T mh = m_[i].at(j) / bc1;
        T vh = v_[i].at(j) / bc2;
        p->val.at(j) -= lr_ * mh / (std::sqrt(vh) + eps_);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<Ptr<T>> params_;
  std::vector<TensorT<T>> m_, v_;
  T lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

using Adam = AdamT<float>;

}  // namespace pva::nn
