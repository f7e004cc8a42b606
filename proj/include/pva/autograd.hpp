#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "pva/tensor.hpp"

namespace pva::nn {

// Tape-based reverse-mode autodiff over TensorT<T>. A graph is built per
// forward pass; backward(root) walks it once. Parameters are long-lived leaf
// nodes whose grads the optimizers consume.
template <class T>
struct NodeT {
  TensorT<T> val;
  TensorT<T> grad;  // allocated on first accumulation
  bool needs_grad = false;
  std::vector<std::shared_ptr<NodeT<T>>> parents;
  std::function<void(NodeT<T>&)> back;

  void ensure_grad() {
    if (grad.data.empty()) grad = TensorT<T>::zeros(val.shape);
  }
  void zero_grad() {
    if (!grad.data.empty()) grad.fill(T(0));
  }
};

template <class T>
using Ptr = std::shared_ptr<NodeT<T>>;

template <class T>
Ptr<T> make_leaf(TensorT<T> v, bool needs_grad = false) {
  auto n = std::make_shared<NodeT<T>>();
  n->val = std::move(v);
  n->needs_grad = needs_grad;
  return n;
}

template <class T>
Ptr<T> constant(TensorT<T> v) {
  return make_leaf(std::move(v), false);
}

template <class T>
Ptr<T> make_op(TensorT<T> v, std::vector<Ptr<T>> parents, std::function<void(NodeT<T>&)> back) {
  auto n = std::make_shared<NodeT<T>>();
  n->val = std::move(v);
  n->parents = std::move(parents);
  for (auto& p : n->parents)
    if (p->needs_grad) n->needs_grad = true;
  if (n->needs_grad) n->back = std::move(back);
  return n;
}

template <class T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using EMap = Eigen::Map<EMat<T>>;
template <class T>
using ECMap = Eigen::Map<const EMat<T>>;

// ---- elementwise ----

template <class T>
Ptr<T> add(Ptr<T> a, Ptr<T> b) {
  assert(a->val.same_shape(b->val));
  TensorT<T> out = a->val;
  for (int64_t i = 0; i < out.numel(); ++i) out.at(i) += b->val.at(i);
  return make_op<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
    for (int k = 0; k < 2; ++k) {
      auto& p = n.parents[k];
      if (!p->needs_grad) continue;
      p->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) p->grad.at(i) += n.grad.at(i);
    }
  });
}

template <class T>
Ptr<T> sub(Ptr<T> a, Ptr<T> b) {
  assert(a->val.same_shape(b->val));
  TensorT<T> out = a->val;
  for (int64_t i = 0; i < out.numel(); ++i) out.at(i) -= b->val.at(i);
  return make_op<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (a->needs_grad) {
      a->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) a->grad.at(i) += n.grad.at(i);
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) b->grad.at(i) -= n.grad.at(i);
    }
  });
}

template <class T>
Ptr<T> mul(Ptr<T> a, Ptr<T> b) {
  assert(a->val.same_shape(b->val));
  TensorT<T> out = a->val;
  for (int64_t i = 0; i < out.numel(); ++i) out.at(i) *= b->val.at(i);
  return make_op<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (a->needs_grad) {
      a->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) a->grad.at(i) += n.grad.at(i) * b->val.at(i);
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) b->grad.at(i) += n.grad.at(i) * a->val.at(i);
    }
  });
}

// y = k*x + m
template <class T>
Ptr<T> affine(Ptr<T> x, T k, T m = T(0)) {
  TensorT<T> out = x->val;
  for (auto& v : out.data) v = k * v + m;
  return make_op<T>(std::move(out), {x}, [k](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.at(i) += k * n.grad.at(i);
  });
}

template <class T>
Ptr<T> neg(Ptr<T> x) {
  return affine(x, T(-1));
}

// y = x * s, s a scalar node
template <class T>
Ptr<T> mul_scalar(Ptr<T> x, Ptr<T> s) {
  assert(s->val.numel() == 1);
  T sv = s->val.at(0);
  TensorT<T> out = x->val;
  for (auto& v : out.data) v *= sv;
  return make_op<T>(std::move(out), {x, s}, [](NodeT<T>& n) {
    auto& x = n.parents[0];
    auto& s = n.parents[1];
    T sv = s->val.at(0);
    if (x->needs_grad) {
      x->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.at(i) += n.grad.at(i) * sv;
    }
    if (s->needs_grad) {
      s->ensure_grad();
      T acc = 0;
      for (int64_t i = 0; i < n.grad.numel(); ++i) acc += n.grad.at(i) * x->val.at(i);
      s->grad.at(0) += acc;
    }
  });
}

template <class T>
Ptr<T> relu(Ptr<T> x) {
  TensorT<T> out = x->val;
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  return make_op<T>(std::move(out), {x}, [](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i)
      if (x->val.at(i) > T(0)) x->grad.at(i) += n.grad.at(i);
  });
}

template <class T>
Ptr<T> tanh_act(Ptr<T> x) {
  TensorT<T> out = x->val;
  for (auto& v : out.data) v = std::tanh(v);
  return make_op<T>(std::move(out), {x}, [](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      T y = n.val.at(i);
      x->grad.at(i) += n.grad.at(i) * (T(1) - y * y);
    }
  });
}

template <class T>
Ptr<T> sigmoid_act(Ptr<T> x) {
  TensorT<T> out = x->val;
  for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
  return make_op<T>(std::move(out), {x}, [](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      T y = n.val.at(i);
      x->grad.at(i) += n.grad.at(i) * y * (T(1) - y);
    }
  });
}

template <class T>
Ptr<T> exp_elem(Ptr<T> x) {
  TensorT<T> out = x->val;
  for (auto& v : out.data) v = std::exp(v);
  return make_op<T>(std::move(out), {x}, [](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.at(i) += n.grad.at(i) * n.val.at(i);
  });
}

template <class T>
Ptr<T> log_elem(Ptr<T> x) {
  TensorT<T> out = x->val;
  for (auto& v : out.data) v = std::log(v);
  return make_op<T>(std::move(out), {x}, [](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.at(i) += n.grad.at(i) / x->val.at(i);
  });
}

template <class T>
Ptr<T> minimum(Ptr<T> a, Ptr<T> b) {
  assert(a->val.same_shape(b->val));
  TensorT<T> out = a->val;
  for (int64_t i = 0; i < out.numel(); ++i) out.at(i) = std::min(a->val.at(i), b->val.at(i));
  return make_op<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      bool a_wins = a->val.at(i) <= b->val.at(i);
      if (a_wins && a->needs_grad) {
        a->ensure_grad();
        a->grad.at(i) += n.grad.at(i);
      } else if (!a_wins && b->needs_grad) {
        b->ensure_grad();
        b->grad.at(i) += n.grad.at(i);
      }
    }
  });
}

// zero gradient outside the open interval (lo, hi)
template <class T>
Ptr<T> clamp(Ptr<T> x, T lo, T hi) {
  TensorT<T> out = x->val;
  for (auto& v : out.data) v = std::min(hi, std::max(lo, v));
  return make_op<T>(std::move(out), {x}, [lo, hi](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      T v = x->val.at(i);
      if (v > lo && v < hi) x->grad.at(i) += n.grad.at(i);
    }
  });
}

// ---- reshaping / assembly ----

template <class T>
Ptr<T> reshape(Ptr<T> x, std::vector<int64_t> shape) {
  assert(TensorT<T>::count(shape) == x->val.numel());
  TensorT<T> out(std::move(shape), x->val.data);
  return make_op<T>(std::move(out), {x}, [](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.at(i) += n.grad.at(i);
  });
}

template <class T>
Ptr<T> concat_rows(std::vector<Ptr<T>> parts) {
  assert(!parts.empty());
  int64_t d = parts[0]->val.shape.back();
  int64_t rows = 0;
  for (auto& p : parts) {
    assert(p->val.shape.back() == d);
    rows += p->val.numel() / d;
  }
  TensorT<T> out({rows, d});
  int64_t off = 0;
  for (auto& p : parts) {
    std::copy(p->val.data.begin(), p->val.data.end(), out.data.begin() + off);
    off += p->val.numel();
  }
  return make_op<T>(std::move(out), std::move(parts), [](NodeT<T>& n) {
    int64_t off = 0;
    for (auto& p : n.parents) {
      int64_t m = p->val.numel();
      if (p->needs_grad) {
        p->ensure_grad();
        for (int64_t i = 0; i < m; ++i) p->grad.at(i) += n.grad.at(off + i);
      }
      off += m;
    }
  });
}

template <class T>
Ptr<T> slice_rows(Ptr<T> x, int64_t r0, int64_t r1) {
  assert(x->val.ndim() == 2);
  int64_t d = x->val.shape[1];
  TensorT<T> out({r1 - r0, d});
  std::copy(x->val.data.begin() + r0 * d, x->val.data.begin() + r1 * d, out.data.begin());
  return make_op<T>(std::move(out), {x}, [r0, d](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.at(r0 * d + i) += n.grad.at(i);
  });
}

// row i of a 2-D tensor as a 1-D vector
template <class T>
Ptr<T> take_row(Ptr<T> x, int64_t i) {
  return reshape(slice_rows(x, i, i + 1), {x->val.shape[1]});
}

template <class T>
Ptr<T> concat_flat(std::vector<Ptr<T>> parts) {
  int64_t total = 0;
  for (auto& p : parts) total += p->val.numel();
  TensorT<T> out({total});
  int64_t off = 0;
  for (auto& p : parts) {
    std::copy(p->val.data.begin(), p->val.data.end(), out.data.begin() + off);
    off += p->val.numel();
  }
  return make_op<T>(std::move(out), std::move(parts), [](NodeT<T>& n) {
    int64_t off = 0;
    for (auto& p : n.parents) {
      int64_t m = p->val.numel();
      if (p->needs_grad) {
        p->ensure_grad();
        for (int64_t i = 0; i < m; ++i) p->grad.at(i) += n.grad.at(off + i);
      }
      off += m;
    }
  });
}

template <class T>
Ptr<T> stack_scalars(std::vector<Ptr<T>> parts) {
  TensorT<T> out({int64_t(parts.size())});
  for (size_t i = 0; i < parts.size(); ++i) {
    assert(parts[i]->val.numel() == 1);
    out.at(int64_t(i)) = parts[i]->val.at(0);
  }
  return make_op<T>(std::move(out), std::move(parts), [](NodeT<T>& n) {
    for (size_t i = 0; i < n.parents.size(); ++i) {
      auto& p = n.parents[i];
      if (!p->needs_grad) continue;
      p->ensure_grad();
      p->grad.at(0) += n.grad.at(int64_t(i));
    }
  });
}

template <class T>
Ptr<T> transpose(Ptr<T> x) {
  assert(x->val.ndim() == 2);
  int64_t m = x->val.shape[0], k = x->val.shape[1];
  TensorT<T> out({k, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < k; ++j) out.at(j, i) = x->val.at(i, j);
  return make_op<T>(std::move(out), {x}, [m, k](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < k; ++j) x->grad.at(i * k + j) += n.grad.at(j * m + i);
  });
}

// NCHW channel concat
template <class T>
Ptr<T> concat_channels(Ptr<T> a, Ptr<T> b) {
  assert(a->val.ndim() == 4 && b->val.ndim() == 4);
  int64_t N = a->val.shape[0], Ca = a->val.shape[1], Cb = b->val.shape[1];
  int64_t H = a->val.shape[2], W = a->val.shape[3];
  assert(b->val.shape[0] == N && b->val.shape[2] == H && b->val.shape[3] == W);
  TensorT<T> out({N, Ca + Cb, H, W});
  int64_t plane = H * W;
  for (int64_t n = 0; n < N; ++n) {
    std::copy(a->val.data.begin() + n * Ca * plane, a->val.data.begin() + (n + 1) * Ca * plane,
              out.data.begin() + n * (Ca + Cb) * plane);
    std::copy(b->val.data.begin() + n * Cb * plane, b->val.data.begin() + (n + 1) * Cb * plane,
              out.data.begin() + n * (Ca + Cb) * plane + Ca * plane);
  }
  return make_op<T>(std::move(out), {a, b}, [N, Ca, Cb, plane](NodeT<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    for (int64_t s = 0; s < N; ++s) {
      if (a->needs_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < Ca * plane; ++i)
          a->grad.at(s * Ca * plane + i) += n.grad.at(s * (Ca + Cb) * plane + i);
      }
      if (b->needs_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < Cb * plane; ++i)
          b->grad.at(s * Cb * plane + i) += n.grad.at(s * (Ca + Cb) * plane + Ca * plane + i);
      }
    }
  });
}

// ---- reductions ----

template <class T>
Ptr<T> sum_all(Ptr<T> x) {
  T acc = 0;
  for (auto v : x->val.data) acc += v;
  return make_op<T>(TensorT<T>::scalar(acc), {x}, [](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    T g = n.grad.at(0);
    for (auto& v : x->grad.data) v += g;
  });
}

template <class T>
Ptr<T> mean_all(Ptr<T> x) {
  T acc = 0;
  for (auto v : x->val.data) acc += v;
  int64_t m = x->val.numel();
  return make_op<T>(TensorT<T>::scalar(acc / T(m)), {x}, [m](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    T g = n.grad.at(0) / T(m);
    for (auto& v : x->grad.data) v += g;
  });
}

template <class T>
Ptr<T> rowsum(Ptr<T> x) {
  assert(x->val.ndim() == 2);
  int64_t B = x->val.shape[0], D = x->val.shape[1];
  TensorT<T> out({B});
  for (int64_t b = 0; b < B; ++b) {
    T acc = 0;
    for (int64_t d = 0; d < D; ++d) acc += x->val.at(b, d);
    out.at(b) = acc;
  }
  return make_op<T>(std::move(out), {x}, [B, D](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t b = 0; b < B; ++b)
      for (int64_t d = 0; d < D; ++d) x->grad.at(b * D + d) += n.grad.at(b);
  });
}

// column means: [n,d] -> [d]
template <class T>
Ptr<T> mean_over_rows(Ptr<T> x) {
  assert(x->val.ndim() == 2);
  int64_t n_rows = x->val.shape[0], d = x->val.shape[1];
  TensorT<T> out({d});
  for (int64_t j = 0; j < d; ++j) {
    T acc = 0;
    for (int64_t i = 0; i < n_rows; ++i) acc += x->val.at(i, j);
    out.at(j) = acc / T(n_rows);
  }
  return make_op<T>(std::move(out), {x}, [n_rows, d](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n_rows; ++i)
      for (int64_t j = 0; j < d; ++j) x->grad.at(i * d + j) += n.grad.at(j) / T(n_rows);
  });
}

template <class T>
Ptr<T> mse(Ptr<T> a, Ptr<T> b) {
  assert(a->val.same_shape(b->val));
  int64_t m = a->val.numel();
  T acc = 0;
  for (int64_t i = 0; i < m; ++i) {
    T d = a->val.at(i) - b->val.at(i);
    acc += d * d;
  }
  return make_op<T>(TensorT<T>::scalar(acc / T(m)), {a, b}, [m](NodeT<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    T g = n.grad.at(0) * T(2) / T(m);
    for (int64_t i = 0; i < m; ++i) {
      T d = a->val.at(i) - b->val.at(i);
      if (a->needs_grad) {
        a->ensure_grad();
        a->grad.at(i) += g * d;
      }
      if (b->needs_grad) {
        b->ensure_grad();
        b->grad.at(i) -= g * d;
      }
    }
  });
}

template <class T>
Ptr<T> dot(Ptr<T> a, Ptr<T> b) {
  assert(a->val.numel() == b->val.numel());
  T acc = 0;
  for (int64_t i = 0; i < a->val.numel(); ++i) acc += a->val.at(i) * b->val.at(i);
  return make_op<T>(TensorT<T>::scalar(acc), {a, b}, [](NodeT<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    T g = n.grad.at(0);
    if (a->needs_grad) {
      a->ensure_grad();
      for (int64_t i = 0; i < a->val.numel(); ++i) a->grad.at(i) += g * b->val.at(i);
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (int64_t i = 0; i < b->val.numel(); ++i) b->grad.at(i) += g * a->val.at(i);
    }
  });
}

template <class T>
Ptr<T> logsumexp(Ptr<T> v) {
  assert(v->val.ndim() == 1);
  int64_t n_el = v->val.numel();
  T m = v->val.at(0);
  for (int64_t i = 1; i < n_el; ++i) m = std::max(m, v->val.at(i));
  T s = 0;
  for (int64_t i = 0; i < n_el; ++i) s += std::exp(v->val.at(i) - m);
  T out = m + std::log(s);
  return make_op<T>(TensorT<T>::scalar(out), {v}, [](NodeT<T>& n) {
    auto& v = n.parents[0];
    v->ensure_grad();
    T g = n.grad.at(0);
    T lse = n.val.at(0);
    for (int64_t i = 0; i < v->val.numel(); ++i)
      v->grad.at(i) += g * std::exp(v->val.at(i) - lse);
  });
}

template <class T>
Ptr<T> at(Ptr<T> v, int64_t i) {
  return make_op<T>(TensorT<T>::scalar(v->val.at(i)), {v}, [i](NodeT<T>& n) {
    auto& v = n.parents[0];
    v->ensure_grad();
    v->grad.at(i) += n.grad.at(0);
  });
}

// rows normalized to unit L2 norm (norms below eps are left scaled by 1/eps)
template <class T>
Ptr<T> normalize_rows(Ptr<T> x, T eps = T(1e-12)) {
  bool vec = x->val.ndim() == 1;
  int64_t B = vec ? 1 : x->val.shape[0];
  int64_t D = vec ? x->val.numel() : x->val.shape[1];
  TensorT<T> out = x->val;
  std::vector<T> norms(static_cast<size_t>(B), T(0));
  for (int64_t b = 0; b < B; ++b) {
    T s = 0;
    for (int64_t d = 0; d < D; ++d) s += x->val.at(b * D + d) * x->val.at(b * D + d);
    T r = std::max(std::sqrt(s), eps);
    norms[size_t(b)] = r;
    for (int64_t d = 0; d < D; ++d) out.at(b * D + d) /= r;
  }
  return make_op<T>(std::move(out), {x}, [B, D, norms](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t b = 0; b < B; ++b) {
      T r = norms[size_t(b)];
      T gy = 0;  // y . dL/dy
      for (int64_t d = 0; d < D; ++d) gy += n.val.at(b * D + d) * n.grad.at(b * D + d);
      for (int64_t d = 0; d < D; ++d)
        x->grad.at(b * D + d) += (n.grad.at(b * D + d) - n.val.at(b * D + d) * gy) / r;
    }
  });
}

template <class T>
Ptr<T> cosine(Ptr<T> a, Ptr<T> b) {
  return dot(normalize_rows(a), normalize_rows(b));
}

// mean cross-entropy over rows of a square logit matrix with diagonal targets
template <class T>
Ptr<T> ce_rows_diag(Ptr<T> logits) {
  assert(logits->val.ndim() == 2 && logits->val.shape[0] == logits->val.shape[1]);
  int64_t B = logits->val.shape[0];
  T total = 0;
  for (int64_t r = 0; r < B; ++r) {
    T m = logits->val.at(r, 0);
    for (int64_t c = 1; c < B; ++c) m = std::max(m, logits->val.at(r, c));
    T s = 0;
    for (int64_t c = 0; c < B; ++c) s += std::exp(logits->val.at(r, c) - m);
    total += m + std::log(s) - logits->val.at(r, r);
  }
  return make_op<T>(TensorT<T>::scalar(total / T(B)), {logits}, [B](NodeT<T>& n) {
    auto& L = n.parents[0];
    L->ensure_grad();
    T g = n.grad.at(0) / T(B);
    for (int64_t r = 0; r < B; ++r) {
      T m = L->val.at(r, 0);
      for (int64_t c = 1; c < B; ++c) m = std::max(m, L->val.at(r, c));
      T s = 0;
      for (int64_t c = 0; c < B; ++c) s += std::exp(L->val.at(r, c) - m);
      for (int64_t c = 0; c < B; ++c) {
        T p = std::exp(L->val.at(r, c) - m) / s;
        L->grad.at(r * B + c) += g * (p - (c == r ? T(1) : T(0)));
      }
    }
  });
}

// ---- linear algebra ----

template <class T>
Ptr<T> matmul(Ptr<T> a, Ptr<T> b) {
  assert(a->val.ndim() == 2 && b->val.ndim() == 2 && a->val.shape[1] == b->val.shape[0]);
  int64_t m = a->val.shape[0], k = a->val.shape[1], n_cols = b->val.shape[1];
  TensorT<T> out({m, n_cols});
  ECMap<T> A(a->val.ptr(), m, k), B(b->val.ptr(), k, n_cols);
  EMap<T> O(out.ptr(), m, n_cols);
  O.noalias() = A * B;
  return make_op<T>(std::move(out), {a, b}, [m, k, n_cols](NodeT<T>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    ECMap<T> G(n.grad.ptr(), m, n_cols);
    ECMap<T> A(a->val.ptr(), m, k), B(b->val.ptr(), k, n_cols);
    if (a->needs_grad) {
      a->ensure_grad();
      EMap<T> dA(a->grad.ptr(), m, k);
      dA.noalias() += G * B.transpose();
    }
    if (b->needs_grad) {
      b->ensure_grad();
      EMap<T> dB(b->grad.ptr(), k, n_cols);
      dB.noalias() += A.transpose() * G;
    }
  });
}

// y[B,out] = x[B,in] . W[out,in]^T + b
template <class T>
Ptr<T> linear(Ptr<T> x, Ptr<T> W, Ptr<T> b) {
  bool vec = x->val.ndim() == 1;
  int64_t B = vec ? 1 : x->val.shape[0];
  int64_t in = W->val.shape[1], out_d = W->val.shape[0];
  assert((vec ? x->val.numel() : x->val.shape[1]) == in);
  TensorT<T> out(vec ? std::vector<int64_t>{out_d} : std::vector<int64_t>{B, out_d});
  ECMap<T> X(x->val.ptr(), B, in), Wm(W->val.ptr(), out_d, in);
  EMap<T> O(out.ptr(), B, out_d);
  O.noalias() = X * Wm.transpose();
  for (int64_t r = 0; r < B; ++r)
    for (int64_t c = 0; c < out_d; ++c) out.at(r * out_d + c) += b->val.at(c);
  return make_op<T>(std::move(out), {x, W, b}, [B, in, out_d](NodeT<T>& n) {
    auto& x = n.parents[0];
    auto& W = n.parents[1];
    auto& b = n.parents[2];
    ECMap<T> G(n.grad.ptr(), B, out_d);
    ECMap<T> X(x->val.ptr(), B, in), Wm(W->val.ptr(), out_d, in);
    if (x->needs_grad) {
      x->ensure_grad();
      EMap<T> dX(x->grad.ptr(), B, in);
      dX.noalias() += G * Wm;
    }
    if (W->needs_grad) {
      W->ensure_grad();
      EMap<T> dW(W->grad.ptr(), out_d, in);
      dW.noalias() += G.transpose() * X;
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (int64_t r = 0; r < B; ++r)
        for (int64_t c = 0; c < out_d; ++c) b->grad.at(c) += n.grad.at(r * out_d + c);
    }
  });
}

// ---- convolution ----

namespace detail {

template <class T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t OH, int64_t OW, T* col) {
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < kh; ++i)
      for (int64_t j = 0; j < kw; ++j) {
        T* dst = col + ((c * kh + i) * kw + j) * OH * OW;
        for (int64_t oy = 0; oy < OH; ++oy) {
          int64_t sy = oy * stride - pad + i;
          if (sy < 0 || sy >= H) {
            std::fill(dst + oy * OW, dst + (oy + 1) * OW, T(0));
            continue;
          }
          for (int64_t ox = 0; ox < OW; ++ox) {
            int64_t sx = ox * stride - pad + j;
            dst[oy * OW + ox] = (sx >= 0 && sx < W) ? x[(c * H + sy) * W + sx] : T(0);
          }
        }
      }
}

template <class T>
void col2im_add(const T* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t OH, int64_t OW, T* x) {
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < kh; ++i)
      for (int64_t j = 0; j < kw; ++j) {
        const T* src = col + ((c * kh + i) * kw + j) * OH * OW;
        for (int64_t oy = 0; oy < OH; ++oy) {
          int64_t sy = oy * stride - pad + i;
          if (sy < 0 || sy >= H) continue;
          for (int64_t ox = 0; ox < OW; ++ox) {
            int64_t sx = ox * stride - pad + j;
            if (sx >= 0 && sx < W) x[(c * H + sy) * W + sx] += src[oy * OW + ox];
          }
        }
      }
}

}  // namespace detail

// x: [N,C,H,W], W: [O,C,kh,kw], b: [O]
template <class T>
Ptr<T> conv2d(Ptr<T> x, Ptr<T> Wt, Ptr<T> b, int64_t stride = 1, int64_t pad = 0) {
  assert(x->val.ndim() == 4 && Wt->val.ndim() == 4);
  int64_t N = x->val.shape[0], C = x->val.shape[1], H = x->val.shape[2], W = x->val.shape[3];
  int64_t O = Wt->val.shape[0], kh = Wt->val.shape[2], kw = Wt->val.shape[3];
  assert(Wt->val.shape[1] == C);
  int64_t OH = (H + 2 * pad - kh) / stride + 1;
  int64_t OW = (W + 2 * pad - kw) / stride + 1;
  int64_t K = C * kh * kw, P = OH * OW;
  TensorT<T> out({N, O, OH, OW});
  std::vector<T> col(size_t(K * P));
  ECMap<T> Wm(Wt->val.ptr(), O, K);
  for (int64_t n = 0; n < N; ++n) {
    detail::im2col(x->val.ptr() + n * C * H * W, C, H, W, kh, kw, stride, pad, OH, OW, col.data());
    ECMap<T> Cm(col.data(), K, P);
    EMap<T> Om(out.ptr() + n * O * P, O, P);
    Om.noalias() = Wm * Cm;
    for (int64_t o = 0; o < O; ++o) {
      T bi = b->val.at(o);
      T* row = out.ptr() + (n * O + o) * P;
      for (int64_t p = 0; p < P; ++p) row[p] += bi;
    }
  }
  auto backward = [N, C, H, W, O, kh, kw, stride, pad, OH, OW, K, P](NodeT<T>& nd) {
    auto& x = nd.parents[0];
    auto& Wt = nd.parents[1];
    auto& b = nd.parents[2];
    std::vector<T> col(size_t(K * P)), dcol(size_t(K * P));
    ECMap<T> Wm(Wt->val.ptr(), O, K);
    if (x->needs_grad) x->ensure_grad();
    if (Wt->needs_grad) Wt->ensure_grad();
    if (b->needs_grad) b->ensure_grad();
    for (int64_t n = 0; n < N; ++n) {
      ECMap<T> G(nd.grad.ptr() + n * O * P, O, P);
      if (Wt->needs_grad) {
        detail::im2col(x->val.ptr() + n * C * H * W, C, H, W, kh, kw, stride, pad, OH, OW,
                       col.data());
        ECMap<T> Cm(col.data(), K, P);
        EMap<T> dW(Wt->grad.ptr(), O, K);
        dW.noalias() += G * Cm.transpose();
      }
      if (x->needs_grad) {
        EMap<T> dC(dcol.data(), K, P);
        dC.noalias() = Wm.transpose() * G;
        detail::col2im_add(dcol.data(), C, H, W, kh, kw, stride, pad, OH, OW,
                           x->grad.ptr() + n * C * H * W);
      }
      if (b->needs_grad) {
        for (int64_t o = 0; o < O; ++o) {
          T acc = 0;
          const T* row = nd.grad.ptr() + (n * O + o) * P;
          for (int64_t p = 0; p < P; ++p) acc += row[p];
          b->grad.at(o) += acc;
        }
      }
    }
  };
  return make_op<T>(std::move(out), {x, Wt, b}, backward);
}

template <class T>
Ptr<T> maxpool2x2(Ptr<T> x) {
  assert(x->val.ndim() == 4);
  int64_t N = x->val.shape[0], C = x->val.shape[1], H = x->val.shape[2], W = x->val.shape[3];
  int64_t OH = H / 2, OW = W / 2;
  TensorT<T> out({N, C, OH, OW});
  auto idx = std::make_shared<std::vector<int64_t>>(size_t(N * C * OH * OW));
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* xin = x->val.ptr() + nc * H * W;
    T* o = out.ptr() + nc * OH * OW;
    int64_t* ix = idx->data() + nc * OH * OW;
    for (int64_t oy = 0; oy < OH; ++oy)
      for (int64_t ox = 0; ox < OW; ++ox) {
        int64_t base = (oy * 2) * W + ox * 2;
        int64_t best = base;
        T bv = xin[base];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            int64_t k = base + dy * W + dx;
            if (xin[k] > bv) {
              bv = xin[k];
              best = k;
            }
          }
        o[oy * OW + ox] = bv;
        ix[oy * OW + ox] = nc * H * W + best;
      }
  }
  return make_op<T>(std::move(out), {x}, [idx](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.at((*idx)[size_t(i)]) += n.grad.at(i);
  });
}

template <class T>
Ptr<T> upsample2x2(Ptr<T> x) {
  assert(x->val.ndim() == 4);
  int64_t N = x->val.shape[0], C = x->val.shape[1], H = x->val.shape[2], W = x->val.shape[3];
  TensorT<T> out({N, C, H * 2, W * 2});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* xin = x->val.ptr() + nc * H * W;
    T* o = out.ptr() + nc * 4 * H * W;
    for (int64_t y = 0; y < H * 2; ++y)
      for (int64_t x2 = 0; x2 < W * 2; ++x2) o[y * W * 2 + x2] = xin[(y / 2) * W + x2 / 2];
  }
  return make_op<T>(std::move(out), {x}, [N, C, H, W](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const T* g = n.grad.ptr() + nc * 4 * H * W;
      T* dx = x->grad.ptr() + nc * H * W;
      for (int64_t y = 0; y < H * 2; ++y)
        for (int64_t x2 = 0; x2 < W * 2; ++x2) dx[(y / 2) * W + x2 / 2] += g[y * W * 2 + x2];
    }
  });
}

template <class T>
Ptr<T> global_avg_pool(Ptr<T> x) {
  assert(x->val.ndim() == 4);
  int64_t N = x->val.shape[0], C = x->val.shape[1], plane = x->val.shape[2] * x->val.shape[3];
  TensorT<T> out({N, C});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    T acc = 0;
    const T* p = x->val.ptr() + nc * plane;
    for (int64_t i = 0; i < plane; ++i) acc += p[i];
    out.at(nc) = acc / T(plane);
  }
  return make_op<T>(std::move(out), {x}, [N, C, plane](NodeT<T>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      T g = n.grad.at(nc) / T(plane);
      T* dx = x->grad.ptr() + nc * plane;
      for (int64_t i = 0; i < plane; ++i) dx[i] += g;
    }
  });
}

// Bilinear resample of a CHW image under rotation+scale about a source
// center; covers crop, rotate and resize in one differentiable op.
// Output pixel (i,j) reads source coords:
//   u = (j - (ow-1)/2) * scale, v = (i - (oh-1)/2) * scale
//   sx = cx + u*cos(a) - v*sin(a), sy = cy + u*sin(a) + v*cos(a)
template <class T>
Ptr<T> affine_sample(Ptr<T> img, int64_t oh, int64_t ow, T cx, T cy, T angle, T scale) {
  assert(img->val.ndim() == 3);
  int64_t C = img->val.shape[0], H = img->val.shape[1], W = img->val.shape[2];
  TensorT<T> out({C, oh, ow});
  T ca = std::cos(angle), sa = std::sin(angle);
  auto clampi = [](int64_t v, int64_t hi) { return std::min(std::max(v, int64_t(0)), hi); };
  for (int64_t i = 0; i < oh; ++i)
    for (int64_t j = 0; j < ow; ++j) {
      T u = (T(j) - T(ow - 1) / 2) * scale;
      T v = (T(i) - T(oh - 1) / 2) * scale;
      T sx = cx + u * ca - v * sa;
      T sy = cy + u * sa + v * ca;
      sx = std::min(std::max(sx, T(0)), T(W - 1));
      sy = std::min(std::max(sy, T(0)), T(H - 1));
      int64_t x0 = clampi(int64_t(std::floor(sx)), W - 1), x1 = clampi(x0 + 1, W - 1);
      int64_t y0 = clampi(int64_t(std::floor(sy)), H - 1), y1 = clampi(y0 + 1, H - 1);
      T fx = sx - T(x0), fy = sy - T(y0);
      for (int64_t c = 0; c < C; ++c) {
        const T* p = img->val.ptr() + c * H * W;
        T val = p[y0 * W + x0] * (1 - fx) * (1 - fy) + p[y0 * W + x1] * fx * (1 - fy) +
                p[y1 * W + x0] * (1 - fx) * fy + p[y1 * W + x1] * fx * fy;
        out.at((c * oh + i) * ow + j) = val;
      }
    }
  return make_op<T>(std::move(out), {img}, [C, H, W, oh, ow, cx, cy, ca, sa, scale](NodeT<T>& n) {
    auto& img = n.parents[0];
    img->ensure_grad();
    auto clampi = [](int64_t v, int64_t hi) { return std::min(std::max(v, int64_t(0)), hi); };
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        T u = (T(j) - T(ow - 1) / 2) * scale;
        T v = (T(i) - T(oh - 1) / 2) * scale;
        T sx = cx + u * ca - v * sa;
        T sy = cy + u * sa + v * ca;
        sx = std::min(std::max(sx, T(0)), T(W - 1));
        sy = std::min(std::max(sy, T(0)), T(H - 1));
        int64_t x0 = clampi(int64_t(std::floor(sx)), W - 1), x1 = clampi(x0 + 1, W - 1);
        int64_t y0 = clampi(int64_t(std::floor(sy)), H - 1), y1 = clampi(y0 + 1, H - 1);
        T fx = sx - T(x0), fy = sy - T(y0);
        for (int64_t c = 0; c < C; ++c) {
          T g = n.grad.at((c * oh + i) * ow + j);
          T* dp = img->grad.ptr() + c * H * W;
          dp[y0 * W + x0] += g * (1 - fx) * (1 - fy);
          dp[y0 * W + x1] += g * fx * (1 - fy);
          dp[y1 * W + x0] += g * (1 - fx) * fy;
          dp[y1 * W + x1] += g * fx * fy;
        }
      }
  });
}

// Fused tanh RNN over a [n,d] sequence; returns all hidden states [n,h].
template <class T>
Ptr<T> rnn_tanh(Ptr<T> x, Ptr<T> Wx, Ptr<T> Wh, Ptr<T> b) {
  assert(x->val.ndim() == 2);
  int64_t n_steps = x->val.shape[0], d = x->val.shape[1];
  int64_t h = Wx->val.shape[0];
  assert(Wx->val.shape[1] == d && Wh->val.shape[0] == h && Wh->val.shape[1] == h);
  TensorT<T> out({n_steps, h});
  ECMap<T> WxM(Wx->val.ptr(), h, d), WhM(Wh->val.ptr(), h, h);
  Eigen::Matrix<T, Eigen::Dynamic, 1> hprev = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(h);
  for (int64_t t = 0; t < n_steps; ++t) {
    ECMap<T> xt(x->val.ptr() + t * d, 1, d);
    Eigen::Matrix<T, Eigen::Dynamic, 1> a = WxM * xt.transpose() + WhM * hprev;
    for (int64_t k = 0; k < h; ++k) {
      T v = std::tanh(a(k) + b->val.at(k));
      out.at(t * h + k) = v;
      hprev(k) = v;
    }
  }
  return make_op<T>(std::move(out), {x, Wx, Wh, b}, [n_steps, d, h](NodeT<T>& n) {
    auto& x = n.parents[0];
    auto& Wx = n.parents[1];
    auto& Wh = n.parents[2];
    auto& b = n.parents[3];
    if (x->needs_grad) x->ensure_grad();
    if (Wx->needs_grad) Wx->ensure_grad();
    if (Wh->needs_grad) Wh->ensure_grad();
    if (b->needs_grad) b->ensure_grad();
    ECMap<T> WxM(Wx->val.ptr(), h, d), WhM(Wh->val.ptr(), h, h);
    Eigen::Matrix<T, Eigen::Dynamic, 1> carry = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(h);
    for (int64_t t = n_steps - 1; t >= 0; --t) {
      Eigen::Matrix<T, Eigen::Dynamic, 1> u(h);
      for (int64_t k = 0; k < h; ++k) {
        T y = n.val.at(t * h + k);
        u(k) = (n.grad.at(t * h + k) + carry(k)) * (T(1) - y * y);
      }
      if (b->needs_grad)
        for (int64_t k = 0; k < h; ++k) b->grad.at(k) += u(k);
      if (Wx->needs_grad) {
        ECMap<T> xt(x->val.ptr() + t * d, 1, d);
        EMap<T> dWx(Wx->grad.ptr(), h, d);
        dWx.noalias() += u * xt;
      }
      if (Wh->needs_grad && t > 0) {
        ECMap<T> hp(n.val.ptr() + (t - 1) * h, 1, h);
        EMap<T> dWh(Wh->grad.ptr(), h, h);
        dWh.noalias() += u * hp;
      }
      if (x->needs_grad) {
        EMap<T> dxt(x->grad.ptr() + t * d, 1, d);
        dxt.noalias() += (WxM.transpose() * u).transpose();
      }
      carry.noalias() = WhM.transpose() * u;
    }
  });
}

// ---- backward driver ----

template <class T>
void backward(const Ptr<T>& root) {
  assert(root->val.numel() == 1);
  std::vector<NodeT<T>*> order;
  std::unordered_set<NodeT<T>*> seen;
  // iterative post-order DFS
  std::vector<std::pair<NodeT<T>*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, child] = stack.back();
    if (child < node->parents.size()) {
      NodeT<T>* p = node->parents[child].get();
      ++child;
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad.fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT<T>* n = *it;
    if (n->back && n->needs_grad) {
      n->ensure_grad();
      n->back(*n);
    }
  }
}

}  // namespace pva::nn
