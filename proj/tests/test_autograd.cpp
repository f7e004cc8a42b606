#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pva/layers.hpp"
#include "test_util.hpp"

using namespace pva;
using namespace pva::nn;
using D = double;

static TensorD randn(std::vector<int64_t> s, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  return TensorD::randn(std::move(s), rng, scale);
}

TEST_CASE("elementwise ops match finite differences") {
  auto x = make_leaf(randn({3, 4}, 1), true);
  auto y = make_leaf(randn({3, 4}, 2), true);

  auto check = [&](Ptr<D> leaf, std::function<Ptr<D>()> f) {
    CHECK(testutil::gradcheck<D>(leaf, f, 1e-6) < 1e-6);
  };

  check(x, [&] { return sum_all(mul(add(x, y), sub(x, y))); });
  check(y, [&] { return sum_all(mul(add(x, y), sub(x, y))); });
  check(x, [&] { return mean_all(relu(affine(x, 2.0, -0.3))); });
  check(x, [&] { return sum_all(tanh_act(x)); });
  check(x, [&] { return sum_all(sigmoid_act(x)); });
  check(x, [&] { return sum_all(exp_elem(affine(x, 0.3))); });
  check(x, [&] { return mse(x, y); });
  check(x, [&] { return sum_all(minimum(x, y)); });
  check(x, [&] { return sum_all(clamp(x, -0.5, 0.5)); });
}

TEST_CASE("matmul linear rnn backward") {
  auto A = make_leaf(randn({3, 5}, 3), true);
  auto B = make_leaf(randn({5, 2}, 4), true);
  CHECK(testutil::gradcheck<D>(A, [&] { return sum_all(matmul(A, B)); }, 1e-6) < 1e-6);
  CHECK(testutil::gradcheck<D>(B, [&] { return sum_all(matmul(A, B)); }, 1e-6) < 1e-6);

  auto x = make_leaf(randn({4, 6}, 5), true);
  auto W = make_leaf(randn({3, 6}, 6), true);
  auto b = make_leaf(randn({3}, 7), true);
  for (auto leaf : {x, W, b})
    CHECK(testutil::gradcheck<D>(leaf, [&] { return mean_all(linear(x, W, b)); }, 1e-6) < 1e-6);

  auto Wx = make_leaf(randn({4, 3}, 8, 0.5), true);
  auto Wh = make_leaf(randn({4, 4}, 9, 0.4), true);
  auto rb = make_leaf(randn({4}, 10, 0.1), true);
  auto seq = make_leaf(randn({5, 3}, 11), true);
  for (auto leaf : {seq, Wx, Wh, rb}) {
    auto f = [&] { return sum_all(mul(rnn_tanh(seq, Wx, Wh, rb), rnn_tanh(seq, Wx, Wh, rb))); };
    CHECK(testutil::gradcheck<D>(leaf, f, 1e-6) < 1e-5);
  }
}

TEST_CASE("conv pool upsample backward") {
  auto x = make_leaf(randn({2, 3, 8, 8}, 12), true);
  auto W = make_leaf(randn({4, 3, 3, 3}, 13, 0.4), true);
  auto b = make_leaf(randn({4}, 14, 0.1), true);
  for (auto leaf : {x, W, b}) {
    auto f = [&] { return mean_all(conv2d(x, W, b, 2, 1)); };
    CHECK(testutil::gradcheck<D>(leaf, f, 1e-5) < 1e-5);
  }
  // nonlinearity after conv so pooling indices matter
  auto f2 = [&] { return mean_all(maxpool2x2(tanh_act(conv2d(x, W, b, 1, 1)))); };
  CHECK(testutil::gradcheck<D>(x, f2, 1e-5) < 1e-5);
  auto f3 = [&] { return mean_all(mul(upsample2x2(x), upsample2x2(x))); };
  CHECK(testutil::gradcheck<D>(x, f3, 1e-6) < 1e-6);
  auto f4 = [&] { return sum_all(global_avg_pool(x)); };
  CHECK(testutil::gradcheck<D>(x, f4, 1e-6) < 1e-6);
}

TEST_CASE("assembly and reduction ops") {
  auto a = make_leaf(randn({2, 4}, 15), true);
  auto c = make_leaf(randn({3, 4}, 16), true);
  auto f = [&] { return sum_all(mul(concat_rows<D>({a, c}), concat_rows<D>({a, c}))); };
  CHECK(testutil::gradcheck<D>(a, f, 1e-6) < 1e-6);
  CHECK(testutil::gradcheck<D>(c, f, 1e-6) < 1e-6);

  auto g = [&] { return dot(take_row(c, 1), take_row(c, 2)); };
  CHECK(testutil::gradcheck<D>(c, g, 1e-6) < 1e-6);

  auto v = make_leaf(randn({5}, 17), true);
  CHECK(testutil::gradcheck<D>(v, [&] { return logsumexp(v); }, 1e-6) < 1e-6);
  CHECK(testutil::gradcheck<D>(v, [&] { return at(v, 2); }, 1e-6) < 1e-6);

  auto n = [&] { return sum_all(mul(normalize_rows(a), slice_rows(c, 0, 2))); };
  CHECK(testutil::gradcheck<D>(a, n, 1e-6) < 1e-6);

  auto cosf = [&] { return cosine(take_row(a, 0), take_row(a, 1)); };
  CHECK(testutil::gradcheck<D>(a, cosf, 1e-6) < 1e-6);

  auto L = make_leaf(randn({4, 4}, 18), true);
  CHECK(testutil::gradcheck<D>(L, [&] { return ce_rows_diag(L); }, 1e-6) < 1e-6);

  auto m = make_leaf(randn({4, 3}, 19), true);
  CHECK(testutil::gradcheck<D>(m, [&] { return sum_all(mul(rowsum(m), rowsum(m))); }, 1e-6) <
        1e-6);
  CHECK(testutil::gradcheck<D>(
            m, [&] { return sum_all(mul(mean_over_rows(m), mean_over_rows(m))); }, 1e-6) < 1e-6);

  auto s = make_leaf(TensorD::scalar(1.7), true);
  CHECK(testutil::gradcheck<D>(s, [&] { return sum_all(mul_scalar(m, s)); }, 1e-6) < 1e-6);
  CHECK(testutil::gradcheck<D>(m, [&] { return sum_all(mul_scalar(m, s)); }, 1e-6) < 1e-6);
}

TEST_CASE("affine_sample interpolates and backpropagates") {
  auto img = make_leaf(randn({2, 9, 9}, 20), true);
  auto f = [&] {
    auto p = affine_sample<D>(img, 5, 5, 4.0, 4.0, 0.35, 0.8);
    return sum_all(mul(p, p));
  };
  CHECK(testutil::gradcheck<D>(img, f, 1e-6) < 1e-5);

  // zero rotation, unit scale, centered: identity on the interior
  auto id = affine_sample<D>(img, 9, 9, 4.0, 4.0, 0.0, 1.0);
  for (int64_t i = 0; i < id->val.numel(); ++i)
    CHECK(id->val.at(i) == doctest::Approx(img->val.at(i)).epsilon(1e-12));
}

TEST_CASE("concat_channels splits gradient") {
  auto a = make_leaf(randn({1, 2, 4, 4}, 21), true);
  auto b = make_leaf(randn({1, 3, 4, 4}, 22), true);
  auto f = [&] {
    auto c = concat_channels(a, b);
    return sum_all(mul(c, c));
  };
  CHECK(testutil::gradcheck<D>(a, f, 1e-6) < 1e-6);
  CHECK(testutil::gradcheck<D>(b, f, 1e-6) < 1e-6);
}

TEST_CASE("adam reduces a quadratic") {
  ParamSetT<D> ps;
  auto w = ps.add("w", randn({8}, 23));
  AdamT<D> opt(ps.all(), 0.05);
  double first = 0, last = 0;
  for (int it = 0; it < 200; ++it) {
    opt.zero_grad();
    auto loss = mse(w, constant(TensorD::zeros({8})));
    backward(loss);
    if (it == 0) first = loss->val.at(0);
    last = loss->val.at(0);
    opt.step();
  }
  CHECK(last < first * 1e-3);
}

TEST_CASE("gradient accumulates when a node is used twice") {
  auto x = make_leaf(TensorD::scalar(3.0), true);
  auto y = mul(x, x);  // d/dx = 2x = 6
  backward(y);
  CHECK(x->grad.at(0) == doctest::Approx(6.0));
}
