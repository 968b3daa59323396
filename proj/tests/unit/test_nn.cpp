#include <doctest.h>

#include <cmath>
#include <memory>

#include "ceunet/nn.hpp"
#include "support.hpp"

using namespace ceunet;
using namespace ceunet::nn;

namespace {

Tensor<double> random_tensor(Rng& rng, std::size_t b, std::size_t h, std::size_t w, std::size_t c) {
  Tensor<double> t(b, h, w, c);
  t.data = testing::uniform_d(rng, t.size());
  return t;
}

double dot(const Tensor<double>& a, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * r[i];
  return s;
}

bool close(double analytic, double numeric) {
  return std::abs(analytic - numeric) <= 1e-6 + 1e-5 * std::max(std::abs(analytic), std::abs(numeric));
}

// Central differences of L = <layer(x), R> against backward().
void gradient_check(Layer<double>& layer, Tensor<double> x, Rng& rng) {
  Rng unused(0);
  const Tensor<double> y0 = layer.forward(x, true, unused);
  const std::vector<double> r = testing::uniform_d(rng, y0.size());
  Tensor<double> dy = y0;
  dy.data = r;
  const auto params = layer.params();
  zero_grad(params);
  const Tensor<double> dx = layer.backward(dy, true);
  REQUIRE(dx.size() == x.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); i += 1 + x.size() / 40) {
    const double keep = x.data[i];
    x.data[i] = keep + h;
    const double up = dot(layer.forward(x, true, unused), r);
    x.data[i] = keep - h;
    const double down = dot(layer.forward(x, true, unused), r);
    x.data[i] = keep;
    CHECK(close(dx.data[i], (up - down) / (2 * h)));
  }
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); i += 1 + p->value.size() / 40) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double up = dot(layer.forward(x, true, unused), r);
      p->value[i] = keep - h;
      const double down = dot(layer.forward(x, true, unused), r);
      p->value[i] = keep;
      CHECK(close(p->grad[i], (up - down) / (2 * h)));
    }
  }
}

}  // namespace

TEST_CASE("convolution gradients") {
  Rng rng(41);
  for (bool transposed : {false, true}) {
    for (bool bias : {false, true}) {
      Conv2d<double> conv("c", ConvShape{3, 4, 3, 3, 1, 1, transposed, bias});
      conv.initialize(rng);
      if (bias) conv.bias().value = testing::uniform_d(rng, 4);
      gradient_check(conv, random_tensor(rng, 2, 4, 5, 3), rng);
      gradient_check(conv, random_tensor(rng, 3, 1, 1, 3), rng);
    }
  }
  Conv2d<double> valid("v", ConvShape{2, 3, 1, 4, 0, 0, false, true});
  valid.initialize(rng);
  gradient_check(valid, random_tensor(rng, 2, 1, 9, 2), rng);
  Conv2d<double> full("f", ConvShape{2, 3, 1, 4, 0, 0, true, true});
  full.initialize(rng);
  gradient_check(full, random_tensor(rng, 2, 1, 6, 2), rng);
}

TEST_CASE("convolution matches a direct sum") {
  Rng rng(43);
  Conv2d<double> conv("c", ConvShape{2, 3, 3, 3, 1, 1, false, true});
  conv.initialize(rng);
  conv.bias().value = {0.1, -0.2, 0.3};
  const Tensor<double> x = random_tensor(rng, 1, 4, 4, 2);
  const Tensor<double> y = conv.infer(x);
  const auto& w = conv.weight().value;  // [ky][kx][in][out]
  for (long r = 0; r < 4; ++r) {
    for (long c = 0; c < 4; ++c) {
      for (std::size_t o = 0; o < 3; ++o) {
        double s = conv.bias().value[o];
        for (long ky = 0; ky < 3; ++ky) {
          for (long kx = 0; kx < 3; ++kx) {
            const long yy = r + ky - 1, xx = c + kx - 1;
            if (yy < 0 || xx < 0 || yy >= 4 || xx >= 4) continue;
            for (std::size_t i = 0; i < 2; ++i) {
              s += x.data[(static_cast<std::size_t>(yy) * 4 + static_cast<std::size_t>(xx)) * 2 + i] *
                   w[((static_cast<std::size_t>(ky) * 3 + static_cast<std::size_t>(kx)) * 2 + i) * 3 + o];
            }
          }
        }
        CHECK(y.data[(static_cast<std::size_t>(r) * 4 + static_cast<std::size_t>(c)) * 3 + o] ==
              doctest::Approx(s).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("batch norm, activation, pooling and upsampling gradients") {
  Rng rng(47);
  BatchNorm<double> bn("bn", 3);
  bn.params()[0]->value = testing::uniform_d(rng, 3, 0.5, 1.5);
  bn.params()[1]->value = testing::uniform_d(rng, 3);
  gradient_check(bn, random_tensor(rng, 4, 2, 2, 3), rng);

  LeakyRelu<double> act(0.01);
  gradient_check(act, random_tensor(rng, 2, 3, 3, 2), rng);

  MaxPool<double> pool(1, 2);
  gradient_check(pool, random_tensor(rng, 2, 1, 7, 3), rng);

  Upsample<double> up(1, 2, 1, 7);
  gradient_check(up, random_tensor(rng, 2, 1, 4, 3), rng);
}

TEST_CASE("batch norm inference uses moving statistics") {
  BatchNorm<double> bn("bn", 1, 0.5, 1e-3);
  Rng rng(1);
  Tensor<double> x(4, 1, 1, 1);
  x.data = {1, 2, 3, 4};
  bn.forward(x, true, rng);
  const auto bufs = bn.buffers();
  REQUIRE(bufs.size() == 2);
  CHECK((*bufs[0].second)[0] == doctest::Approx(0.5 * 2.5));
  const Tensor<double> y = bn.infer(x);
  const double mean = (*bufs[0].second)[0], var = (*bufs[1].second)[0];
  CHECK(y.data[0] == doctest::Approx((1 - mean) / std::sqrt(var + 1e-3)));
}

TEST_CASE("dropout is inverted and inactive at inference") {
  Dropout<double> drop(0.2);
  Rng rng(5);
  Tensor<double> x(1, 1, 1, 10000);
  std::fill(x.data.begin(), x.data.end(), 1.0);
  const Tensor<double> y = drop.forward(x, true, rng);
  double kept = 0, sum = 0;
  for (double v : y.data) {
    if (v != 0.0) {
      ++kept;
      CHECK(v == doctest::Approx(1.25));
    }
    sum += v;
  }
  CHECK(kept / 10000 == doctest::Approx(0.8).epsilon(0.05));
  CHECK(drop.infer(x).data == x.data);
}

TEST_CASE("adam step follows the bias-corrected update") {
  Param<double> p{"p", {1.0, -2.0}, {0.5, -0.25}};
  Adam<double> opt(0.1);
  opt.step({&p});
  const double lr_t = 0.1 * std::sqrt(1 - 0.999) / (1 - 0.9);
  const double m0 = 0.1 * 0.5, v0 = 0.001 * 0.25;
  CHECK(p.value[0] == doctest::Approx(1.0 - lr_t * m0 / (std::sqrt(v0) + 1e-7)).epsilon(1e-12));
  CHECK(opt.steps() == 1);
}

TEST_CASE("channel concat and split are inverses") {
  Rng rng(3);
  const Tensor<double> a = random_tensor(rng, 2, 2, 2, 3), b = random_tensor(rng, 2, 2, 2, 5);
  const Tensor<double> c = concat_channels(a, b);
  CHECK(c.c == 8);
  const auto [x, y] = split_channels(c, 3);
  CHECK(x.data == a.data);
  CHECK(y.data == b.data);
}
