#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hdgcn/tensor.hpp"

using namespace hdgcn;

TEST_CASE("construction and accessors") {
  Tensor t(2, 3);
  CHECK(t.rows == 2);
  CHECK(t.cols == 3);
  CHECK(t.size() == 6);
  t.at(1, 2) = 4.5;
  CHECK(t.at(1, 2) == 4.5);
  CHECK(t.shape_str() == "2x3");
}

TEST_CASE("identity and from_rows") {
  Tensor i = Tensor::identity(3);
  CHECK(i.at(0, 0) == 1.0);
  CHECK(i.at(0, 1) == 0.0);
  Tensor m = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(m.at(1, 0) == 3.0);
  CHECK_THROWS_AS(Tensor::from_rows({{1, 2}, {3}}), DimensionError);
}

TEST_CASE("glorot stays within its limit") {
  std::mt19937_64 rng(1);
  Tensor g = Tensor::glorot(10, 6, rng);
  double limit = std::sqrt(6.0 / 16.0);
  for (double x : g.v) {
    CHECK(x <= limit);
    CHECK(x >= -limit);
  }
}

TEST_CASE("check_finite rejects NaN and Inf") {
  Tensor t(1, 2);
  CHECK_NOTHROW(check_finite(t, "test"));
  t.at(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(check_finite(t, "test"), DataError);
  t.at(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(check_finite(t, "test"), DataError);
}

TEST_CASE("allocation cap trips oversized buffers") {
  AllocCapGuard guard(100);
  CHECK_NOTHROW(Tensor(10, 10));
  CHECK_THROWS_AS(Tensor(11, 10), CapabilityError);
}
