#include <doctest.h>

#include <cmath>

#include "splab/errors.hpp"
#include "splab/tensor.hpp"

using namespace splab;

TEST_SUITE("tensor") {

// ---------------------------------------------------------------- creation

TEST_CASE("zeros and full fill the requested shape") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.rank() == 2);
  CHECK(z.size() == 6);
  for (double v : z.data) CHECK(v == 0.0);

  Tensor f = Tensor::full({4}, 2.5);
  CHECK(f.size() == 4);
  for (double v : f.data) CHECK(v == 2.5);
}

TEST_CASE("constructor rejects mismatched payload") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), config_error);
}

// ---------------------------------------------------------------- indexing

TEST_CASE("row-major offsets and element access") {
  Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
  CHECK(t.offset({0, 0}) == 0);
  CHECK(t.offset({1, 0}) == 3);
  CHECK(t.offset({1, 2}) == 5);
  CHECK(t.at({1, 2}) == 5.0);
  t.at({0, 1}) = 7.0;
  CHECK(t.data[1] == 7.0);
  CHECK(t.dim(1) == 3);
}

TEST_CASE("reshape keeps data and checks the element count") {
  Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
  Tensor r = t.reshaped({3, 2});
  CHECK(r.shape == std::vector<std::size_t>{3, 2});
  CHECK(r.data == t.data);
  CHECK_THROWS_AS(t.reshaped({4, 2}), config_error);
}

// -------------------------------------------------------------- arithmetic

TEST_CASE("elementwise operators demand identical shapes") {
  Tensor a({2}, {1, 2});
  Tensor b({2}, {10, 20});
  CHECK((a + b).data == std::vector<double>{11, 22});
  CHECK((b - a).data == std::vector<double>{9, 18});
  CHECK((a * b).data == std::vector<double>{10, 40});
  CHECK((2.0 * a).data == std::vector<double>{2, 4});
  Tensor c({3}, {1, 2, 3});
  CHECK_THROWS_AS(a + c, config_error);
}

TEST_CASE("matmul oracle") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {5, 6, 7, 8});
  Tensor c = matmul(a, b);
  CHECK(c.data == std::vector<double>{19, 22, 43, 50});
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), config_error);
}

TEST_CASE("transpose2d swaps axes") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = transpose2d(a);
  CHECK(t.shape == std::vector<std::size_t>{3, 2});
  CHECK(t.data == std::vector<double>{1, 4, 2, 5, 3, 6});
}

// ----------------------------------------------------------------- metrics

TEST_CASE("norms and reductions") {
  Tensor a({2}, {3, 4});
  CHECK(frobenius_norm(a) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(dot(a, a) == 25.0);
  Tensor b({3}, {-7, 2, 5});
  CHECK(max_abs(b) == 7.0);
  CHECK(shape_numel({2, 3, 4}) == 24);
}

TEST_CASE("check_finite flags NaN and Inf") {
  Tensor ok({2}, {1.0, 2.0});
  CHECK_NOTHROW(check_finite(ok, "test"));
  Tensor bad({2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(check_finite(bad, "test"), numeric_error);
}

}  // TEST_SUITE
