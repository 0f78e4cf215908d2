#include <random>

#include "doctest.h"
#include "test_support.hpp"
#include "unfolder/response.hpp"

using namespace unfolder;
using unfolder::testing::normal_cdf;

namespace {

ResponseMatrix square(const Matrix<double>& a) {
  return ResponseMatrix(Axis::uniform(0.0, double(a.cols()), a.cols()),
                        Axis::uniform(0.0, double(a.rows()), a.rows()), a);
}

}  // namespace

TEST_CASE("compute_k small cases") {
  for (Index n : {1, 3, 17}) CHECK(compute_k(Matrix<double>::Identity(n, n)) == 1.0);

  Matrix<double> half(2, 2);
  half << 0.5, 0.5, 0.5, 0.5;
  // A^T A = [[0.5,0.5],[0.5,0.5]] by hand, both column sums 1
  CHECK(compute_k(half) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(compute_k(Matrix<double>::Zero(3, 2)), DegenerateOperatorError);
  Matrix<double> negative = Matrix<double>::Identity(2, 2);
  negative(0, 1) = -0.1;
  CHECK_THROWS_AS(compute_k(negative), ConstructionError);
}

TEST_CASE("compute_k equals the max column sum of an explicit A^T A") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix<double> a = testing::random_nonnegative(1 + trial % 9, 1 + (trial * 7) % 11, rng);
    const Matrix<double> ata = a.transpose() * a;
    CHECK(compute_k(a) == doctest::Approx(ata.colwise().sum().maxCoeff()).epsilon(1e-13));
  }
}

TEST_CASE("compute_k bounds the spectrum of A^T A") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Index rows = 2 + trial % 13;
    const Index cols = 2 + (trial * 5) % 11;
    const Matrix<double> a = testing::random_nonnegative(rows, cols, rng);
    const double lambda = testing::power_iteration_lambda_max(a.transpose() * a);
    CHECK(compute_k(a) >= lambda - 1e-9);
  }
}

TEST_CASE("convolution response has unit normalization factor") {
  const double sigma = 1.0;
  const Axis truth = Axis::uniform(-10.0, 10.0, 80);
  const Axis meas = Axis::uniform(-16.0, 16.0, 128);  // 6 sigma padding
  const ResponseMatrix r = from_kernel(GaussianKernel<double>{sigma}, truth, meas);
  CHECK(std::abs(r.k_factor() - 1.0) < 1e-6);
  CHECK_FALSE(r.peaked());
  CHECK(r.empty_columns().empty());
}

TEST_CASE("from_kernel: narrow kernel gives the identity") {
  const Axis axis = Axis::uniform(0.0, 10.0, 10);
  const ResponseMatrix r = from_kernel(GaussianKernel<double>{1e-3}, axis, axis);
  const Matrix<double> off = r.matrix() - Matrix<double>(r.matrix().diagonal().asDiagonal());
  CHECK(off.cwiseAbs().maxCoeff() < 1e-6);
  CHECK((r.matrix().diagonal().array() > 1.0 - 1e-6).all());
}

TEST_CASE("from_kernel: column sums against the error function") {
  const double sigma = 0.7;
  const Index q = 8;
  const Axis truth = Axis::uniform(-5.0, 5.0, 20);
  const Axis meas = Axis::uniform(-5.0 - 6 * sigma, 5.0 + 6 * sigma, 40);
  const ResponseMatrix r = from_kernel(GaussianKernel<double>{sigma}, truth, meas, q);
  for (Index j = 0; j < truth.nbins(); ++j) {
    double expected = 0.0;
    for (Index p = 0; p < q; ++p) {
      const double x = truth.lower(j) + truth.volume(j) * (p + 0.5) / q;
      expected += (normal_cdf((meas.high() - x) / sigma) - normal_cdf((meas.low() - x) / sigma)) / q;
    }
    CHECK(std::abs(r.matrix().col(j).sum() - expected) < 1e-12);
    CHECK(std::abs(r.matrix().col(j).sum() - 1.0) < 1e-6);
  }

  // plain density with midpoint quadrature in y converges to the same matrix
  const auto density = [sigma](double y, double x) { return GaussianKernel<double>{sigma}.density(y, x); };
  const ResponseMatrix mid = from_kernel(density, truth, meas, 16);
  for (Index j = 0; j < truth.nbins(); ++j) CHECK(std::abs(mid.matrix().col(j).sum() - 1.0) < 1e-6);
  const ResponseMatrix exact16 = from_kernel(GaussianKernel<double>{sigma}, truth, meas, 16);
  CHECK((mid.matrix() - exact16.matrix()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("from_kernel: truncated domain leaks at the edges") {
  const Axis axis = Axis::uniform(0.0, 10.0, 20);
  const ResponseMatrix r = from_kernel(GaussianKernel<double>{1.0}, axis, axis);
  const Vector<double> sums = r.matrix().colwise().sum().transpose();
  CHECK(sums(0) < 1.0 - 0.1);
  CHECK(sums(19) < 1.0 - 0.1);
  CHECK(sums(10) > sums(0));
}

TEST_CASE("from_kernel rejects negative kernels") {
  const Axis axis = Axis::uniform(0.0, 1.0, 2);
  const auto bad = [](double y, double x) { return y - x; };
  CHECK_THROWS_AS(from_kernel(bad, axis, axis), InvalidKernelError);
  CHECK_THROWS_AS(from_kernel(GaussianKernel<double>{1.0}, axis, axis, 0), ConstructionError);
}

TEST_CASE("calorimeter kernel") {
  const CalorimeterKernel<double> k{1.15, 0.055};
  CHECK(k.sigma(4.0) == doctest::Approx(4.0 * std::sqrt(1.15 * 1.15 / 4.0 + 0.055 * 0.055)));
  CHECK(k.probability(-5.0, 0.0, 1.0) == 0.0);
  CHECK(k.density(-0.1, 1.0) == 0.0);
  // whole non-negative line: probability that the energy stays positive
  CHECK(k.probability(-1.0, 1e9, 2.0) == doctest::Approx(normal_cdf(2.0 / k.sigma(2.0))));
  const CalorimeterKernel<double> ideal{0.0, 0.0};
  CHECK(ideal.probability(1.0, 2.0, 1.5) == 1.0);
}

TEST_CASE("from_pairs counting") {
  const Axis unit = Axis::uniform(0.0, 1.0, 1);
  const ResponseMatrix one = from_pairs<double>({{0.5, 0.5}}, unit, unit);
  CHECK(one.matrix()(0, 0) == 1.0);
  CHECK(one.k_factor() == 1.0);

  const ResponseMatrix half = from_pairs<double>({{0.5, 0.5}, {0.5, std::nullopt}}, unit, unit);
  CHECK(half.matrix()(0, 0) == 0.5);

  CHECK_THROWS_AS(from_pairs<double>({}, unit, unit), ConstructionError);

  const Axis two = Axis::uniform(0.0, 2.0, 2);
  const ResponseMatrix flagged = from_pairs<double>({{0.5, 0.5}, {0.2, 1.7}}, two, two);
  REQUIRE(flagged.empty_columns().size() == 1);
  CHECK(flagged.empty_columns()[0] == 1);

  // out-of-range measurement counts in the denominator only
  const ResponseMatrix lost = from_pairs<double>({{0.5, 0.5}, {0.5, 5.0}, {0.5, -3.0}, {0.5, 1.5}}, two, two);
  CHECK(lost.matrix()(0, 0) == 0.25);
  CHECK(lost.matrix()(1, 0) == 0.25);
}

TEST_CASE("from_pairs agrees with from_kernel at 10^6 pairs") {
  const double sigma = 0.5;
  const Axis truth = Axis::uniform(0.0, 6.0, 6);
  const Axis meas = Axis::uniform(0.0, 6.0, 6);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ux(truth.low(), truth.high());
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<MigrationPair> pairs;
  const int n = 1000000;
  pairs.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double x = ux(rng);
    pairs.push_back({x, x + noise(rng)});
  }
  const ResponseMatrix mc = from_pairs(pairs, truth, meas);
  const ResponseMatrix exact = from_kernel(GaussianKernel<double>{sigma}, truth, meas, 256);

  Vector<double> per_column = Vector<double>::Zero(truth.nbins());
  for (const auto& p : pairs) per_column(*truth.find(p.x)) += 1.0;
  int violations = 0;
  for (Index j = 0; j < truth.nbins(); ++j) {
    for (Index i = 0; i < meas.nbins(); ++i) {
      const double p = exact.matrix()(i, j);
      const double se = std::sqrt(std::max(p * (1.0 - p), 1.0 / per_column(j)) / per_column(j));
      if (std::abs(mc.matrix()(i, j) - p) > 3.0 * se) ++violations;
    }
  }
  CHECK(violations == 0);
  const Vector<double> sums = mc.matrix().colwise().sum().transpose();
  CHECK((sums.array() <= 1.0).all());
}

TEST_CASE("response validation and k override") {
  const Axis two = Axis::uniform(0.0, 2.0, 2);
  Matrix<double> too_much(2, 2);
  too_much << 0.8, 0.0, 0.3, 1.0;
  CHECK_THROWS_AS(ResponseMatrix(two, two, too_much), ConstructionError);
  CHECK_THROWS_AS(ResponseMatrix(two, Axis::uniform(0.0, 3.0, 3), Matrix<double>::Identity(2, 2)),
                  DimensionError);

  const ResponseMatrix r = square(Matrix<double>::Identity(2, 2) * 0.5);
  CHECK(r.k_factor() == 0.25);
  CHECK(r.with_k_override(1.0).k_factor() == 1.0);
  CHECK_THROWS_AS(r.with_k_override(0.2), ConstructionError);

  Matrix<double> spiky = Matrix<double>::Zero(3, 3);
  spiky(0, 0) = 1.0;
  spiky(1, 1) = 1e-8;
  spiky(2, 2) = 1e-8;
  CHECK(square(spiky).peaked());
}

TEST_CASE("fold") {
  const Axis axis = Axis::uniform(0.0, 3.0, 3);
  Vector<double> c(3), e(3);
  c << 1.0, 2.0, 3.0;
  e << 0.1, 0.2, 0.3;
  const Histogram f(axis, c, e);
  const ResponseMatrix id(axis, axis, Matrix<double>::Identity(3, 3));
  const Histogram same = fold(id, f);
  CHECK(same.contents() == c);
  CHECK(same.stat_err() == e);

  std::mt19937_64 rng(8);
  const ResponseMatrix r(axis, Axis::uniform(0.0, 5.0, 5), testing::random_response(5, 3, rng));
  const Histogram g = fold(r, f);
  CHECK(std::abs(g.total() - f.total()) < 1e-12);
  // diagonal input covariance propagates to the explicit A C A^T diagonal
  const Matrix<double> cov = r.matrix() * f.covariance() * r.matrix().transpose();
  CHECK((g.stat_err() - cov.diagonal().cwiseSqrt()).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(fold(r, Histogram(Axis::uniform(0.0, 4.0, 3), c, e)), DimensionError);
}

TEST_CASE("fold is linear") {
  std::mt19937_64 rng(41);
  const Axis t = Axis::uniform(0.0, 1.0, 9);
  const Axis m = Axis::uniform(0.0, 1.0, 12);
  const ResponseMatrix r(t, m, testing::random_response(12, 9, rng, 0.9));
  for (int trial = 0; trial < 50; ++trial) {
    const Vector<double> f1 = testing::random_vector(9, rng), f2 = testing::random_vector(9, rng);
    const double alpha = testing::random_vector(1, rng, -2, 2)(0);
    const double beta = testing::random_vector(1, rng, -2, 2)(0);
    const auto h = [&](const Vector<double>& v) {
      return Histogram(t, v, Vector<double>::Zero(9), std::nullopt, HistogramKind::mass, true);
    };
    const Vector<double> lhs = fold(r, h(alpha * f1 + beta * f2)).contents();
    const Vector<double> rhs = alpha * fold(r, h(f1)).contents() + beta * fold(r, h(f2)).contents();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fold of a Cauchy mass vector matches a direct convolution sum") {
  const double sigma = 1.0, h = 0.2;
  const Index n = 100, q = 8;
  const Axis axis = Axis::uniform(-10.0, 10.0, n);
  const ResponseMatrix r = from_kernel(GaussianKernel<double>{sigma}, axis, axis, q);

  Vector<double> f(n);
  for (Index j = 0; j < n; ++j)
    f(j) = (std::atan(axis.upper(j)) - std::atan(axis.lower(j))) / std::numbers::pi;

  // translation invariance: the weight depends on the bin offset only
  std::vector<double> weight(2 * n - 1);
  for (Index d = -(n - 1); d <= n - 1; ++d) {
    double w = 0.0;
    for (Index p = 0; p < q; ++p) {
      const double x = (p + 0.5) * h / q;  // position inside the true bin
      w += (normal_cdf((d * h + h - x) / sigma) - normal_cdf((d * h - x) / sigma)) / q;
    }
    weight[static_cast<std::size_t>(d + n - 1)] = w;
  }
  Vector<double> expected = Vector<double>::Zero(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) expected(i) += weight[static_cast<std::size_t>(i - j + n - 1)] * f(j);

  const Histogram folded = fold(r, Histogram(axis, f, Vector<double>::Zero(n)));
  CHECK((folded.contents() - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("transpose_apply") {
  const Axis two = Axis::uniform(0.0, 2.0, 2);
  Vector<double> g(2);
  g << 3.0, 5.0;
  CHECK(transpose_apply(ResponseMatrix(two, two, Matrix<double>::Identity(2, 2)), g) == g);
  Matrix<double> swap(2, 2);
  swap << 0, 1, 1, 0;
  const Vector<double> back = transpose_apply(ResponseMatrix(two, two, swap), g);
  CHECK(back(0) == 5.0);
  CHECK(back(1) == 3.0);

  std::mt19937_64 rng(12);
  const Matrix<double> a = testing::random_response(5, 4, rng);
  const ResponseMatrix r(Axis::uniform(0.0, 4.0, 4), Axis::uniform(0.0, 5.0, 5), a);
  const Vector<double> v = testing::random_vector(5, rng);
  Vector<double> oracle = Vector<double>::Zero(4);
  for (Index j = 0; j < 4; ++j)
    for (Index i = 0; i < 5; ++i) oracle(j) += a(i, j) * v(i);
  CHECK((transpose_apply(r, v) - oracle).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(transpose_apply(r, Vector<double>::Zero(4)), DimensionError);
}
