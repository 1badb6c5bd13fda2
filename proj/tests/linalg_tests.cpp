#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ccsim;
using ccsim::testing::random_spd;

TEST_CASE("sparse factorization solves SPD systems") {
  SECTION("identity") {
    SpMat I(4, 4);
    I.setIdentity();
    Vec b(4);
    b << 1, 2, 3, 4;
    REQUIRE((factorize(I).solve(b) - b).norm() == 0.0);
  }

  SECTION("hand-checked 2x2") {
    Mat A(2, 2);
    A << 2, 1, 1, 2;
    Vec b(2);
    b << 3, 3;
    const Vec x = factorize(to_sparse(A)).solve(b);
    REQUIRE(x[0] == Catch::Approx(1.0));
    REQUIRE(x[1] == Catch::Approx(1.0));
  }

  SECTION("random 50x50 SPD residual") {
    Rng rng(11);
    const Mat A = random_spd(50, rng);
    Vec b(50);
    for (int i = 0; i < 50; ++i) b[i] = ccsim::testing::urand(rng);
    const Vec x = factorize(to_sparse(A)).solve(b);
    REQUIRE((A * x - b).norm() < 1e-10 * b.norm());
  }

  SECTION("indefinite input is rejected") {
    Mat A(2, 2);
    A << 1, 0, 0, -1;
    REQUIRE_THROWS_AS(factorize(to_sparse(A)), SolveError);
  }

  SECTION("non-square input is rejected") {
    SpMat A(2, 3);
    REQUIRE_THROWS_AS(factorize(A), SolveError);
  }
}

TEST_CASE("row/column deletion") {
  SECTION("removing nothing returns the same matrix") {
    Rng rng(3);
    const Mat A = random_spd(5, rng);
    const Submatrix sub = delete_rowcol(to_sparse(A), std::vector<Eigen::Index>{});
    REQUIRE(Mat(sub.matrix) == A);
    REQUIRE(sub.new_to_old.size() == 5);
  }

  SECTION("removing the middle of a 3x3 keeps the corners") {
    Mat A(3, 3);
    A << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    const std::vector<Eigen::Index> drop = {1};
    const Submatrix sub = delete_rowcol(to_sparse(A), drop);
    Mat want(2, 2);
    want << 1, 3, 7, 9;
    REQUIRE(Mat(sub.matrix) == want);
    REQUIRE(sub.new_to_old == std::vector<Eigen::Index>{0, 2});
    REQUIRE(sub.old_to_new == std::vector<Eigen::Index>{0, -1, 1});
  }

  SECTION("a principal submatrix of an SPD matrix stays SPD") {
    Rng rng(17);
    const Mat A = random_spd(12, rng);
    const std::vector<Eigen::Index> drop = {2, 3, 9};
    const Submatrix sub = delete_rowcol(to_sparse(A), drop);
    Eigen::SelfAdjointEigenSolver<Mat> eig{Mat(sub.matrix)};
    REQUIRE(eig.eigenvalues().minCoeff() > 0.0);
  }

  SECTION("out-of-range indices are rejected") {
    SpMat A(3, 3);
    A.setIdentity();
    const std::vector<Eigen::Index> drop = {5};
    REQUIRE_THROWS_AS(delete_rowcol(A, drop), ConfigError);
  }
}

TEST_CASE("small dense solves") {
  SECTION("identity and diagonal") {
    Vec b(3);
    b << 4, 9, 16;
    REQUIRE(Vec(small_solve(Mat::Identity(3, 3), b)) == b);
    Vec d(3);
    d << 1, 2, 3;
    const Vec x = small_solve(Mat(d.asDiagonal()), b);
    REQUIRE(x[0] == Catch::Approx(4.0));
    REQUIRE(x[1] == Catch::Approx(4.5));
    REQUIRE(x[2] == Catch::Approx(16.0 / 3.0));
  }

  SECTION("random well-conditioned blocks solve to near machine precision") {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::Index d = 1 + static_cast<Eigen::Index>(trial % 3);
      const Mat A = random_spd(d, rng);
      Vec b(d);
      for (Eigen::Index i = 0; i < d; ++i) b[i] = ccsim::testing::urand(rng);
      const Vec x = small_solve(A, b);
      REQUIRE((A * x - b).norm() < 1e-12 * std::max(1.0, b.norm()));
    }
  }

  SECTION("singular and oversized blocks are rejected") {
    REQUIRE_THROWS_AS(small_solve(Mat::Zero(2, 2), Vec(Vec::Zero(2))), SolveError);
    REQUIRE_THROWS_AS(small_solve(Mat::Identity(4, 4), Vec(Vec::Zero(4))), ConfigError);
    REQUIRE_THROWS_AS(small_solve(Mat::Identity(2, 2), Vec(Vec::Zero(3))), ConfigError);
  }
}

TEST_CASE("symmetry probe and sparse conversion") {
  Mat A(2, 2);
  A << 1, 2, 2, 1;
  REQUIRE(is_symmetric(to_sparse(A)));
  A(0, 1) = 3;
  REQUIRE_FALSE(is_symmetric(to_sparse(A)));
  REQUIRE(Mat(to_sparse(A)) == A);
}
