#include <catch2/catch_amalgamated.hpp>

#include "bfp/matrix.hpp"
#include "bfp/rng.hpp"
#include "bfp/svd.hpp"

using namespace bfp;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.normal();
  return m;
}

double ortho_residual(const Matrix& u) {
  Matrix utu = matmul_at_b(u, u);
  for (std::size_t i = 0; i < utu.rows; ++i) utu(i, i) -= 1.0;
  return max_abs(utu);
}

}  // namespace

TEST_CASE("frobenius norm basics", "[linalg]") {
  CHECK(frobenius_norm(Matrix(3, 4)) == 0.0);
  CHECK(frobenius_norm(Matrix::identity(2)) == Catch::Approx(std::sqrt(2.0)));
  CHECK(frobenius_norm(Matrix::from_rows({{3.0, 4.0}})) == Catch::Approx(5.0));
  Matrix bad(1, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(frobenius_norm(bad), InvalidInput);
}

TEST_CASE("svd of identity and diagonal matrices", "[linalg]") {
  SvdResult id = svd_thin(Matrix::identity(3));
  REQUIRE(id.S.size() == 3);
  for (double s : id.S) CHECK(s == Catch::Approx(1.0).margin(1e-12));
  CHECK(ortho_residual(id.U) < 1e-12);

  Matrix diag(3, 3);
  diag(0, 0) = 3.0;
  diag(1, 1) = 2.0;
  diag(2, 2) = 1.0;
  SvdResult d = svd_thin(diag);
  CHECK(d.S[0] == Catch::Approx(3.0));
  CHECK(d.S[1] == Catch::Approx(2.0));
  CHECK(d.S[2] == Catch::Approx(1.0));
}

TEST_CASE("svd reconstructs random rectangular matrices", "[linalg]") {
  Rng rng(7);
  Matrix z = random_matrix(5, 8, rng);
  SvdResult r = svd_thin(z);
  REQUIRE(r.S.size() == 5);
  const Matrix back = svd_reconstruct(r);
  CHECK(frobenius_norm(back - z) / frobenius_norm(z) < 1e-10);
  CHECK(ortho_residual(r.U) < 1e-8);
  CHECK(ortho_residual(r.V) < 1e-8);
  for (std::size_t i = 0; i + 1 < r.S.size(); ++i) CHECK(r.S[i] >= r.S[i + 1]);
}

TEST_CASE("svd energy identity and determinism across shapes", "[linalg]") {
  Rng rng(21);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t rows = 1 + static_cast<std::size_t>(rng.below(9));
    const std::size_t cols = 1 + static_cast<std::size_t>(rng.below(9));
    Matrix z = random_matrix(rows, cols, rng);
    SvdResult r = svd_thin(z);
    double energy = 0.0;
    for (double s : r.S) energy += s * s;
    const double fro = frobenius_norm(z);
    CHECK(energy == Catch::Approx(fro * fro).epsilon(1e-8));
    CHECK(ortho_residual(r.U) < 1e-8);

    SvdResult again = svd_thin(z);
    CHECK(std::equal(r.U.data.begin(), r.U.data.end(), again.U.data.begin()));
    CHECK(std::equal(r.S.begin(), r.S.end(), again.S.begin()));
  }
}

TEST_CASE("svd handles rank-deficient input with a completed basis", "[linalg]") {
  Matrix z(4, 3);  // rank 1
  for (std::size_t j = 0; j < 3; ++j) z(1, j) = 2.0 * static_cast<double>(j + 1);
  SvdResult r = svd_thin(z);
  CHECK(r.S[0] > 0.0);
  CHECK(r.S[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(ortho_residual(r.U) < 1e-8);
  const Matrix back = svd_reconstruct(r);
  CHECK(frobenius_norm(back - z) / frobenius_norm(z) < 1e-10);
}

TEST_CASE("svd rejects non-finite input", "[linalg]") {
  Matrix z(2, 2);
  z(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(svd_thin(z), InvalidInput);
}

TEST_CASE("svd_solve recovers exact linear maps", "[linalg]") {
  Rng rng(3);
  Matrix a = random_matrix(6, 3, rng);
  Matrix x_true = random_matrix(3, 2, rng);
  Matrix b = matmul(a, x_true);
  Matrix x = svd_solve(a, b);
  CHECK(frobenius_norm(x - x_true) < 1e-9);
}
