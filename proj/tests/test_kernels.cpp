#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "ari/kernels.hpp"
#include "ari/rng.hpp"

using namespace ari;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

TEST_CASE("scalar dot/axpy/sum basics") {
    const double a[] = {1.0, 2.0, 3.0};
    const double b[] = {4.0, -5.0, 6.0};
    CHECK(kernels::scalar::dot(a, b, 3) == doctest::Approx(4.0 - 10.0 + 18.0));
    CHECK(kernels::scalar::sum(a, 3) == doctest::Approx(6.0));
    double y[] = {1.0, 1.0, 1.0};
    kernels::scalar::axpy(2.0, a, y, 3);
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[2] == doctest::Approx(7.0));
}

#if defined(ARI_HAVE_AVX2_TU)
TEST_CASE("avx2 kernels match scalar reference") {
    if (!kernels::avx2_supported()) return;  // nothing to compare on this host
    Rng rng(42);
    // odd lengths exercise the tail loops
    for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 15u, 16u, 17u, 64u, 257u, 1031u}) {
        std::vector<double> a = random_vec(rng, n);
        std::vector<double> b = random_vec(rng, n);
        CHECK(close_rel(kernels::avx2::dot(a.data(), b.data(), n),
                        kernels::scalar::dot(a.data(), b.data(), n), 1e-12));
        CHECK(close_rel(kernels::avx2::sum(a.data(), n),
                        kernels::scalar::sum(a.data(), n), 1e-12));
        std::vector<double> y1 = b;
        std::vector<double> y2 = b;
        kernels::avx2::axpy(0.37, a.data(), y1.data(), n);
        kernels::scalar::axpy(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(close_rel(y1[i], y2[i], 1e-13));
        std::vector<double> s1 = a;
        std::vector<double> s2 = a;
        kernels::avx2::scale(s1.data(), n, -1.75);
        kernels::scalar::scale(s2.data(), n, -1.75);
        for (std::size_t i = 0; i < n; ++i) CHECK(s1[i] == s2[i]);
    }
}
#endif

TEST_CASE("dispatched matvec agrees with naive loops") {
    Rng rng(7);
    const std::size_t rows = 13;
    const std::size_t cols = 29;
    std::vector<double> a = random_vec(rng, rows * cols);
    std::vector<double> x = random_vec(rng, cols);
    std::vector<double> xt = random_vec(rng, rows);
    std::vector<double> y(rows);
    kernels::matvec(a.data(), rows, cols, x.data(), y.data());
    for (std::size_t r = 0; r < rows; ++r) {
        double want = 0.0;
        for (std::size_t c = 0; c < cols; ++c) want += a[r * cols + c] * x[c];
        CHECK(close_rel(y[r], want, 1e-12));
    }
    std::vector<double> yt(cols);
    kernels::matvec_t(a.data(), rows, cols, xt.data(), yt.data());
    for (std::size_t c = 0; c < cols; ++c) {
        double want = 0.0;
        for (std::size_t r = 0; r < rows; ++r) want += a[r * cols + c] * xt[r];
        CHECK(close_rel(yt[c], want, 1e-12));
    }
}

TEST_CASE("norm2 is sqrt of self-dot") {
    Rng rng(3);
    std::vector<double> v = random_vec(rng, 100);
    CHECK(kernels::norm2(v.data(), v.size()) ==
          doctest::Approx(std::sqrt(kernels::dot(v.data(), v.data(), v.size()))));
}

TEST_CASE("backend reporting is consistent") {
    const kernels::Backend b = kernels::active_backend();
    if (b == kernels::Backend::Avx2) {
        CHECK(kernels::avx2_compiled());
        CHECK(kernels::avx2_supported());
    }
    CHECK((std::string(kernels::backend_name(b)) == "avx2" ||
           std::string(kernels::backend_name(b)) == "scalar"));
}
