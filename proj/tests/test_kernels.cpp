#include "doctest.h"

#include "vmem/kernels/kernels.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace vmem::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

std::vector<Isa> available() {
    std::vector<Isa> out{Isa::scalar};
    if (isa_supported(Isa::avx2)) out.push_back(Isa::avx2);
    return out;
}

}  // namespace

TEST_CASE("scalar table is always available") {
    CHECK(isa_supported(Isa::scalar));
    CHECK(table(Isa::scalar).isa == Isa::scalar);
    CHECK(isa_name(Isa::scalar) == "scalar");
}

TEST_CASE("recursion step agrees bit-for-bit across tables") {
    std::mt19937_64 rng(1);
    // Sizes straddle the vector width and its remainders.
    for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 29u}) {
        const auto omega = random_vector(n, rng), alpha = random_vector(n, rng, 0, 0.2),
                   beta = random_vector(n, rng, 0.5, 0.9), theta = random_vector(n, rng, 0.5, 1.5),
                   x = random_vector(n, rng);
        const auto nu0 = random_vector(n, rng), vs0 = random_vector(n, rng);
        std::vector<std::vector<double>> results;
        for (Isa isa : available()) {
            auto nu = nu0, vs = vs0;
            std::vector<double> ln_mu(n);
            RecursionStep step{n, omega.data(), alpha.data(), beta.data(), theta.data(), 0.37,
                               x.data(), nu.data(), vs.data(), ln_mu.data()};
            table(isa).recursion_step(step);
            std::vector<double> all = nu;
            all.insert(all.end(), vs.begin(), vs.end());
            all.insert(all.end(), ln_mu.begin(), ln_mu.end());
            results.push_back(all);
        }
        for (const auto& r : results) CHECK(r == results.front());
        // Reference values from the definition.
        for (std::size_t i = 0; i < n; ++i) {
            const double vs = omega[i] + alpha[i] * nu0[i] + beta[i] * vs0[i];
            CHECK(results.front()[n + i] == doctest::Approx(vs).epsilon(1e-15));
            CHECK(results.front()[2 * n + i] == doctest::Approx(vs + theta[i] * 0.37).epsilon(1e-15));
            CHECK(results.front()[i] == doctest::Approx(x[i] - theta[i] * 0.37).epsilon(1e-15));
        }
    }
}

TEST_CASE("projection and whitened norms agree bit-for-bit across tables") {
    std::mt19937_64 rng(2);
    for (std::size_t n : {2u, 4u, 7u, 13u}) {
        const std::size_t rows = 37, ld = rows + 3;
        const auto x = random_vector(ld * n, rng), center = random_vector(n, rng), weights = random_vector(n, rng);
        std::vector<double> lower(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) lower[i * n + j] = random_vector(1, rng)[0] + (i == j ? 2.0 : 0.0);

        std::vector<std::vector<double>> proj, norms;
        for (Isa isa : available()) {
            std::vector<double> p(rows), q(rows);
            table(isa).centered_projection(rows, n, x.data(), ld, center.data(), weights.data(), p.data());
            table(isa).whitened_sq_norms(rows, n, lower.data(), x.data(), ld, q.data());
            proj.push_back(p);
            norms.push_back(q);
        }
        for (const auto& p : proj) CHECK(p == proj.front());
        for (const auto& q : norms) CHECK(q == norms.front());
        for (std::size_t t = 0; t < rows; ++t) {
            double ref = 0.0, norm = 0.0;
            for (std::size_t j = 0; j < n; ++j) ref += weights[j] * (x[t + j * ld] - center[j]);
            for (std::size_t i = 0; i < n; ++i) {
                double w = 0.0;
                for (std::size_t j = 0; j <= i; ++j) w += lower[i * n + j] * x[t + j * ld];
                norm += w * w;
            }
            CHECK(proj.front()[t] == doctest::Approx(ref).epsilon(1e-13));
            CHECK(norms.front()[t] == doctest::Approx(norm).epsilon(1e-13));
        }
    }
}

TEST_CASE("reductions agree to rounding across tables") {
    std::mt19937_64 rng(3);
    for (std::size_t len : {1u, 5u, 16u, 1001u}) {
        const auto a = random_vector(len, rng), b = random_vector(len, rng, 0.5, 2.0);
        double ssd = 0.0, ratio = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            ssd += (a[k] - b[k]) * (a[k] - b[k]);
            ratio += a[k] / b[k];
        }
        for (Isa isa : available()) {
            CHECK(table(isa).sum_sq_diff(len, a.data(), b.data()) == doctest::Approx(ssd).epsilon(1e-12));
            CHECK(table(isa).sum_ratio(len, a.data(), b.data()) == doctest::Approx(ratio).epsilon(1e-12));
        }
    }
}

TEST_CASE("runtime selection can be overridden") {
    const Isa before = active().isa;
    select(Isa::scalar);
    CHECK(active().isa == Isa::scalar);
    select(before);
    CHECK(active().isa == before);
}
