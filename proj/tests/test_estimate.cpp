#include "doctest.h"

#include "vmem/error.hpp"
#include "vmem/estimate.hpp"

#include <cmath>
#include <random>

using namespace vmem;

namespace {

std::vector<std::string> names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("S" + std::to_string(i + 1));
    return out;
}

Matrix equicorrelated(std::size_t n, double var, double cov) {
    Matrix V = Matrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), cov);
    V.diagonal().setConstant(var);
    return V;
}

ParamSet scalar_truth(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    ParamSet p;
    p.alpha = Vector::Constant(k, 0.10);
    p.beta = Vector::Constant(k, 0.85);
    p.theta = Vector::Ones(k);
    p.c = Vector::Constant(k, 1.0 / std::sqrt(static_cast<double>(n)));
    p.set_covariance(equicorrelated(n, 0.35, 0.15));
    p.x_bar = Vector::Constant(k, 0.2);
    return p;
}

PcFactor factor_for(const VolatilityPanel& panel) { return first_principal_component(panel); }

}  // namespace

TEST_CASE("sandwich covariance on an exactly quadratic objective") {
    // l_t(theta) = -1/2 sum_k a_k (theta_k - z_tk)^2 + b theta_0 theta_1 (z_t0)
    const int T = 200;
    std::mt19937_64 rng(41);
    std::normal_distribution<double> z;
    Matrix Z(T, 2);
    for (int t = 0; t < T; ++t) Z.row(t) << z(rng), 0.5 * z(rng);
    const double a0 = 2.0, a1 = 0.5, b = 0.3;
    const PerObservation per_obs = [&](std::span<const double> th) {
        Vector out(T);
        for (int t = 0; t < T; ++t)
            out(t) = -0.5 * a0 * (th[0] - Z(t, 0)) * (th[0] - Z(t, 0)) - 0.5 * a1 * (th[1] - Z(t, 1)) * (th[1] - Z(t, 1)) +
                     b * th[0] * th[1] / T;
        return out;
    };
    const std::vector<double> theta{0.1, -0.2};
    const auto res = sandwich_covariance(per_obs, theta);

    Eigen::Matrix2d H;
    H << T * a0, -b, -b, T * a1;
    Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
    for (int t = 0; t < T; ++t) {
        Eigen::Vector2d s;
        s << -a0 * (theta[0] - Z(t, 0)) + b * theta[1] / T, -a1 * (theta[1] - Z(t, 1)) + b * theta[0] / T;
        S += s * s.transpose();
    }
    const Eigen::Matrix2d Hi = H.inverse();
    const Eigen::Matrix2d C = Hi * S * Hi;
    for (int k = 0; k < 2; ++k) {
        CHECK(res.std_errors[static_cast<std::size_t>(k)] == doctest::Approx(std::sqrt(C(k, k))).epsilon(1e-6));
        CHECK(res.hessian_std_errors[static_cast<std::size_t>(k)] == doctest::Approx(std::sqrt(Hi(k, k))).epsilon(1e-6));
    }
    CHECK((res.hessian - H).cwiseAbs().maxCoeff() < 1e-5 * T);
}

TEST_CASE("sandwich covariance reports a singular Hessian") {
    const PerObservation flat = [](std::span<const double> th) {
        Vector out(10);
        out.setConstant(-th[0] * th[0]);
        return out;
    };
    CHECK_THROWS_AS(sandwich_covariance(flat, std::vector<double>{0.3, 1.0}), EstimationError);
}

TEST_CASE("sample covariance divides by the number of rows") {
    Matrix v(4, 2);
    v << 1, 2, 3, 2, 5, 6, 7, 6;
    const Matrix c = sample_covariance(v);
    CHECK(c(0, 0) == doctest::Approx(5.0));
    CHECK(c(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("fit options validation") {
    FitOptions o;
    o.outer_tolerance = 0.0;
    CHECK_THROWS(o.validate());
    o = {};
    o.max_outer_iterations = 0;
    CHECK_THROWS(o.validate());
}

TEST_CASE("scalar vMEM recovery and result invariants") {
    const std::size_t n = 3;
    const auto spec = ModelSpec::make(Variant::vmem, Parameterization::scalar, names(n));
    const ParamSet truth = scalar_truth(n);
    const auto panel = simulate(spec, truth, 3000, 51).panel;
    const auto factor = factor_for(panel);
    const auto result = fit(panel, factor, spec);

    CHECK(result.converged);
    CHECK(result.n_free == count_parameters(spec));
    CHECK(result.names == std::vector<std::string>{"alpha[1]", "beta[1]"});
    REQUIRE(result.std_errors.size() == 2);
    CHECK(std::abs(result.estimates[0] - 0.10) < 3 * result.std_errors[0]);
    CHECK(std::abs(result.estimates[1] - 0.85) < 3 * result.std_errors[1]);
    for (std::size_t k = 1; k < result.loglik_trace.size(); ++k)
        CHECK(result.loglik_trace[k] >= result.loglik_trace[k - 1] - 1e-6);
    CHECK(std::abs(result.final_change) < 1e-4);

    // Stored log-likelihood matches a recomputation.
    auto out = filter(panel, factor, spec, result.params);
    CHECK(log_likelihood(panel, out, result.params) == doctest::Approx(result.loglik).epsilon(1e-10));
    CHECK((result.params.m + 0.5 * result.params.V.diagonal()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sandwich and inverse-Hessian errors agree under correct specification") {
    const std::size_t n = 2;
    const auto spec = ModelSpec::make(Variant::vmem, Parameterization::scalar, names(n));
    const auto panel = simulate(spec, scalar_truth(n), 5000, 52).panel;
    const auto factor = factor_for(panel);
    FitOptions o;
    o.std_errors = false;
    const auto result = fit(panel, factor, spec, o);

    const FreeLayout layout(spec);
    const PerObservation per_obs = [&](std::span<const double> free) {
        ParamSet p = result.params;
        layout.expand(free, p);
        auto out = filter(panel, factor, spec, p);
        log_likelihood(panel, out, p);
        return Vector(out.per_obs_loglik);
    };
    const auto res = sandwich_covariance(per_obs, result.estimates);
    for (std::size_t k = 0; k < 2; ++k) {
        const double ratio = res.std_errors[k] / res.hessian_std_errors[k];
        CHECK(ratio > 0.75);
        CHECK(ratio < 1.25);
    }
    const auto direct = sandwich_std_errors(panel, factor, spec, result.params);
    for (std::size_t k = 0; k < 2; ++k) CHECK(direct[k] == doctest::Approx(res.std_errors[k]).epsilon(1e-8));
}

TEST_CASE("vMEM-SeC with delta and phi held at zero matches the vMEM fit") {
    const std::size_t n = 3;
    const auto panel = simulate(ModelSpec::make(Variant::vmem, Parameterization::scalar, names(n)), scalar_truth(n), 2000, 53).panel;
    const auto factor = factor_for(panel);
    FitOptions o;
    o.std_errors = false;
    const auto classical = fit(panel, factor, ModelSpec::make(Variant::vmem, Parameterization::scalar, names(n)), o);
    o.fixed = {{"delta", 0.0}, {"phi", 0.0}};
    const auto restricted = fit(panel, factor, ModelSpec::make(Variant::vmem_sec, Parameterization::scalar, names(n)), o);
    CHECK(restricted.loglik == doctest::Approx(classical.loglik).epsilon(1e-7));
    CHECK(restricted.params.delta == 0.0);
    CHECK(restricted.params.phi == 0.0);
    CHECK(restricted.n_free == 2);
    CHECK(restricted.estimates[0] == doctest::Approx(classical.estimates[0]).epsilon(1e-3));

    o.fixed = {{"gamma", 0.0}};
    CHECK_THROWS_AS(fit(panel, factor, ModelSpec::make(Variant::vmem_sec, Parameterization::scalar, names(n)), o), Error);
}

TEST_CASE("estimates do not depend on group labels") {
    const std::size_t n = 4;
    const auto panel = simulate(ModelSpec::make(Variant::vmem, Parameterization::scalar, names(n)), scalar_truth(n), 1500, 54).panel;
    const auto factor = factor_for(panel);
    FitOptions o;
    o.std_errors = false;
    const auto a = fit(panel, factor, ModelSpec::clustered(Variant::vmem, names(n), {1, 1, 2, 2}), o);
    const auto b = fit(panel, factor, ModelSpec::clustered(Variant::vmem, names(n), {2, 2, 1, 1}), o);
    CHECK(a.loglik == doctest::Approx(b.loglik).epsilon(1e-9));
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(a.params.alpha(i) == doctest::Approx(b.params.alpha(i)).epsilon(1e-3));
        CHECK(a.params.beta(i) == doctest::Approx(b.params.beta(i)).epsilon(1e-3));
    }
}

TEST_CASE("fit rejects a training window that is too short") {
    const std::size_t n = 3;
    const auto panel = simulate(ModelSpec::make(Variant::vmem, Parameterization::scalar, names(n)), scalar_truth(n), 30, 55).panel;
    CHECK_THROWS_AS(fit(panel, factor_for(panel), ModelSpec::make(Variant::vmem_sec, Parameterization::diagonal, names(n))), Error);
}

TEST_CASE("univariate fits") {
    SUBCASE("zero variance series") {
        try {
            fit_univariate_mem_sec(Vector::Constant(100, 0.3), Vector::Zero(100));
            FAIL("expected an estimation error");
        } catch (const EstimationError& e) {
            CHECK(std::string(e.what()).find("degenerate series") != std::string::npos);
        }
    }
    SUBCASE("no common component reduces to the univariate log-MEM") {
        const auto spec = ModelSpec::make(Variant::vmem, Parameterization::scalar, names(1));
        ParamSet p = scalar_truth(1);
        const auto panel = simulate(spec, p, 4000, 56).panel;
        const Vector x = panel.x().col(0);
        const auto u = fit_univariate_mem_sec(x, Vector::Zero(x.size()));
        CHECK_FALSE(u.theta_identified);
        REQUIRE(u.std_errors.size() == 2);
        CHECK(std::abs(u.alpha - 0.10) < 3 * u.std_errors[0]);
        CHECK(std::abs(u.beta - 0.85) < 3 * u.std_errors[1]);
    }
    SUBCASE("loading recovery with a known common component") {
        const auto spec = ModelSpec::make(Variant::vmem_sec, Parameterization::diagonal, names(2));
        ParamSet p = scalar_truth(2);
        p.theta << 1.2, 0.8;
        p.delta = 0.04;
        p.phi = 0.6;
        const auto path = simulate(spec, p, 4000, 57);
        const Vector x = path.panel.x().col(0);
        const auto u = fit_univariate_mem_sec(x, path.xi);
        CHECK(u.theta_identified);
        REQUIRE(u.std_errors.size() == 3);
        CHECK(std::abs(u.theta - 1.2) < 3 * u.std_errors[2]);
        CHECK(std::abs(u.alpha - 0.10) < 3 * u.std_errors[0]);
        CHECK(std::abs(u.beta - 0.85) < 3 * u.std_errors[1]);
    }
}
