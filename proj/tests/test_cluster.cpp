#include "doctest.h"

#include "vmem/cluster.hpp"
#include "vmem/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace vmem;

namespace {

std::vector<std::string> names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("S" + std::to_string(i + 1));
    return out;
}

double truncated_distance(double a1, double b1, double a2, double b2, int J = 10000) {
    double s = 0.0;
    for (int j = 1; j <= J; ++j) {
        const double p1 = (a1 + b1) * std::pow(b1, j - 1) - std::pow(b1, j);
        const double p2 = (a2 + b2) * std::pow(b2, j - 1) - std::pow(b2, j);
        s += (p1 - p2) * (p1 - p2);
    }
    return std::sqrt(s);
}

Partition make_partition(std::vector<int> groups) {
    return Partition{names(groups.size()), std::move(groups)};
}

/// Naive average linkage over explicit member lists.
std::vector<double> brute_force_heights(const Matrix& D) {
    std::vector<std::vector<int>> clusters;
    for (int i = 0; i < D.rows(); ++i) clusters.push_back({i});
    std::vector<double> heights;
    while (clusters.size() > 1) {
        double best = 1e300;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < clusters.size(); ++i)
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                double s = 0.0;
                for (int a : clusters[i])
                    for (int b : clusters[j]) s += D(a, b);
                s /= static_cast<double>(clusters[i].size() * clusters[j].size());
                if (s < best) {
                    best = s;
                    bi = i;
                    bj = j;
                }
            }
        heights.push_back(best);
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return heights;
}

Matrix random_points_distance(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::pair<double, double>> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng)};
    Matrix D(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
    return D;
}

}  // namespace

TEST_CASE("ARMA distance examples") {
    CHECK(arma_distance(0.1, 0.8, 0.1, 0.8) == 0.0);
    CHECK(arma_distance(0.3, 0.0, 0.1, 0.0) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(std::abs(arma_distance(0.1, 0.8, 0.2, 0.7) - 0.1236935) < 1e-6);
    CHECK(std::abs(arma_distance(0.1, 0.8, 0.2, 0.7) - truncated_distance(0.1, 0.8, 0.2, 0.7)) < 1e-10);
    CHECK_THROWS_AS(arma_distance(0.1, 1.0, 0.1, 0.5), DomainError);
    CHECK_THROWS_AS(arma_distance_generic(0.5, -1.2, 0.5, 0.1), DomainError);
}

TEST_CASE("generic ARMA distance equals the MEM form and the truncated sum") {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> a(0.0, 0.3), b(-0.95, 0.95), phi(-0.9, 0.9);
    for (int rep = 0; rep < 100; ++rep) {
        const double a1 = a(rng), b1 = b(rng), a2 = a(rng), b2 = b(rng);
        CHECK(arma_distance_generic(a1 + b1, b1, a2 + b2, b2) == doctest::Approx(arma_distance(a1, b1, a2, b2)).epsilon(1e-12));
        const double p1 = phi(rng), p2 = phi(rng);
        double s = 0.0;
        for (int j = 1; j <= 10000; ++j) {
            const double d = (p1 * std::pow(b1, j - 1) - std::pow(b1, j)) - (p2 * std::pow(b2, j - 1) - std::pow(b2, j));
            s += d * d;
        }
        CHECK(std::abs(arma_distance_generic(p1, b1, p2, b2) - std::sqrt(s)) < 1e-8);
    }
}

TEST_CASE("ARMA distance metric axioms") {
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<double> a(0.0, 0.3), b(-0.95, 0.95);
    for (int rep = 0; rep < 300; ++rep) {
        const double a1 = a(rng), b1 = b(rng), a2 = a(rng), b2 = b(rng), a3 = a(rng), b3 = b(rng);
        const double d12 = arma_distance(a1, b1, a2, b2), d21 = arma_distance(a2, b2, a1, b1);
        const double d13 = arma_distance(a1, b1, a3, b3), d23 = arma_distance(a2, b2, a3, b3);
        CHECK(d12 >= 0.0);
        CHECK(std::abs(d12 - d21) < 1e-12);
        CHECK(arma_distance(a1, b1, a1, b1) < 1e-12);
        CHECK(d13 <= d12 + d23 + 1e-9);
    }
}

TEST_CASE("theta distance") {
    CHECK(theta_distance(1.0, 1.0) == 0.0);
    CHECK(theta_distance(0.884, 1.076) == doctest::Approx(0.192).epsilon(1e-12));
    CHECK(theta_distance(0.3, -0.4) == theta_distance(-0.4, 0.3));
}

TEST_CASE("embedding Gram matrix matches the series of derivative products") {
    for (auto [alpha, beta] : {std::pair{0.1, 0.8}, std::pair{0.2, -0.5}, std::pair{0.05, 0.95}}) {
        Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
        for (int j = 1; j <= 20000; ++j) {
            Eigen::Vector2d d;
            d << std::pow(beta, j - 1), alpha * (j - 1) * (j >= 2 ? std::pow(beta, j - 2) : 0.0);
            g += d * d.transpose();
        }
        const Eigen::Matrix2d closed = arma_embedding_gram(alpha, beta);
        CHECK((closed - g).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, g.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("average linkage matches a brute-force oracle") {
    std::mt19937_64 rng(63);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 3 + static_cast<std::size_t>(rep % 9);
        const Matrix D = random_points_distance(n, rng);
        const auto result = hierarchical_cluster(D, names(n));
        const auto oracle = brute_force_heights(D);
        REQUIRE(result.dendrogram.merges.size() == n - 1);
        for (std::size_t k = 0; k < n - 1; ++k) {
            CHECK(result.dendrogram.merges[k].height == doctest::Approx(oracle[k]).epsilon(1e-12));
            if (k) CHECK(result.dendrogram.merges[k].height >= result.dendrogram.merges[k - 1].height - 1e-12);
        }
        CHECK(result.dendrogram.merges.back().size == n);

        // Fixed-k partitions do not change when distances are rescaled.
        const int k = 1 + rep % static_cast<int>(n);
        const auto a = hierarchical_cluster(D, names(n), Selection::fixed(k)).partition;
        const auto b = hierarchical_cluster(D * 17.5, names(n), Selection::fixed(k)).partition;
        CHECK(a.groups == b.groups);
        CHECK(a.k() == k);
    }
}

TEST_CASE("automatic cluster count") {
    SUBCASE("all distances zero") {
        const auto r = hierarchical_cluster(Matrix::Zero(5, 5), names(5));
        CHECK(r.partition.k() == 1);
    }
    SUBCASE("two tight blobs far apart") {
        std::mt19937_64 rng(64);
        std::uniform_real_distribution<double> u(0.0, 0.005);
        const std::vector<int> truth{1, 2, 1, 1, 2, 2, 1};
        std::vector<double> pos;
        for (int g : truth) pos.push_back((g == 1 ? 0.0 : 5.0) + u(rng));
        Matrix D(7, 7);
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j) D(i, j) = std::abs(pos[static_cast<std::size_t>(i)] - pos[static_cast<std::size_t>(j)]);
        const auto r = hierarchical_cluster(D, names(7));
        CHECK(r.partition.k() == 2);
        CHECK(adjusted_rand_index(r.partition, make_partition(truth)) == doctest::Approx(1.0));
    }
    SUBCASE("merge floor forces a single cluster") {
        Matrix D(3, 3);
        D << 0, 0.1, 0.5, 0.1, 0, 0.5, 0.5, 0.5, 0;
        CHECK(hierarchical_cluster(D, names(3)).partition.k() == 2);
        CHECK(hierarchical_cluster(D, names(3), Selection::automatic_gap(0.6)).partition.k() == 1);
    }
    SUBCASE("invalid inputs") {
        CHECK_THROWS_AS(hierarchical_cluster(Matrix::Zero(1, 1), names(1)), Error);
        Matrix D(2, 2);
        D << 0, 1, 2, 0;
        CHECK_THROWS_AS(hierarchical_cluster(D, names(2)), Error);
    }
}

TEST_CASE("adjusted Rand index") {
    CHECK(adjusted_rand_index(make_partition({1, 1, 2, 2}), make_partition({1, 1, 2, 2})) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index(make_partition({1, 1, 2, 2}), make_partition({1, 2, 1, 2})) == -0.5);
    CHECK(adjusted_rand_index(make_partition({1, 1, 2, 2, 3}), make_partition({2, 2, 3, 3, 1})) == doctest::Approx(1.0));

    std::mt19937_64 rng(65);
    std::uniform_int_distribution<int> g(1, 3);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<int> a(8), b(8);
        for (auto& v : a) v = g(rng);
        for (auto& v : b) v = g(rng);
        std::vector<int> relabeled = b;
        for (auto& v : relabeled) v = 4 - v;
        CHECK(adjusted_rand_index(make_partition(a), make_partition(b)) ==
              doctest::Approx(adjusted_rand_index(make_partition(a), make_partition(relabeled))).epsilon(1e-12));
    }
    Partition other{{"X", "Y", "Z", "W"}, {1, 1, 2, 2}};
    CHECK_THROWS_AS(adjusted_rand_index(make_partition({1, 1, 2, 2}), other), Error);
}

TEST_CASE("cut_tree numbers groups by first appearance") {
    Matrix D(4, 4);
    D << 0, 5, 1, 5, 5, 0, 5, 1, 1, 5, 0, 5, 5, 1, 5, 0;
    const auto r = hierarchical_cluster(D, names(4), Selection::fixed(2));
    CHECK(r.partition.groups == std::vector<int>{1, 2, 1, 2});
    CHECK(cut_tree(r.dendrogram, 4).groups == std::vector<int>{1, 2, 3, 4});
    CHECK(cut_tree(r.dendrogram, 1).groups == std::vector<int>{1, 1, 1, 1});
    CHECK(r.partition.group_of("S4") == 2);
}

TEST_CASE("clustering pipeline on simulated vMEM panels") {
    const std::size_t n = 6;
    ParamSet p;
    p.alpha = Vector(6);
    p.beta = Vector(6);
    p.alpha << 0.05, 0.20, 0.05, 0.20, 0.05, 0.20;
    p.beta << 0.92, 0.70, 0.92, 0.70, 0.92, 0.70;
    p.theta = Vector::Ones(6);
    p.c = Vector::Constant(6, 1 / std::sqrt(6.0));
    Matrix V = Matrix::Constant(6, 6, 0.1);
    V.diagonal().setConstant(0.3);
    p.set_covariance(V);
    p.x_bar = Vector::Constant(6, 0.2);
    const auto spec = ModelSpec::make(Variant::vmem, Parameterization::diagonal, names(n));

    SUBCASE("two regimes") {
        const auto panel = simulate(spec, p, 3000, 66).panel;
        const auto report = clustering_pipeline(panel, first_principal_component(panel), Variant::vmem);
        CHECK(report.spec.parameterization == Parameterization::clustered);
        CHECK(report.spec.variant == Variant::vmem);
        CHECK_FALSE(report.theta.has_value());
        const Partition truth = make_partition({1, 2, 1, 2, 1, 2});
        CHECK(adjusted_rand_index(report.ab.partition, truth) >= 0.9);
        CHECK(report.xi_star.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("homogeneous dynamics") {
        p.alpha.setConstant(0.1);
        p.beta.setConstant(0.85);
        const auto panel = simulate(spec, p, 3000, 67).panel;
        const auto report = clustering_pipeline(panel, first_principal_component(panel), Variant::vmem);
        CHECK(report.spec.k1() == 1);
    }
    SUBCASE("fixed k and too few assets") {
        const auto panel = simulate(spec, p, 1500, 68).panel;
        ClusterOptions o;
        o.k1 = 3;
        const auto report = clustering_pipeline(panel, first_principal_component(panel), Variant::vmem, o);
        CHECK(report.spec.k1() == 3);
        const auto small = simulate(ModelSpec::make(Variant::vmem, Parameterization::scalar, names(2)),
                                    [&] {
                                        ParamSet q = p;
                                        q.alpha = p.alpha.head(2);
                                        q.beta = p.beta.head(2);
                                        q.theta = Vector::Ones(2);
                                        q.c = Vector::Constant(2, 1 / std::sqrt(2.0));
                                        q.set_covariance(V.topLeftCorner(2, 2));
                                        q.x_bar = p.x_bar.head(2);
                                        return q;
                                    }(),
                                    500, 69)
                               .panel;
        CHECK_THROWS_AS(clustering_pipeline(small, first_principal_component(small), Variant::vmem), Error);
    }
}
