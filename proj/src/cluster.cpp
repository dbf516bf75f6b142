#include "vmem/cluster.hpp"

#include "vmem/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <numeric>

namespace vmem {

double arma_distance_generic(double phi_1, double psi_1, double phi_2, double psi_2) {
    if (!(std::abs(psi_1) < 1.0) || !(std::abs(psi_2) < 1.0))
        throw DomainError(fmt::format("ARMA distance needs |psi| < 1 (got {} and {})", psi_1, psi_2));
    const double a = phi_1 - psi_1;
    const double b = phi_2 - psi_2;
    double r = a * a / (1.0 - psi_1 * psi_1) + b * b / (1.0 - psi_2 * psi_2) - 2.0 * a * b / (1.0 - psi_1 * psi_2);
    if (r < 0.0) {
        if (r < -1e-12) throw DomainError(fmt::format("ARMA distance radicand is negative ({})", r));
        r = 0.0;
    }
    return std::sqrt(r);
}

double arma_distance(double alpha_i, double beta_i, double alpha_j, double beta_j) {
    return arma_distance_generic(alpha_i + beta_i, beta_i, alpha_j + beta_j, beta_j);
}

double theta_distance(double theta_i, double theta_j) { return std::abs(theta_i - theta_j); }

Eigen::Matrix2d arma_embedding_gram(double alpha, double beta) {
    if (!(std::abs(beta) < 1.0)) throw DomainError("embedding Gram matrix needs |beta| < 1");
    const double q = 1.0 - beta * beta;
    Eigen::Matrix2d g;
    g(0, 0) = 1.0 / q;
    g(0, 1) = g(1, 0) = alpha * beta / (q * q);
    g(1, 1) = alpha * alpha * (1.0 + beta * beta) / (q * q * q);
    return g;
}

int Partition::k() const { return groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end()); }

int Partition::group_of(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw Error("label '" + label + "' is not in the partition");
    return groups[static_cast<std::size_t>(it - labels.begin())];
}

namespace {

void check_distance_matrix(const Matrix& d, std::size_t n) {
    if (d.rows() != d.cols() || static_cast<std::size_t>(d.rows()) != n)
        throw Error("distance matrix must be square with one row per label");
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (d(i, i) != 0.0) throw Error("distance matrix must have a zero diagonal");
        for (Eigen::Index j = 0; j < i; ++j) {
            if (!std::isfinite(d(i, j)) || d(i, j) < 0.0) throw Error("distances must be finite and non-negative");
            if (std::abs(d(i, j) - d(j, i)) > 1e-12 * std::max(1.0, std::abs(d(i, j))))
                throw Error("distance matrix must be symmetric");
        }
    }
}

int select_k(const std::vector<Merge>& merges, const Selection& selection) {
    const int n = static_cast<int>(merges.size()) + 1;
    if (!selection.automatic) {
        if (selection.k < 1 || selection.k > n) throw Error(fmt::format("cluster count must lie in [1, {}]", n));
        return selection.k;
    }
    int forced = 0;
    while (forced < n - 1 && merges[static_cast<std::size_t>(forced)].height <= selection.floor) ++forced;
    if (forced == n - 1) return 1;
    if (n == 2) return 2;
    // Cutting after merge s (1-based) leaves n - s clusters.
    int best_s = -1;
    double best_gap = -1.0;
    for (int s = std::max(1, forced); s <= n - 2; ++s) {
        const double gap = merges[static_cast<std::size_t>(s)].height - merges[static_cast<std::size_t>(s - 1)].height;
        if (gap >= best_gap) {
            best_gap = gap;
            best_s = s;
        }
    }
    return n - best_s;
}

}  // namespace

ClusterResult hierarchical_cluster(const Matrix& distances, const std::vector<std::string>& labels,
                                   const Selection& selection) {
    const std::size_t n = labels.size();
    if (n < 2) throw Error("clustering needs at least 2 items");
    check_distance_matrix(distances, n);

    Matrix d = distances;
    std::vector<std::size_t> node(n);
    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);
    std::iota(node.begin(), node.end(), 0);

    ClusterResult result;
    result.dendrogram.labels = labels;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (v < best) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        Merge merge;
        merge.left = std::min(node[bi], node[bj]);
        merge.right = std::max(node[bi], node[bj]);
        merge.height = best;
        merge.size = size[bi] + size[bj];
        result.dendrogram.merges.push_back(merge);

        const double wi = static_cast<double>(size[bi]);
        const double wj = static_cast<double>(size[bj]);
        for (std::size_t o = 0; o < n; ++o) {
            if (!active[o] || o == bi || o == bj) continue;
            const auto io = static_cast<Eigen::Index>(o);
            const double v = (wi * d(static_cast<Eigen::Index>(bi), io) + wj * d(static_cast<Eigen::Index>(bj), io)) /
                             (wi + wj);
            d(static_cast<Eigen::Index>(bi), io) = v;
            d(io, static_cast<Eigen::Index>(bi)) = v;
        }
        active[bj] = false;
        size[bi] += size[bj];
        node[bi] = n + step;
    }

    result.partition = cut_tree(result.dendrogram, select_k(result.dendrogram.merges, selection));
    return result;
}

Partition cut_tree(const Dendrogram& dendrogram, int k) {
    const std::size_t n = dendrogram.labels.size();
    if (k < 1 || static_cast<std::size_t>(k) > n) throw Error(fmt::format("cluster count must lie in [1, {}]", n));
    std::vector<std::size_t> parent(2 * n);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&parent](std::size_t v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    for (std::size_t s = 0; s < n - static_cast<std::size_t>(k); ++s) {
        const Merge& m = dendrogram.merges[s];
        parent[root(m.left)] = n + s;
        parent[root(m.right)] = n + s;
    }
    Partition p;
    p.labels = dendrogram.labels;
    std::map<std::size_t, int> ids;
    for (std::size_t i = 0; i < n; ++i) {
        const auto [it, inserted] = ids.emplace(root(i), static_cast<int>(ids.size()) + 1);
        p.groups.push_back(it->second);
    }
    return p;
}

double adjusted_rand_index(const Partition& a, const Partition& b) {
    if (a.labels.size() != a.groups.size() || b.labels.size() != b.groups.size())
        throw Error("partition labels and groups differ in length");
    if (a.labels.size() != b.labels.size()) throw Error("partitions cover different label sets");
    const std::size_t n = a.labels.size();
    if (n < 2) throw Error("adjusted Rand index needs at least 2 labels");

    std::map<std::string, int> b_group;
    for (std::size_t i = 0; i < n; ++i) b_group[b.labels[i]] = b.groups[i];
    if (b_group.size() != n) throw Error("partition has duplicate labels");

    std::map<std::pair<int, int>, long> table;
    std::map<int, long> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
        const auto it = b_group.find(a.labels[i]);
        if (it == b_group.end()) throw Error("partitions cover different label sets ('" + a.labels[i] + "')");
        ++table[{a.groups[i], it->second}];
        ++rows[a.groups[i]];
        ++cols[it->second];
    }
    // Integer pair counts keep the index exact; scaled by the total number of pairs:
    //   ARI = (2 N index - 2 R C) / (N (R + C) - 2 R C).
    using Wide = __int128;
    auto pairs = [](long c) { return static_cast<Wide>(c) * (c - 1) / 2; };
    Wide index = 0, sum_rows = 0, sum_cols = 0;
    for (const auto& [key, count] : table) index += pairs(count);
    for (const auto& [key, count] : rows) sum_rows += pairs(count);
    for (const auto& [key, count] : cols) sum_cols += pairs(count);
    const Wide total = pairs(static_cast<long>(n));
    const Wide numerator = 2 * (total * index - sum_rows * sum_cols);
    const Wide denominator = total * (sum_rows + sum_cols) - 2 * sum_rows * sum_cols;
    if (denominator == 0) return numerator == 0 ? 1.0 : 0.0;
    return static_cast<double>(numerator) / static_cast<double>(denominator);
}

Matrix arma_distance_matrix(const std::vector<double>& alpha, const std::vector<double>& beta) {
    if (alpha.size() != beta.size()) throw Error("alpha and beta differ in length");
    const auto n = static_cast<Eigen::Index>(alpha.size());
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            d(i, j) = d(j, i) = arma_distance(alpha[static_cast<std::size_t>(i)], beta[static_cast<std::size_t>(i)],
                                              alpha[static_cast<std::size_t>(j)], beta[static_cast<std::size_t>(j)]);
    return d;
}

Matrix theta_distance_matrix(const std::vector<double>& theta) {
    const auto n = static_cast<Eigen::Index>(theta.size());
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            d(i, j) = d(j, i) = theta_distance(theta[static_cast<std::size_t>(i)], theta[static_cast<std::size_t>(j)]);
    return d;
}

namespace {

std::vector<UnivariateFit> univariate_fits(const VolatilityPanel& panel, const Vector& xi_star,
                                           const FitOptions& options) {
    const auto rows = static_cast<Eigen::Index>(panel.train_rows());
    const std::size_t n = panel.assets();
    auto one = [&](std::size_t i) {
        try {
            return fit_univariate_mem_sec(panel.x().col(static_cast<Eigen::Index>(i)).head(rows), xi_star, options);
        } catch (const Error& e) {
            throw EstimationError(fmt::format("univariate fit for {}: {}", panel.tickers()[i], e.what()));
        }
    };
    std::vector<UnivariateFit> fits(n);
    const std::size_t width = static_cast<std::size_t>(std::max(1, options.threads));
    for (std::size_t start = 0; start < n; start += width) {
        const std::size_t stop = std::min(n, start + width);
        if (width == 1) {
            fits[start] = one(start);
            continue;
        }
        std::vector<std::future<UnivariateFit>> jobs;
        for (std::size_t i = start; i < stop; ++i) jobs.push_back(std::async(std::launch::async, one, i));
        for (std::size_t i = start; i < stop; ++i) fits[i] = jobs[i - start].get();
    }
    return fits;
}

}  // namespace

ClusteringReport clustering_pipeline(const VolatilityPanel& panel, const PcFactor& factor, Variant variant,
                                     const ClusterOptions& options) {
    const std::size_t n = panel.assets();
    if (n < 3) throw Error("clustering pipeline needs at least 3 series");
    if (options.noise_floor_z < 0.0) throw Error("noise_floor_z must be non-negative");
    const auto rows = static_cast<Eigen::Index>(panel.train_rows());

    ClusteringReport report;
    FitOptions uni_options = options.fit;
    uni_options.std_errors = true;
    uni_options.fixed.clear();

    if (variant == Variant::vmem_sec) {
        const ModelSpec scalar = ModelSpec::make(Variant::vmem_sec, Parameterization::scalar, panel.tickers());
        FitOptions scalar_options = options.fit;
        scalar_options.std_errors = false;
        report.scalar_fit = fit(panel, factor, scalar, scalar_options);
        report.xi_star =
            common_component(factor.scores, report.scalar_fit->params.delta, report.scalar_fit->params.phi).head(rows);
    } else {
        report.xi_star = Vector::Zero(rows);
    }

    report.univariate = univariate_fits(panel, report.xi_star, uni_options);

    std::vector<double> alpha, beta, theta;
    // Series whose standard errors are unavailable do not contribute.
    double ab_noise = 0.0, theta_noise = 0.0;
    int ab_count = 0, theta_count = 0;
    for (const auto& u : report.univariate) {
        alpha.push_back(u.alpha);
        beta.push_back(u.beta);
        theta.push_back(u.theta);
        if (u.covariance.rows() >= 2 && u.covariance.topLeftCorner(2, 2).allFinite()) {
            const Eigen::Matrix2d sigma = u.covariance.topLeftCorner(2, 2);
            ab_noise += 2.0 * (arma_embedding_gram(u.alpha, u.beta) * sigma).trace();
            ++ab_count;
        }
        if (u.theta_identified && u.std_errors.size() > 2 && std::isfinite(u.std_errors[2])) {
            theta_noise += u.std_errors[2];
            ++theta_count;
        }
    }
    if (ab_count > 0)
        report.ab_floor = options.noise_floor_z * std::sqrt(std::max(0.0, ab_noise / ab_count));
    if (theta_count > 0) report.theta_floor = options.noise_floor_z * std::sqrt(2.0) * theta_noise / theta_count;

    const Selection ab_selection = options.k1 ? Selection::fixed(*options.k1) : Selection::automatic_gap(report.ab_floor);
    report.ab = hierarchical_cluster(arma_distance_matrix(alpha, beta), panel.tickers(), ab_selection);

    if (variant == Variant::vmem_sec) {
        const Selection th_selection =
            options.k2 ? Selection::fixed(*options.k2) : Selection::automatic_gap(report.theta_floor);
        report.theta = hierarchical_cluster(theta_distance_matrix(theta), panel.tickers(), th_selection);
        report.ab_theta_ari = adjusted_rand_index(report.ab.partition, report.theta->partition);
        report.spec = ModelSpec::clustered(variant, panel.tickers(), report.ab.partition.groups,
                                           report.theta->partition.groups);
    } else {
        report.spec = ModelSpec::clustered(variant, panel.tickers(), report.ab.partition.groups);
    }
    return report;
}

}  // namespace vmem
