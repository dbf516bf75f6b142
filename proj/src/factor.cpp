#include "vmem/factor.hpp"

#include "vmem/error.hpp"
#include "vmem/kernels/kernels.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>

#include <cmath>

namespace vmem {

void normalize_sign(Vector& loadings) {
    const double total = loadings.sum();
    const double scale = loadings.cwiseAbs().maxCoeff();
    bool flip = false;
    if (std::abs(total) > 1e-12 * std::max(1.0, scale)) {
        flip = total < 0.0;
    } else {
        for (Eigen::Index i = 0; i < loadings.size(); ++i) {
            if (std::abs(loadings(i)) > 1e-12 * std::max(1.0, scale)) {
                flip = loadings(i) < 0.0;
                break;
            }
        }
    }
    if (flip) loadings = -loadings;
}

PcFactor factor_from_loadings(const VolatilityPanel& panel, const Vector& loadings, const Vector& center) {
    if (static_cast<std::size_t>(loadings.size()) != panel.assets() ||
        static_cast<std::size_t>(center.size()) != panel.assets())
        throw Error(fmt::format("factor loadings/centre have size {}/{} but the panel has {} assets", loadings.size(),
                                center.size(), panel.assets()));
    PcFactor f;
    f.loadings = loadings;
    f.center = center;
    f.scores.resize(static_cast<Eigen::Index>(panel.rows()));
    kernels::active().centered_projection(panel.rows(), panel.assets(), panel.x().data(),
                                          static_cast<std::size_t>(panel.x().rows()), center.data(),
                                          loadings.data(), f.scores.data());
    return f;
}

PcFactor first_principal_component(const VolatilityPanel& panel) {
    const std::size_t n = panel.assets();
    const std::size_t rows = panel.train_rows();
    if (n < 2 || rows <= n)
        throw Error(fmt::format("principal component needs n >= 2 and T_train > n (n={}, T_train={})", n, rows));

    const Matrix centered =
        panel.x().topRows(static_cast<Eigen::Index>(rows)).rowwise() - panel.x_bar().transpose();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(rows - 1);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("eigen-decomposition of the panel covariance failed");
    const Vector& values = eig.eigenvalues();  // ascending
    const double lead = values(values.size() - 1);
    const double second = values(values.size() - 2);
    const double tol = 1e-10 * std::max(1.0, std::abs(lead));
    if (!(lead > tol) || lead - second <= tol)
        throw Error(fmt::format("ambiguous leading component: eigenvalues {} and {} coincide", lead, second));

    Vector c = eig.eigenvectors().col(values.size() - 1);
    c.normalize();
    normalize_sign(c);

    PcFactor f = factor_from_loadings(panel, c, panel.x_bar());
    f.eigenvalue = lead;
    const double total = values.cwiseMax(0.0).sum();
    f.explained_share = lead / total;
    return f;
}

}  // namespace vmem
