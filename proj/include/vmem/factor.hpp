#pragma once

#include "vmem/panel.hpp"

namespace vmem {

/// First principal component of the demeaned log-volatility panel.
struct PcFactor {
    Vector loadings;        ///< c, unit Euclidean norm, sum of entries > 0
    Vector scores;          ///< p_t = c'(x_t - x_bar) for every panel row
    Vector center;          ///< x_bar used to centre the scores
    double eigenvalue = 0;  ///< leading covariance eigenvalue
    double explained_share = 0;
};

/// Leading eigenvector of the training-window covariance of x (divisor
/// T_train - 1). Scores are produced for all rows with the training mean, so
/// out-of-sample rows never see future information. Throws when the leading
/// eigenvalue is not simple.
PcFactor first_principal_component(const VolatilityPanel& panel);

/// Scores of the given loadings on a panel, centred at `center`.
PcFactor factor_from_loadings(const VolatilityPanel& panel, const Vector& loadings, const Vector& center);

/// Applies the sign convention: sum(c) > 0, ties toward the first nonzero
/// coordinate being positive.
void normalize_sign(Vector& loadings);

}  // namespace vmem
