#include "vmem/evaluate.hpp"

#include "vmem/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace vmem {

std::string to_string(Window window) { return window == Window::in_sample ? "is" : "oos"; }

Window parse_window(const std::string& text) {
    if (text == "is" || text == "in-sample" || text == "in_sample") return Window::in_sample;
    if (text == "oos" || text == "out-of-sample" || text == "out_of_sample") return Window::out_of_sample;
    throw Error("unknown window '" + text + "' (expected is or oos)");
}

std::pair<std::size_t, std::size_t> window_rows(const VolatilityPanel& panel, Window window) {
    if (window == Window::in_sample) return {0, panel.split_index()};
    if (!panel.has_holdout()) throw Error("panel has no out-of-sample rows (no split date)");
    return {panel.split_index(), panel.rows()};
}

Matrix forecast_one_step(const VolatilityPanel& panel, const PcFactor& factor, const ModelSpec& spec,
                         const ParamSet& params, Window window) {
    const auto [first, last] = window_rows(panel, window);
    const FilterOutput out = filter(panel, factor, spec, params);
    return out.ln_mu.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last - first))
        .array()
        .exp()
        .matrix();
}

Vector LossSeries::per_period() const { return values.rowwise().mean(); }

namespace {

void check_shapes(const Matrix& y, const Matrix& mu) {
    if (y.rows() != mu.rows() || y.cols() != mu.cols()) throw Error("observations and forecasts differ in shape");
    if (y.size() == 0) throw Error("loss needs at least one observation");
}

LossSeries finish(Matrix values) {
    LossSeries s;
    s.aggregate = values.mean();
    s.values = std::move(values);
    return s;
}

}  // namespace

LossSeries loss_mse(const Matrix& y, const Matrix& mu) {
    check_shapes(y, mu);
    return finish((y - mu).array().square().matrix());
}

LossSeries loss_qlike(const Matrix& y, const Matrix& mu) {
    check_shapes(y, mu);
    if (!(mu.array() > 0.0).all()) throw DomainError("QLIKE needs strictly positive forecasts");
    return finish((mu.array().log() + y.array() / mu.array()).matrix());
}

InformationCriteria information_criteria(double loglik, int n_free, double T) {
    if (!(T > 0.0)) throw Error("information criteria need T > 0");
    const double k = static_cast<double>(n_free);
    return {(-2.0 * loglik + 2.0 * k) / T, (-2.0 * loglik + k * std::log(T)) / T};
}

std::vector<std::string> McsResult::surviving() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < models.size(); ++i)
        if (included[i]) out.push_back(models[i]);
    return out;
}

McsResult model_confidence_set(const std::vector<LossSeries>& losses, const McsOptions& options) {
    const std::size_t M = losses.size();
    if (M < 2) throw Error("model confidence set needs at least 2 models");
    if (options.replicates < 1) throw Error("MCS needs at least one bootstrap replicate");
    if (options.block_length < 1) throw Error("MCS block length must be positive");
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw Error("MCS significance level must lie in (0, 1)");

    const Eigen::Index T = losses.front().values.rows();
    if (T < 2) throw Error("MCS needs at least 2 periods");
    Matrix L(T, static_cast<Eigen::Index>(M));
    for (std::size_t i = 0; i < M; ++i) {
        if (losses[i].values.rows() != T || losses[i].values.cols() != losses.front().values.cols())
            throw Error("loss panels are not aligned");
        L.col(static_cast<Eigen::Index>(i)) = losses[i].per_period();
    }
    const Vector mean = L.colwise().mean();

    // Bootstrap means of each model's loss under shared resampled indices.
    const auto B = static_cast<Eigen::Index>(options.replicates);
    Matrix boot(B, static_cast<Eigen::Index>(M));
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<Eigen::Index> start(0, T - 1);
    std::vector<Eigen::Index> index(static_cast<std::size_t>(T));
    for (Eigen::Index b = 0; b < B; ++b) {
        Eigen::Index filled = 0;
        while (filled < T) {
            const Eigen::Index s = start(rng);
            for (int k = 0; k < options.block_length && filled < T; ++k, ++filled)
                index[static_cast<std::size_t>(filled)] = (s + k) % T;
        }
        for (std::size_t i = 0; i < M; ++i) {
            double sum = 0.0;
            for (Eigen::Index t = 0; t < T; ++t) sum += L(index[static_cast<std::size_t>(t)], static_cast<Eigen::Index>(i));
            boot(b, static_cast<Eigen::Index>(i)) = sum / static_cast<double>(T);
        }
    }

    McsResult result;
    result.alpha = options.alpha;
    result.replicates = options.replicates;
    result.block_length = options.block_length;
    for (const auto& l : losses) result.models.push_back(l.model);
    result.included.assign(M, true);
    result.p_values.assign(M, 1.0);

    constexpr double kTiny = 1e-300;
    std::vector<std::size_t> alive(M);
    for (std::size_t i = 0; i < M; ++i) alive[i] = i;
    double running = 0.0;
    while (alive.size() > 1) {
        double stat = 0.0;
        Vector boot_stat = Vector::Zero(B);
        std::vector<double> worst(M, -std::numeric_limits<double>::infinity());
        for (std::size_t a = 0; a < alive.size(); ++a) {
            for (std::size_t c = a + 1; c < alive.size(); ++c) {
                const auto i = static_cast<Eigen::Index>(alive[a]);
                const auto j = static_cast<Eigen::Index>(alive[c]);
                const double d = mean(i) - mean(j);
                const Vector centered = (boot.col(i) - boot.col(j)).array() - d;
                const double var = centered.squaredNorm() / static_cast<double>(B);
                if (!(var > kTiny)) continue;  // identical loss series carry no information
                stat += d * d / var;
                boot_stat += (centered.array().square() / var).matrix();
                const double t = d / std::sqrt(var);
                worst[alive[a]] = std::max(worst[alive[a]], t);
                worst[alive[c]] = std::max(worst[alive[c]], -t);
            }
        }
        double p = 1.0;
        if (stat > 0.0) p = static_cast<double>((boot_stat.array() >= stat).count()) / static_cast<double>(B);
        running = std::max(running, p);
        if (p >= options.alpha) break;

        const auto drop = *std::max_element(alive.begin(), alive.end(),
                                            [&](std::size_t x, std::size_t y) { return worst[x] < worst[y]; });
        result.included[drop] = false;
        result.p_values[drop] = running;
        result.elimination.push_back(result.models[drop]);
        alive.erase(std::find(alive.begin(), alive.end(), drop));
    }
    // Survivors carry the p-value of the first test that was not rejected; a
    // lone survivor gets 1.
    for (std::size_t i : alive) result.p_values[i] = alive.size() == 1 ? 1.0 : running;
    return result;
}

}  // namespace vmem
