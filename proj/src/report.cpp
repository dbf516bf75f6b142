#include "vmem/report.hpp"

#include "vmem/csv.hpp"
#include "vmem/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <map>

namespace vmem {
namespace {

using csv::format_double;

std::string flag(const std::optional<McsResult>& mcs, std::size_t k) {
    if (!mcs) return "";
    return mcs->included[k] ? "1" : "0";
}

std::string p_value(const std::optional<McsResult>& mcs, std::size_t k) {
    if (!mcs) return "";
    return format_double(mcs->p_values[k]);
}

std::string date_at(const VolatilityPanel& panel, std::size_t row) { return format_date(panel.dates()[row]); }

}  // namespace

PcFactor fitted_factor(const VolatilityPanel& panel, const FitResult& fit) {
    const auto n = static_cast<Eigen::Index>(panel.assets());
    if (fit.params.x_bar.size() != n) throw Error("fit and panel have a different number of assets");
    if (fit.spec.tickers != panel.tickers()) throw Error("fit tickers do not match the panel");
    const Vector c = fit.params.c.size() == n ? fit.params.c : Vector::Zero(n);
    return factor_from_loadings(panel, c, fit.params.x_bar);
}

EvaluationReport evaluate_models(const VolatilityPanel& panel, const std::vector<FitResult>& fits, Window window,
                                 const EvaluationOptions& options) {
    if (fits.empty()) throw Error("no fitted models to evaluate");
    EvaluationReport report;
    report.window = window;
    const auto [first, last] = window_rows(panel, window);
    if (last <= first) throw Error(fmt::format("the {} window is empty", to_string(window)));
    const Matrix y = panel.y().middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last - first));
    for (const auto& fit : fits) {
        const Matrix mu = forecast_one_step(panel, fitted_factor(panel, fit), fit.spec, fit.params, window);
        ModelEvaluation e;
        e.model = fit.spec.label();
        e.n_free = fit.n_free;
        e.rows = fit.train_rows;
        e.loglik = fit.loglik;
        e.criteria = information_criteria(fit.loglik, fit.n_free, static_cast<double>(fit.train_rows));
        e.mse = loss_mse(y, mu);
        e.qlike = loss_qlike(y, mu);
        e.mse.model = e.qlike.model = e.model;
        e.mse.window = e.qlike.window = window;
        report.models.push_back(std::move(e));
    }
    if (options.mcs && report.models.size() >= 2) {
        std::vector<LossSeries> mse, qlike;
        for (const auto& e : report.models) {
            mse.push_back(e.mse);
            qlike.push_back(e.qlike);
        }
        report.mcs_mse = model_confidence_set(mse, options.mcs_options);
        report.mcs_qlike = model_confidence_set(qlike, options.mcs_options);
    }
    return report;
}

void write_evaluation_csv(const EvaluationReport& report, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.header({"model", "window", "n_free", "T", "loglik", "aic", "bic", "mse", "qlike", "mcs_mse", "mcs_qlike",
              "p_mse", "p_qlike"});
    for (std::size_t k = 0; k < report.models.size(); ++k) {
        const auto& e = report.models[k];
        w.row({e.model, to_string(report.window), std::to_string(e.n_free), std::to_string(e.rows),
               format_double(e.loglik), format_double(e.criteria.aic), format_double(e.criteria.bic),
               format_double(e.mse.aggregate), format_double(e.qlike.aggregate), flag(report.mcs_mse, k),
               flag(report.mcs_qlike, k), p_value(report.mcs_mse, k), p_value(report.mcs_qlike, k)});
    }
}

void write_losses_csv(const VolatilityPanel& panel, const FitResult& fit, Window window,
                      const std::filesystem::path& path) {
    const auto [first, last] = window_rows(panel, window);
    const Matrix mu = forecast_one_step(panel, fitted_factor(panel, fit), fit.spec, fit.params, window);
    csv::Writer w(path);
    w.header({"date", "ticker", "observed", "forecast", "mse", "qlike"});
    for (std::size_t t = first; t < last; ++t) {
        const auto r = static_cast<Eigen::Index>(t - first);
        for (std::size_t i = 0; i < panel.assets(); ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            const double y = panel.y()(static_cast<Eigen::Index>(t), c);
            const double m = mu(r, c);
            w.row({date_at(panel, t), panel.tickers()[i], format_double(y), format_double(m),
                   format_double((y - m) * (y - m)), format_double(std::log(m) + y / m)});
        }
    }
}

void write_filter_csv(const VolatilityPanel& panel, const FilterOutput& out, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.header({"date", "ticker", "ln_mu", "varsigma", "xi"});
    for (std::size_t t = 0; t < panel.rows(); ++t) {
        const auto r = static_cast<Eigen::Index>(t);
        for (std::size_t i = 0; i < panel.assets(); ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            w.row({date_at(panel, t), panel.tickers()[i], format_double(out.ln_mu(r, c)),
                   format_double(out.varsigma(r, c)), format_double(out.xi(r))});
        }
    }
}

void write_xi_csv(const VolatilityPanel& panel, const FilterOutput& out, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.header({"date", "xi", "exp_xi"});
    for (std::size_t t = 0; t < panel.rows(); ++t) {
        const double xi = out.xi(static_cast<Eigen::Index>(t));
        w.row({date_at(panel, t), format_double(xi), format_double(std::exp(xi))});
    }
}

void write_decomposition_csv(const VolatilityPanel& panel, const FilterOutput& out,
                             const std::filesystem::path& path) {
    csv::Writer w(path);
    w.header({"date", "ticker", "exp_varsigma", "mu"});
    for (std::size_t t = 0; t < panel.rows(); ++t) {
        const auto r = static_cast<Eigen::Index>(t);
        for (std::size_t i = 0; i < panel.assets(); ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            w.row({date_at(panel, t), panel.tickers()[i], format_double(std::exp(out.varsigma(r, c))),
                   format_double(std::exp(out.ln_mu(r, c)))});
        }
    }
}

void write_fitted_csv(const VolatilityPanel& panel, const FilterOutput& out, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.header({"date", "ticker", "observed", "fitted"});
    for (std::size_t t = 0; t < panel.rows(); ++t) {
        const auto r = static_cast<Eigen::Index>(t);
        for (std::size_t i = 0; i < panel.assets(); ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            w.row({date_at(panel, t), panel.tickers()[i], format_double(panel.y()(r, c)),
                   format_double(std::exp(out.ln_mu(r, c)))});
        }
    }
}

void write_coefficients_csv(const ModelSpec& spec, const ParamSet& params, const std::filesystem::path& path) {
    const auto rows = per_equation_coefficients(spec, params);
    std::vector<std::string> header{"ticker", "intercept", "own_lag", "inertia", "common"};
    for (const auto& t : spec.tickers) header.push_back("spill_" + t);
    csv::Writer w(path);
    w.header(header);
    for (const auto& eq : rows) {
        std::vector<std::string> fields{eq.ticker, format_double(eq.intercept), format_double(eq.own_lag),
                                        format_double(eq.inertia), format_double(eq.common)};
        for (Eigen::Index j = 0; j < eq.spillover.size(); ++j) fields.push_back(format_double(eq.spillover(j)));
        w.row(fields);
    }
}

void write_estimates_csv(const FitResult& fit, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.header({"name", "estimate", "std_error"});
    for (std::size_t k = 0; k < fit.names.size(); ++k) {
        const double se = k < fit.std_errors.size() ? fit.std_errors[k] : std::nan("");
        w.row({fit.names[k], format_double(fit.estimates[k]), std::isfinite(se) ? format_double(se) : ""});
    }
}

void write_partition_csv(const ModelSpec& spec, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.header({"ticker", "ab_group", "theta_group"});
    for (std::size_t i = 0; i < spec.assets(); ++i) {
        w.row({spec.tickers[i], std::to_string(spec.ab_groups[i]),
               spec.has_common() && i < spec.theta_groups.size() ? std::to_string(spec.theta_groups[i]) : ""});
    }
}

void write_dendrogram_csv(const Dendrogram& dendrogram, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.header({"step", "left", "right", "height", "size"});
    for (std::size_t k = 0; k < dendrogram.merges.size(); ++k) {
        const auto& m = dendrogram.merges[k];
        w.row({std::to_string(k + 1), std::to_string(m.left), std::to_string(m.right), format_double(m.height),
               std::to_string(m.size)});
    }
}

void write_factor_csv(const VolatilityPanel& panel, const PcFactor& factor, const std::filesystem::path& scores,
                      const std::filesystem::path& loadings) {
    {
        csv::Writer w(scores);
        w.header({"date", "p"});
        for (std::size_t t = 0; t < panel.rows(); ++t)
            w.row({date_at(panel, t), format_double(factor.scores(static_cast<Eigen::Index>(t)))});
    }
    csv::Writer w(loadings);
    w.header({"ticker", "c", "center"});
    for (std::size_t i = 0; i < panel.assets(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        w.row({panel.tickers()[i], format_double(factor.loadings(c)), format_double(factor.center(c))});
    }
}

Vector read_loadings_csv(const VolatilityPanel& panel, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open file");
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, double> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto fields = csv::split_line(line);
        if (line_no == 1 && fields.size() >= 2 && fields[0] == "ticker") continue;
        if (fields.size() < 2) throw ParseError(path.string(), line_no, "expected ticker,c");
        const auto c = csv::parse_double(fields[1]);
        if (!c) throw ParseError(path.string(), line_no, "invalid loading '" + fields[1] + "'");
        if (!values.emplace(fields[0], *c).second) throw ParseError(path.string(), line_no, "duplicate ticker");
    }
    Vector c(static_cast<Eigen::Index>(panel.assets()));
    for (std::size_t i = 0; i < panel.assets(); ++i) {
        const auto it = values.find(panel.tickers()[i]);
        if (it == values.end()) throw ParseError(path.string(), "no loading for ticker " + panel.tickers()[i]);
        c(static_cast<Eigen::Index>(i)) = it->second;
    }
    if (values.size() != panel.assets()) throw ParseError(path.string(), "loadings list tickers not in the panel");
    return c;
}

}  // namespace vmem
