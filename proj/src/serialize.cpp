#include "vmem/serialize.hpp"

#include "vmem/csv.hpp"
#include "vmem/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>

namespace vmem {

Json number(double value) { return std::isfinite(value) ? Json(value) : Json(nullptr); }

double number_from(const Json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!j.is_number()) throw Error("expected a number, got " + j.dump());
    return j.get<double>();
}

namespace {

Json vector_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
    return out;
}

Json vector_json(const std::vector<double>& v) {
    Json out = Json::array();
    for (double x : v) out.push_back(number(x));
    return out;
}

Vector vector_from(const Json& j, const char* name) {
    if (!j.is_array()) throw Error(fmt::format("'{}' must be an array", name));
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_from(j[i]);
    return v;
}

std::vector<double> std_vector_from(const Json& j, const char* name) {
    const Vector v = vector_from(j, name);
    return {v.data(), v.data() + v.size()};
}

const Json& field(const Json& j, const char* name) {
    if (!j.is_object() || !j.contains(name)) throw Error(fmt::format("missing field '{}'", name));
    return j.at(name);
}

Json group_map(const std::vector<std::string>& tickers, const std::vector<int>& groups) {
    Json out = Json::object();
    for (std::size_t i = 0; i < tickers.size(); ++i) out[tickers[i]] = groups[i];
    return out;
}

std::vector<int> groups_from(const Json& j, const std::vector<std::string>& tickers, const char* name) {
    if (j.is_array()) return j.get<std::vector<int>>();
    if (!j.is_object()) throw Error(fmt::format("'{}' must map tickers to group ids", name));
    std::vector<int> groups;
    for (const auto& t : tickers) {
        if (!j.contains(t)) throw Error(fmt::format("'{}' has no entry for ticker '{}'", name, t));
        groups.push_back(j.at(t).get<int>());
    }
    if (j.size() != tickers.size()) throw Error(fmt::format("'{}' lists tickers that are not in the specification", name));
    return groups;
}

}  // namespace

Json to_json(const ModelSpec& spec) {
    Json j;
    j["model"] = spec.label();
    j["variant"] = to_string(spec.variant);
    j["parameterization"] = to_string(spec.parameterization);
    j["tickers"] = spec.tickers;
    j["ab_groups"] = group_map(spec.tickers, spec.ab_groups);
    if (spec.has_common()) j["theta_groups"] = group_map(spec.tickers, spec.theta_groups);
    return j;
}

ModelSpec spec_from_json(const Json& j) {
    const auto variant = parse_variant(field(j, "variant").get<std::string>());
    const auto parameterization = parse_parameterization(field(j, "parameterization").get<std::string>());
    auto tickers = field(j, "tickers").get<std::vector<std::string>>();
    if (parameterization != Parameterization::clustered) return ModelSpec::make(variant, parameterization, tickers);
    auto ab = groups_from(field(j, "ab_groups"), tickers, "ab_groups");
    std::vector<int> theta;
    if (variant == Variant::vmem_sec) theta = groups_from(field(j, "theta_groups"), tickers, "theta_groups");
    return ModelSpec::clustered(variant, std::move(tickers), std::move(ab), std::move(theta));
}

Json to_json(const ParamSet& params) {
    Json j;
    j["alpha"] = vector_json(params.alpha);
    j["beta"] = vector_json(params.beta);
    j["theta"] = vector_json(params.theta);
    j["delta"] = number(params.delta);
    j["phi"] = number(params.phi);
    Json V = Json::array();
    for (Eigen::Index r = 0; r < params.V.rows(); ++r) V.push_back(vector_json(Vector(params.V.row(r).transpose())));
    j["V"] = V;
    j["x_bar"] = vector_json(params.x_bar);
    j["c"] = vector_json(params.c);
    return j;
}

ParamSet params_from_json(const Json& j) {
    ParamSet p;
    p.alpha = vector_from(field(j, "alpha"), "alpha");
    p.beta = vector_from(field(j, "beta"), "beta");
    const auto n = p.alpha.size();
    p.theta = j.contains("theta") ? vector_from(j.at("theta"), "theta") : Vector::Zero(n);
    if (p.theta.size() == 0) p.theta = Vector::Zero(n);
    p.delta = j.contains("delta") ? number_from(j.at("delta")) : 0.0;
    p.phi = j.contains("phi") ? number_from(j.at("phi")) : 0.0;
    const Json& rows = field(j, "V");
    if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != n) throw Error("'V' must be an n x n array");
    Matrix V(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const Vector row = vector_from(rows[static_cast<std::size_t>(r)], "V");
        if (row.size() != n) throw Error("'V' must be an n x n array");
        V.row(r) = row.transpose();
    }
    p.set_covariance(V);
    p.x_bar = vector_from(field(j, "x_bar"), "x_bar");
    p.c = j.contains("c") ? vector_from(j.at("c"), "c") : Vector::Zero(n);
    if (p.c.size() == 0) p.c = Vector::Zero(n);
    return p;
}

Json to_json(const FitResult& fit) {
    Json j;
    j["model"] = fit.spec.label();
    j["spec"] = to_json(fit.spec);
    j["loglik"] = number(fit.loglik);
    j["n_free"] = fit.n_free;
    j["train_rows"] = fit.train_rows;
    j["converged"] = fit.converged;
    j["outer_iterations"] = fit.outer_iterations;
    j["inner_evaluations"] = fit.inner_evaluations;
    j["loglik_trace"] = vector_json(fit.loglik_trace);
    j["final_change"] = number(fit.final_change);
    Json coefficients = Json::array();
    for (std::size_t k = 0; k < fit.names.size(); ++k) {
        Json c;
        c["name"] = fit.names[k];
        c["estimate"] = number(fit.estimates[k]);
        c["std_error"] = number(k < fit.std_errors.size() ? fit.std_errors[k] : std::nan(""));
        coefficients.push_back(c);
    }
    j["coefficients"] = coefficients;
    j["params"] = to_json(fit.params);
    j["warnings"] = fit.warnings;
    j["wall_seconds"] = fit.wall_seconds;
    return j;
}

FitResult fit_from_json(const Json& j) {
    FitResult fit;
    fit.spec = spec_from_json(field(j, "spec"));
    fit.params = params_from_json(field(j, "params"));
    fit.loglik = number_from(field(j, "loglik"));
    fit.n_free = field(j, "n_free").get<int>();
    fit.train_rows = j.value("train_rows", std::size_t{0});
    fit.converged = j.value("converged", false);
    fit.outer_iterations = j.value("outer_iterations", 0);
    fit.inner_evaluations = j.value("inner_evaluations", 0L);
    if (j.contains("loglik_trace")) fit.loglik_trace = std_vector_from(j.at("loglik_trace"), "loglik_trace");
    if (j.contains("final_change")) fit.final_change = number_from(j.at("final_change"));
    for (const auto& c : field(j, "coefficients")) {
        fit.names.push_back(field(c, "name").get<std::string>());
        fit.estimates.push_back(number_from(field(c, "estimate")));
        fit.std_errors.push_back(c.contains("std_error") ? number_from(c.at("std_error")) : std::nan(""));
    }
    if (j.contains("warnings")) fit.warnings = j.at("warnings").get<std::vector<std::string>>();
    fit.wall_seconds = j.value("wall_seconds", 0.0);
    return fit;
}

Json to_json(const PcFactor& factor, const std::vector<std::string>& tickers) {
    Json j;
    j["tickers"] = tickers;
    j["loadings"] = vector_json(factor.loadings);
    j["center"] = vector_json(factor.center);
    j["eigenvalue"] = number(factor.eigenvalue);
    j["explained_share"] = number(factor.explained_share);
    return j;
}

PcFactor factor_from_json(const Json& j, const VolatilityPanel& panel) {
    const auto tickers = field(j, "tickers").get<std::vector<std::string>>();
    if (tickers != panel.tickers()) throw Error("factor file tickers do not match the panel");
    PcFactor f = factor_from_loadings(panel, vector_from(field(j, "loadings"), "loadings"),
                                      vector_from(field(j, "center"), "center"));
    f.eigenvalue = j.contains("eigenvalue") ? number_from(j.at("eigenvalue")) : 0.0;
    f.explained_share = j.contains("explained_share") ? number_from(j.at("explained_share")) : 0.0;
    return f;
}

Json to_json(const Partition& partition) {
    Json j;
    j["k"] = partition.k();
    j["groups"] = group_map(partition.labels, partition.groups);
    return j;
}

Json to_json(const Dendrogram& dendrogram) {
    Json merges = Json::array();
    for (const auto& m : dendrogram.merges) merges.push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
    return {{"labels", dendrogram.labels}, {"merges", merges}};
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open file");
    try {
        return Json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), e.what());
    }
}

void write_json(const std::filesystem::path& path, const Json& j) {
    auto out = csv::open_output(path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed to write " + path.string());
}

}  // namespace vmem
