#include "doctest.h"

#include "vmem/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace vmem;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("S" + std::to_string(i + 1));
    return out;
}

ParamSet truth(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    ParamSet p;
    p.alpha = Vector(k);
    p.beta = Vector(k);
    p.theta = Vector(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        p.alpha(i) = i % 2 ? 0.20 : 0.05;
        p.beta(i) = i % 2 ? 0.70 : 0.92;
        p.theta(i) = i % 3 ? 1.1 : 0.9;
    }
    p.delta = 0.02;
    p.phi = 0.4;
    p.c = Vector::Constant(k, 1.0 / std::sqrt(static_cast<double>(n)));
    Matrix V = Matrix::Constant(k, k, 0.12);
    V.diagonal().setConstant(0.3);
    p.set_covariance(V);
    p.x_bar = Vector::LinSpaced(k, 0.0, 0.5);
    return p;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "vmem_test_pipeline" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// Writes a simulated panel whose last `holdout` rows are out of sample.
fs::path write_panel(const fs::path& dir, std::size_t n, std::size_t rows, std::size_t holdout, std::uint64_t seed) {
    const auto spec = ModelSpec::make(Variant::vmem_sec, Parameterization::diagonal, names(n));
    auto panel = simulate(spec, truth(n), rows, seed).panel;
    if (holdout) panel = panel.with_split(rows - holdout);
    const fs::path path = dir / "panel.csv";
    save_panel_csv(panel, path);
    return path;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig config_for(const fs::path& input, const fs::path& out, std::vector<std::string> models) {
    RunConfig c;
    c.input = input;
    c.output_dir = out;
    c.models = std::move(models);
    c.evaluation.mcs_options.replicates = 200;
    return c;
}

}  // namespace

TEST_CASE("single-model run") {
    const auto dir = scratch("single");
    const auto input = write_panel(dir, 3, 1500, 200, 81);
    const auto result = run_pipeline(config_for(input, dir / "out", {"s-vMEM"}));
    REQUIRE(result.summary.size() == 1);
    const auto& row = result.summary.front();
    CHECK(row.model == "s-vMEM");
    CHECK(row.n_free == 2);
    CHECK(row.rows == 1500);
    CHECK(std::isfinite(row.loglik));
    CHECK(row.aic == doctest::Approx((-2.0 * row.loglik + 4.0) / 1500.0).epsilon(1e-12));
    REQUIRE(row.mse_oos.has_value());
    CHECK(*row.mse_oos > 0.0);
    CHECK_FALSE(row.mcs_mse_is.has_value());  // a single model has no confidence set

    const Json manifest = read_json(dir / "out" / "manifest.json");
    CHECK(manifest["status"] == "ok");
    for (const auto& a : manifest["artifacts"]) CHECK(fs::exists(dir / "out" / a["path"].get<std::string>()));
    CHECK(fs::exists(dir / "out" / "models" / "s-vMEM" / "fit_oos.json"));
    CHECK(fs::exists(dir / "out" / "summary.csv"));
}

TEST_CASE("six-model run is complete and deterministic") {
    const auto dir = scratch("six");
    const auto input = write_panel(dir, 6, 2500, 250, 82);
    RunConfig c = config_for(input, dir / "a", default_models());
    c.threads = 2;
    const auto a = run_pipeline(c);
    REQUIRE(a.summary.size() == 6);
    for (std::size_t k = 0; k < 6; ++k) CHECK(a.summary[k].model == default_models()[k]);
    // Nested specifications: adding the common component does not lower the likelihood
    // by more than the optimizer tolerance.
    CHECK(a.summary[4].loglik > a.summary[1].loglik - 1.0);

    bool any_in_set = false;
    for (const auto& row : a.summary) {
        REQUIRE(row.mcs_qlike_is.has_value());
        any_in_set = any_in_set || *row.mcs_qlike_is;
    }
    CHECK(any_in_set);

    for (const std::string label : {"s-vMEM-SeC", "d-vMEM-SeC", "c-vMEM-SeC"}) {
        CHECK(fs::exists(dir / "a" / "models" / label / "xi.csv"));
        CHECK(fs::exists(dir / "a" / "models" / label / "coefficients.csv"));
    }
    CHECK_FALSE(fs::exists(dir / "a" / "models" / "s-vMEM" / "xi.csv"));
    CHECK(fs::exists(dir / "a" / "cluster_map.csv"));
    CHECK(fs::exists(dir / "a" / "evaluation_oos.csv"));

    const Json manifest = read_json(dir / "a" / "manifest.json");
    for (const auto& item : manifest["artifacts"]) {
        const fs::path p = dir / "a" / item["path"].get<std::string>();
        REQUIRE(fs::exists(p));
        if (p.extension() == ".json") CHECK_NOTHROW(read_json(p));
        if (p.extension() == ".csv") CHECK(fs::file_size(p) > 0);
    }

    c.output_dir = dir / "b";
    c.threads = 1;
    run_pipeline(c);
    CHECK(read_file(dir / "a" / "summary.csv") == read_file(dir / "b" / "summary.csv"));
    CHECK(read_file(dir / "a" / "models" / "c-vMEM-SeC" / "fit_is.json").size() > 0);
    CHECK(read_file(dir / "a" / "evaluation_is.csv") == read_file(dir / "b" / "evaluation_is.csv"));
}

TEST_CASE("failures are tagged with their stage and keep earlier artifacts") {
    const auto dir = scratch("failure");
    SUBCASE("clustering needs three assets") {
        const auto input = write_panel(dir, 2, 600, 0, 83);
        const auto c = config_for(input, dir / "out", {"s-vMEM", "c-vMEM"});
        try {
            run_pipeline(c);
            FAIL("expected a stage error");
        } catch (const StageError& e) {
            CHECK(e.stage() == "cluster");
        }
        const Json manifest = read_json(dir / "out" / "manifest.json");
        CHECK(manifest["status"] == "failed");
        CHECK(manifest["failed_stage"] == "cluster");
        CHECK(fs::exists(dir / "out" / "panel.csv"));
        for (const auto& a : manifest["artifacts"]) CHECK(fs::exists(dir / "out" / a["path"].get<std::string>()));
    }
    SUBCASE("unreadable input") {
        std::ofstream(dir / "bad.csv") << "date,A,B\n2020-01-02,1.0\n";
        const auto c = config_for(dir / "bad.csv", dir / "out", {"s-vMEM"});
        try {
            run_pipeline(c);
            FAIL("expected a stage error");
        } catch (const StageError& e) {
            CHECK(e.stage() == "ingest");
        }
        CHECK(read_json(dir / "out" / "manifest.json")["failed_stage"] == "ingest");
    }
}

TEST_CASE("run configuration parsing") {
    const auto dir = scratch("config");
    std::ofstream(dir / "panel.csv") << "date,A\n2020-01-02,1\n";
    const Json j = Json::parse(R"({
        "input": {"path": "panel.csv", "split_date": "2020-06-01"},
        "models": ["s-vMEM", "c-vMEM-SeC"],
        "fit": {"outer_tolerance": 1e-5},
        "cluster": {"k1": 2},
        "evaluation": {"replicates": 50},
        "seed": 7
    })");
    const auto c = run_config_from_json(j, dir);
    CHECK(c.input == dir / "panel.csv");
    REQUIRE(c.split_date.has_value());
    CHECK(c.models.size() == 2);
    CHECK(c.fit.outer_tolerance == 1e-5);
    CHECK(c.cluster.k1 == 2);
    CHECK(c.evaluation.mcs_options.replicates == 50);
    CHECK(c.seed == 7);
    CHECK_NOTHROW(c.validate());

    const auto again = run_config_from_json(to_json(c), dir);
    CHECK(again.models == c.models);
    CHECK(again.seed == c.seed);

    Json unknown = j;
    unknown["fit"]["tolerence"] = 1.0;
    CHECK_THROWS(run_config_from_json(unknown, dir));
    Json top = j;
    top["modles"] = Json::array();
    CHECK_THROWS(run_config_from_json(top, dir));
    Json bad_model = j;
    bad_model["models"] = {"x-vMEM"};
    CHECK_THROWS(run_config_from_json(bad_model, dir).validate());
    CHECK(default_models().size() == 6);
}
