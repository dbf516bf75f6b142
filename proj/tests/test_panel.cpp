#include "doctest.h"

#include "vmem/error.hpp"
#include "vmem/model.hpp"
#include "vmem/panel.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace vmem;
namespace fs = std::filesystem;

namespace {

Date day(int y, unsigned m, unsigned d) { return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}; }

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "vmem_test_panel";
    fs::create_directories(dir);
    return dir / name;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("Parkinson range estimator") {
    CHECK(compute_parkinson_hlr(100.0, 100.0) == 0.0);
    CHECK(compute_parkinson_hlr(271.8281828, 100.0) == doctest::Approx(100.0 / (4.0 * std::log(2.0))).epsilon(1e-8));
    CHECK(compute_parkinson_hlr(271.8281828, 100.0) == doctest::Approx(36.0673760).epsilon(1e-8));
    CHECK(std::abs(compute_parkinson_hlr(101.0, 100.0) - 0.0035710) < 1e-7);
    CHECK_THROWS_AS(compute_parkinson_hlr(99.0, 100.0), DomainError);
    CHECK_THROWS_AS(compute_parkinson_hlr(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(compute_parkinson_hlr(1.0, -1.0), DomainError);
}

TEST_CASE("Parkinson estimator is invariant to price scale") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(1.0, 500.0), r(1.0, 1.2), k(0.01, 100.0);
    for (int i = 0; i < 200; ++i) {
        const double low = u(rng), high = low * r(rng), s = k(rng);
        CHECK(compute_parkinson_hlr(s * high, s * low) ==
              doctest::Approx(compute_parkinson_hlr(high, low)).epsilon(1e-10));
    }
}

TEST_CASE("build_panel assembles a balanced panel") {
    std::vector<OhlcRecord> records;
    for (unsigned d = 1; d <= 3; ++d) {
        records.push_back({day(2020, 1, d), "AAA", 101.0 + d, 100.0});
        records.push_back({day(2020, 1, d), "BBB", 52.0, 50.0 - d});
    }
    records.push_back({day(2020, 1, 4), "AAA", 105.0, 100.0});  // dropped: BBB missing that day

    const auto panel = build_panel(records);
    CHECK(panel.rows() == 3);
    CHECK(panel.assets() == 2);
    CHECK(panel.split_index() == 3);
    CHECK_FALSE(panel.has_holdout());
    CHECK(panel.tickers() == std::vector<std::string>{"AAA", "BBB"});
    CHECK(panel.y()(0, 0) == doctest::Approx(compute_parkinson_hlr(102.0, 100.0)).epsilon(1e-14));

    for (Eigen::Index t = 0; t < 3; ++t)
        for (Eigen::Index i = 0; i < 2; ++i)
            CHECK(std::exp(panel.x()(t, i)) == doctest::Approx(panel.y()(t, i)).epsilon(1e-12));

    const auto split = build_panel(records, day(2020, 1, 2));
    CHECK(split.split_index() == 1);
    CHECK(split.has_holdout());
    CHECK(split.x_bar()(0) == doctest::Approx(split.x()(0, 0)).epsilon(1e-14));
}

TEST_CASE("build_panel rejects bad inputs") {
    std::vector<OhlcRecord> records{{day(2020, 1, 1), "A", 10.0, 9.0}, {day(2020, 1, 2), "A", 10.0, 10.0}};
    CHECK_THROWS_AS(build_panel(records), DomainError);  // zero range
    records = {{day(2020, 1, 1), "A", 10.0, 9.0}};
    CHECK_THROWS_AS(build_panel(records), Error);  // one row
    records = {{day(2020, 1, 1), "A", 10.0, 9.0}, {day(2020, 1, 1), "A", 10.0, 9.5}, {day(2020, 1, 2), "A", 10.0, 9.0}};
    CHECK_THROWS_AS(build_panel(records), Error);  // duplicate
}

TEST_CASE("x_bar uses only the training rows") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    Matrix x(50, 3);
    for (Eigen::Index t = 0; t < x.rows(); ++t)
        for (Eigen::Index i = 0; i < x.cols(); ++i) x(t, i) = z(rng);
    std::vector<Date> dates;
    for (int t = 0; t < 50; ++t) dates.push_back(Date{std::chrono::sys_days{day(2021, 1, 1)} + std::chrono::days{t}});
    const auto panel = VolatilityPanel::from_logs({"a", "b", "c"}, dates, x, 30);
    for (Eigen::Index i = 0; i < 3; ++i) {
        double s = 0.0;
        for (Eigen::Index t = 0; t < 30; ++t) s += x(t, i);
        CHECK(panel.x_bar()(i) == doctest::Approx(s / 30.0).epsilon(1e-12));
    }
    CHECK(panel.with_split(50).x_bar()(0) == doctest::Approx(x.col(0).mean()).epsilon(1e-12));
    CHECK(panel.first_row_on_or_after(dates[10]) == 10);
    CHECK_THROWS(VolatilityPanel::from_logs({"a", "b", "c"}, dates, x, 0));
}

TEST_CASE("wide CSV loading and lossless round trip") {
    const auto path = scratch("wide.csv");
    write_file(path, "date,AAA,BBB\n2020-01-02,1.5,2.25\n2020-01-03,0.75,3\n");
    const auto panel = load_panel_csv(path);
    CHECK(panel.rows() == 2);
    CHECK(panel.assets() == 2);
    CHECK(panel.y()(1, 1) == 3.0);

    ModelSpec spec = ModelSpec::make(Variant::vmem_sec, Parameterization::scalar, {"a", "b", "c", "d", "e"});
    ParamSet params;
    params.alpha = Vector::Constant(5, 0.1);
    params.beta = Vector::Constant(5, 0.8);
    params.theta = Vector::Ones(5);
    params.delta = 0.05;
    params.phi = 0.3;
    params.set_covariance(Matrix::Identity(5, 5) * 0.3);
    params.x_bar = Vector::Constant(5, 0.2);
    params.c = Vector::Constant(5, 1.0 / std::sqrt(5.0));
    const auto sim = simulate(spec, params, 100, 9).panel.with_split(80);

    const auto first = scratch("round1.csv"), second = scratch("round2.csv");
    save_panel_csv(sim, first);
    const auto back = load_panel_csv(first);
    save_panel_csv(back, second);
    CHECK(read_file(first) == read_file(second));
    CHECK(back.y() == sim.y());
    CHECK(back.split_index() == 80);
}

TEST_CASE("long CSV loading and validation") {
    const auto path = scratch("long.csv");
    write_file(path,
               "date,ticker,open,high,low,close\n"
               "2020-01-02,AAA,1,102,100,1\n2020-01-02,BBB,1,51,50,1\n"
               "2020-01-03,AAA,1,103,100,1\n2020-01-03,BBB,1,52,50,1\n");
    const auto panel = load_panel_csv(path, PanelFormat::automatic, day(2020, 1, 3));
    CHECK(panel.rows() == 2);
    CHECK(panel.split_index() == 1);

    const auto bad = scratch("long_bad.csv");
    write_file(bad, "date,ticker,high,low\n2020-01-02,AAA,102,100\n2020-01-03,AAA,99,100\n");
    try {
        load_panel_csv(bad);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("AAA") != std::string::npos);
    }

    const auto dup = scratch("long_dup.csv");
    write_file(dup, "date,ticker,high,low\n2020-01-02,AAA,102,100\n2020-01-02,AAA,103,100\n2020-01-03,AAA,103,100\n");
    CHECK_THROWS_AS(load_panel_csv(dup), Error);

    const auto ragged = scratch("wide_bad.csv");
    write_file(ragged, "date,AAA,BBB\n2020-01-02,1.5\n");
    CHECK_THROWS_AS(load_panel_csv(ragged), ParseError);
}
