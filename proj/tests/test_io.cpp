#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pme/csv.hpp"
#include "pme/error.hpp"
#include "pme/filters.hpp"
#include "pme/random.hpp"
#include "pme/report.hpp"
#include "support/panels.hpp"

using namespace pme;

namespace {

RawUnit raw_unit(std::string id, std::vector<std::int64_t> times, Matrix values) {
    return RawUnit{std::move(id), std::move(times), std::move(values)};
}

std::vector<std::int64_t> span(std::int64_t from, std::size_t count) {
    std::vector<std::int64_t> t(count);
    for (std::size_t k = 0; k < count; ++k) t[k] = from + static_cast<std::int64_t>(k);
    return t;
}

RawPanel positive_panel(std::size_t n, std::size_t t, std::uint64_t seed) {
    RandomStream rng(seed, 0, 0, StreamTag::Parameters);
    RawPanel p;
    p.variables = {"sales", "assets"};
    for (std::size_t i = 0; i < n; ++i) {
        Matrix v(static_cast<Eigen::Index>(t), 2);
        for (Eigen::Index s = 0; s < v.rows(); ++s) {
            v(s, 1) = rng.uniform(1.0, 2.0);
            v(s, 0) = v(s, 1) * rng.uniform(0.5, 1.5);
        }
        p.units.push_back(raw_unit("u" + std::to_string(i), span(2000, t), v));
    }
    return p;
}

std::vector<std::string> ids(const PanelDataset& p) {
    std::vector<std::string> out;
    for (const auto& u : p.units) out.push_back(u.unit_id);
    return out;
}

}  // namespace

TEST_CASE("format_double gives the shortest exact text") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5e-300) == "-2.5e-300");
    RandomStream rng(1, 0, 0, StreamTag::Parameters);
    for (int k = 0; k < 2000; ++k) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("CSV round trip is bit-exact") {
    const auto panel = testing_support::random_walks({7, 12, 9}, 3, 5);
    std::stringstream buf;
    write_csv_long(buf, panel);
    const auto back = to_panel(read_csv_long(buf));
    REQUIRE(back.n() == panel.n());
    CHECK(back.variable_names == panel.variable_names);
    for (std::size_t i = 0; i < panel.n(); ++i) {
        CHECK(back.units[i].unit_id == panel.units[i].unit_id);
        CHECK(back.units[i].times == panel.units[i].times);
        CHECK(back.units[i].values == panel.units[i].values);
    }
}

TEST_CASE("CSV reading: column selection, ordering, quoting") {
    std::istringstream in(
        "time,firm,x,\"note, text\",y\n"
        "2001,\"B\",1.5,a,2\n"
        "2000,\"B\",0.5,b,1\n"
        "2000,\"A \"\"x\"\"\",3,c,4\n");
    CsvColumns cols;
    cols.unit = "firm";
    cols.values = {"y", "x"};
    const auto raw = read_csv_long(in, cols);
    CHECK(raw.variables == std::vector<std::string>{"y", "x"});
    REQUIRE(raw.units.size() == 2);
    CHECK(raw.units[0].unit_id == "B");
    CHECK(raw.units[0].times == std::vector<std::int64_t>{2000, 2001});
    CHECK(raw.units[0].values == (Matrix(2, 2) << 1, 0.5, 2, 1.5).finished());
    CHECK(raw.units[1].unit_id == "A \"x\"");

    // Quoted identifiers survive a write and read.
    std::stringstream buf;
    write_csv_long(buf, raw);
    const auto back = read_csv_long(buf);
    CHECK(back.units[1].unit_id == "A \"x\"");
}

TEST_CASE("CSV errors carry line numbers") {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            read_csv_long(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("unit,time,x\na,1,1\na,2,2\na,1,3\n") == 4);  // duplicate key
    CHECK(line_of("unit,time,x\na,1,\n") == 2);                 // empty cell
    CHECK(line_of("unit,time,x\na,1,abc\n") == 2);              // not a number
    CHECK(line_of("unit,time,x\na,1,2,3\n") == 2);              // wrong width
    CHECK(line_of("unit,time,x\na,1.5,2\n") == 2);              // time must be an integer
    CHECK(line_of("unit,time,x\n\"a,1,2\n") == 2);              // unterminated quote
    std::istringstream missing_col("id,time,x\na,1,2\n");
    CHECK_THROWS_AS(read_csv_long(missing_col), ParseError);
    CHECK_THROWS_AS(read_csv_long(std::filesystem::path("/nonexistent/panel.csv")), Error);
}

TEST_CASE("filter 1: gaps and minimum length") {
    RawPanel p;
    p.variables = {"x"};
    p.units.push_back(raw_unit("short", span(1, 19), Matrix::Ones(19, 1)));
    p.units.push_back(raw_unit("ok", span(1, 20), Matrix::Ones(20, 1)));
    auto gap_times = span(1, 10);
    const auto tail = span(12, 25);
    for (auto t : tail) gap_times.push_back(t);
    p.units.push_back(raw_unit("gappy", gap_times, Matrix::Ones(35, 1)));

    const auto dropped = apply_filters(p, FilterSpec{});
    CHECK(ids(dropped.panel) == std::vector<std::string>{"ok"});
    REQUIRE(dropped.exclusions.size() == 2);
    CHECK(dropped.exclusions[0] == Exclusion{"short", 1, "T_i=19 below minimum 20"});
    CHECK(dropped.exclusions[1].unit_id == "gappy");
    CHECK(dropped.exclusions[1].filter == 1);

    FilterSpec longest;
    longest.gap_policy = GapPolicy::LongestRun;
    const auto kept = apply_filters(p, longest);
    CHECK(ids(kept.panel) == std::vector<std::string>{"ok", "gappy"});
    CHECK(kept.panel.units[1].times == tail);
}

TEST_CASE("filter 2 and the log transform") {
    auto p = positive_panel(5, 25, 2);
    p.units[3].values(7, 1) = 0.0;
    FilterSpec spec;
    spec.require_positive = true;
    const auto r = apply_filters(p, spec);
    CHECK(r.panel.n() == 4);
    REQUIRE(r.exclusions.size() == 1);
    CHECK(r.exclusions[0].unit_id == "u3");
    CHECK(r.exclusions[0].filter == 2);

    spec.log_transform = true;
    const auto logged = apply_filters(p, spec);
    CHECK(logged.panel.units[0].values(0, 0) == std::log(p.units[0].values(0, 0)));

    FilterSpec no_check;
    no_check.log_transform = true;
    CHECK_THROWS_AS(apply_filters(p, no_check), InputError);
}

TEST_CASE("filter 3: planted outliers are exactly the units trimmed") {
    auto p = positive_panel(100, 25, 3);
    p.units[17].values.col(0) *= 50.0;   // extreme high ratio
    p.units[64].values.col(0) /= 50.0;   // extreme low ratio
    FilterSpec spec;
    spec.trim_ratios.push_back({"sales", "assets", 1.0, 99.0});
    const auto r = apply_filters(p, spec);
    CHECK(r.panel.n() == 98);
    REQUIRE(r.exclusions.size() == 2);
    std::vector<std::string> gone{r.exclusions[0].unit_id, r.exclusions[1].unit_id};
    std::sort(gone.begin(), gone.end());
    CHECK(gone == std::vector<std::string>{"u17", "u64"});
    for (const auto& e : r.exclusions) CHECK(e.filter == 3);

    // Sort-based oracle: one unit leaves each tail when 1% of 100 is trimmed.
    std::vector<std::pair<double, std::string>> ratios;
    for (const auto& u : p.units) ratios.emplace_back((u.values.col(0).array() / u.values.col(1).array()).mean(), u.unit_id);
    std::sort(ratios.begin(), ratios.end());
    CHECK(ratios.front().second == "u64");
    CHECK(ratios.back().second == "u17");

    // Wider trimming drops five from each tail.
    spec.trim_ratios[0] = {"sales", "assets", 5.0, 95.0};
    const auto wide = apply_filters(p, spec);
    CHECK(wide.panel.n() == 90);
    for (std::size_t k = 0; k < 5; ++k) {
        const auto kept = ids(wide.panel);
        CHECK(std::find(kept.begin(), kept.end(), ratios[k].second) == kept.end());
        CHECK(std::find(kept.begin(), kept.end(), ratios[99 - k].second) == kept.end());
    }
    CHECK_THROWS_AS(apply_filters(p, FilterSpec{1, false, false, {{"sales", "missing"}}, GapPolicy::Drop}), InputError);
    CHECK_THROWS_AS(apply_filters(p, FilterSpec{1, false, false, {{"sales", "assets", 60, 40}}, GapPolicy::Drop}),
                    InputError);
}

TEST_CASE("nearest-rank percentile") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(nearest_rank_percentile(v, 0) == 1);
    CHECK(nearest_rank_percentile(v, 10) == 1);
    CHECK(nearest_rank_percentile(v, 11) == 2);
    CHECK(nearest_rank_percentile(v, 50) == 5);
    CHECK(nearest_rank_percentile(v, 100) == 10);
    CHECK_THROWS_AS(nearest_rank_percentile({}, 50), InputError);
    CHECK_THROWS_AS(nearest_rank_percentile(v, 101), InputError);
}

TEST_CASE("filters 1 and 2 are idempotent; an empty result throws") {
    auto p = positive_panel(30, 25, 4);
    p.units[2].values(0, 0) = -1.0;
    p.units[5].times.resize(10);
    p.units[5].values.conservativeResize(10, 2);
    FilterSpec spec;
    spec.require_positive = true;
    const auto once = apply_filters(p, spec);
    const auto twice = apply_filters(to_raw(once.panel), spec);
    CHECK(twice.exclusions.empty());
    CHECK(ids(twice.panel) == ids(once.panel));
    for (std::size_t i = 0; i < once.panel.n(); ++i) CHECK(twice.panel.units[i].values == once.panel.units[i].values);

    spec.min_t = 100;
    CHECK_THROWS_AS(apply_filters(p, spec), InputError);
}

TEST_CASE("JSON report round trip") {
    const auto panel = testing_support::one_relation(60, 30, 0.5, -0.3, 6);
    EstimationConfig cfg;
    cfg.null_values = Matrix::Zero(2, 1);
    const auto result = estimate(panel, cfg);
    REQUIRE(result.outcome == EstimationOutcome::Estimated);

    RunReport rep;
    rep.config.command = "estimate";
    rep.config.deltas = {0.25};
    rep.config.variables = panel.variable_names;
    rep.config.input = "panel.csv";
    rep.sample = describe_sample(panel);
    rep.rank_selection = describe_selection(result.selection->eigenvalues, result.selection->t_ave, {0.25, 0.5}, 1.0);
    rep.estimate = describe_estimate(result);
    rep.exclusions = std::vector<Exclusion>{{"x", 1, "gap in time index"}};

    ExperimentSpec spec;
    spec.cells = {{20, 15}};
    spec.replications = 5;
    rep.experiment = run_experiment(spec);
    rep.config.seed = spec.seed;

    const std::string text = to_json(rep);
    const auto back = run_report_from_json(text);
    CHECK(back == rep);
    CHECK(to_json(back) == text);
    CHECK(text.find("\"version\": \"pme-report/1\"") != std::string::npos);

    CHECK(rep.sample->n == 60);
    CHECK(rep.sample->t_min == 30);
    CHECK(rep.sample->t_sum == 1800);
}

TEST_CASE("JSON report errors") {
    CHECK_THROWS_AS(run_report_from_json("{not json"), ParseError);
    CHECK_THROWS_AS(run_report_from_json("{\"version\": \"pme-report/0\", \"config\": {}}"), ParseError);
    CHECK_THROWS_AS(run_report_from_json("[]"), ParseError);
    RunReport minimal;
    minimal.config.command = "select-rank";
    CHECK(run_report_from_json(to_json(minimal)) == minimal);
}
