#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "pme/csv.hpp"
#include "pme/report.hpp"
#include "support/panels.hpp"

using namespace pme;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

Run cli(const std::string& args) {
    const std::string cmd = std::string("\"") + PME_CLI_PATH + "\" " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("pme_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

void write_panel(const fs::path& file, const PanelDataset& panel) {
    std::ofstream out(file);
    write_csv_long(out, panel, "firm", "year");
}

}  // namespace

TEST_CASE("select-rank on a simulated single-relation panel") {
    const auto r = cli("--json select-rank --simulate --design var1 --r0 1 --n 200 --t 40 --seed 3");
    REQUIRE(r.status == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["version"] == "pme-report/1");
    for (const auto& row : j["rank_selection"]["thresholds"]) CHECK(row["r_tilde"] == 1);
    CHECK(j["sample"]["n"] == 200);
    CHECK(j["config"]["seed"] == 3);
}

TEST_CASE("simulate output is deterministic") {
    const std::string args = "simulate --design varma --r0 1 --n 40 --t 20 --reps 12 --seed 5 --kappa 0.5 --json";
    const auto a = cli(args);
    const auto b = cli(args + " --threads 3");
    REQUIRE(a.status == 0);
    CHECK(a.out == b.out);
    const auto rep = run_report_from_json(a.out);
    REQUIRE(rep.experiment);
    CHECK(rep.experiment->design == "varma");
    CHECK(rep.experiment->replications == 12);
}

TEST_CASE("estimate reproduces the library result exactly") {
    TempDir dir;
    const auto panel = testing_support::one_relation(80, 30, 0.5, -0.3, 11);
    write_panel(dir / "panel.csv", panel);

    const auto r = cli("--json estimate -i " + (dir / "panel.csv").string() + " --unit-col firm --time-col year");
    REQUIRE(r.status == 0);
    const auto rep = run_report_from_json(r.out);
    REQUIRE(rep.estimate);
    const auto expected = describe_estimate(estimate(panel, EstimationConfig{}));
    CHECK(*rep.estimate == expected);
    CHECK(rep.estimate->r == 1);

    SUBCASE("null hypotheses and fixed rank") {
        const auto t = cli("--json estimate -i " + (dir / "panel.csv").string() +
                           " --unit-col firm --time-col year --rank 1 --null \"-0.6;-2\"");
        REQUIRE(t.status == 0);
        const auto with_null = run_report_from_json(t.out);
        REQUIRE(with_null.estimate->t_stats);
        CHECK(with_null.estimate->t_stats->rows() == 2);
    }
    SUBCASE("table output") {
        const auto t = cli("estimate -i " + (dir / "panel.csv").string() + " --unit-col firm --time-col year");
        CHECK(t.status == 0);
        CHECK(t.out.find("w1") != std::string::npos);
    }
    SUBCASE("usage errors exit with status 2") {
        CHECK(cli("estimate -i " + (dir / "panel.csv").string() + " --unit-col firm --time-col year --rank 3").status ==
              2);
        CHECK(cli("estimate -i " + (dir / "panel.csv").string() + " --unit-col firm --time-col year --rank 0").status ==
              2);
        CHECK(cli("estimate --no-such-flag").status == 2);
        CHECK(cli("").status == 2);
    }
    SUBCASE("data errors exit with status 1") {
        CHECK(cli("estimate -i " + (dir / "missing.csv").string()).status == 1);
        std::ofstream(dir / "bad.csv") << "firm,year,x\na,1,1\na,1,2\n";
        CHECK(cli("select-rank -i " + (dir / "bad.csv").string() + " --unit-col firm --time-col year").status == 1);
    }
}

TEST_CASE("filter writes the kept panel and an exclusion log") {
    TempDir dir;
    std::ofstream(dir / "raw.csv") << [] {
        std::ostringstream s;
        s << "unit,time,x,y\n";
        for (int t = 1; t <= 25; ++t) s << "keep," << t << "," << 1 + t << "," << 2 + t << "\n";
        for (int t = 1; t <= 10; ++t) s << "short," << t << ",1,1\n";
        for (int t = 1; t <= 25; ++t) s << "neg," << t << "," << (t == 4 ? -1 : 1) << ",1\n";
        return s.str();
    }();
    const auto r = cli("filter -i " + (dir / "raw.csv").string() + " -o " + (dir / "clean.csv").string() + " --log " +
                       (dir / "log.csv").string() + " --positive --json");
    REQUIRE(r.status == 0);
    const auto cleaned = read_csv_long(dir / "clean.csv");
    REQUIRE(cleaned.units.size() == 1);
    CHECK(cleaned.units[0].unit_id == "keep");
    std::ifstream log(dir / "log.csv");
    std::stringstream text;
    text << log.rdbuf();
    CHECK(text.str().find("short,1,") != std::string::npos);
    CHECK(text.str().find("neg,2,") != std::string::npos);
    const auto rep = run_report_from_json(r.out);
    REQUIRE(rep.exclusions);
    CHECK(rep.exclusions->size() == 2);
}
