#include "pme/report.hpp"

#include <algorithm>

#include <json.hpp>

#include "pme/error.hpp"
#include "pme/moments.hpp"

namespace pme {

using nlohmann::json;

namespace {

bool same(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same(const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || same(*a, *b);
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from(const json& j) {
    if (!j.is_array()) throw ParseError("matrix must be an array of rows", 0);
    if (j.empty()) return Matrix(0, 0);
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ParseError("ragged matrix in report", 0);
        }
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
    return m;
}

template <class T>
void put(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

void put_matrix(json& j, const char* key, const std::optional<Matrix>& v) {
    if (v) j[key] = matrix_json(*v);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

std::optional<Matrix> get_matrix(const json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    return matrix_from(j.at(key));
}

json config_json(const ConfigEcho& c) {
    json j{{"command", c.command},
           {"q", c.q},
           {"c", c.c},
           {"deltas", c.deltas},
           {"identification", c.identification},
           {"variables", c.variables},
           {"scale_for_selection", c.scale_for_selection},
           {"threshold_average", c.threshold_average}};
    put(j, "rank", c.rank);
    put(j, "input", c.input);
    put(j, "seed", c.seed);
    return j;
}

ConfigEcho config_from(const json& j) {
    ConfigEcho c;
    c.command = j.at("command").get<std::string>();
    c.q = j.at("q").get<std::string>();
    c.c = j.at("c").get<double>();
    c.deltas = j.at("deltas").get<std::vector<double>>();
    c.identification = j.at("identification").get<std::string>();
    c.variables = j.at("variables").get<std::vector<std::string>>();
    c.scale_for_selection = j.at("scale_for_selection").get<bool>();
    c.threshold_average = j.at("threshold_average").get<std::string>();
    c.rank = get_opt<int>(j, "rank");
    c.input = get_opt<std::string>(j, "input");
    c.seed = get_opt<std::uint64_t>(j, "seed");
    return c;
}

json selection_json(const RankSelectionReport& s) {
    json thresholds = json::array();
    for (const auto& t : s.by_delta) {
        thresholds.push_back({{"delta", t.delta}, {"threshold", t.threshold}, {"r_tilde", t.r_tilde}});
    }
    return {{"eigenvalues", s.eigenvalues}, {"t_ave", s.t_ave}, {"thresholds", thresholds}};
}

RankSelectionReport selection_from(const json& j) {
    RankSelectionReport s;
    s.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    s.t_ave = j.at("t_ave").get<double>();
    for (const auto& t : j.at("thresholds")) {
        s.by_delta.push_back(
            {t.at("delta").get<double>(), t.at("threshold").get<double>(), t.at("r_tilde").get<int>()});
    }
    return s;
}

json estimate_json(const EstimateReport& e) {
    json j{{"outcome", e.outcome}, {"r", e.r},           {"b_hat", matrix_json(e.b_hat)},
           {"q_used", e.q_used},   {"t_ave", e.t_ave},   {"diagnostics", e.diagnostics}};
    put_matrix(j, "theta_hat", e.theta_hat);
    put_matrix(j, "std_errors", e.std_errors);
    put_matrix(j, "t_stats", e.t_stats);
    put_matrix(j, "null_values", e.null_values);
    put_matrix(j, "var_vec_theta", e.var_vec_theta);
    return j;
}

EstimateReport estimate_from(const json& j) {
    EstimateReport e;
    e.outcome = j.at("outcome").get<std::string>();
    e.r = j.at("r").get<int>();
    e.b_hat = matrix_from(j.at("b_hat"));
    e.q_used = j.at("q_used").get<int>();
    e.t_ave = j.at("t_ave").get<double>();
    e.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    e.theta_hat = get_matrix(j, "theta_hat");
    e.std_errors = get_matrix(j, "std_errors");
    e.t_stats = get_matrix(j, "t_stats");
    e.null_values = get_matrix(j, "null_values");
    e.var_vec_theta = get_matrix(j, "var_vec_theta");
    return e;
}

json sample_json(const SampleReport& s) {
    return {{"n", s.n},         {"m", s.m},         {"t_ave", s.t_ave}, {"t_ave_harmonic", s.t_ave_harmonic},
            {"t_min", s.t_min}, {"t_max", s.t_max}, {"t_sum", s.t_sum}};
}

SampleReport sample_from(const json& j) {
    SampleReport s;
    s.n = j.at("n").get<std::size_t>();
    s.m = j.at("m").get<std::size_t>();
    s.t_ave = j.at("t_ave").get<double>();
    s.t_ave_harmonic = j.at("t_ave_harmonic").get<double>();
    s.t_min = j.at("t_min").get<std::size_t>();
    s.t_max = j.at("t_max").get<std::size_t>();
    s.t_sum = j.at("t_sum").get<std::size_t>();
    return s;
}

json experiment_json(const ExperimentReport& r) {
    json cells = json::array();
    for (const auto& c : r.cells) {
        json by_q = json::array();
        for (const auto& q : c.by_q) {
            json selection = json::array();
            for (const auto& s : q.selection) selection.push_back({{"delta", s.delta}, {"frequency", s.frequency}});
            json coefficients = json::array();
            for (const auto& k : q.coefficients) {
                coefficients.push_back({{"name", k.name},
                                        {"truth", k.truth},
                                        {"bias", k.bias},
                                        {"rmse", k.rmse},
                                        {"size", k.size},
                                        {"power", k.power},
                                        {"mean_se", k.mean_se},
                                        {"count", k.count}});
            }
            by_q.push_back(
                {{"q", q.q}, {"selection", selection}, {"coefficients", coefficients}, {"failures", q.failures}});
        }
        json cell{{"n", c.n},
                  {"t", c.t},
                  {"replications", c.replications},
                  {"generation_failures", c.generation_failures},
                  {"mean_pr2", c.mean_pr2},
                  {"by_q", by_q}};
        put(cell, "mean_kappa", c.mean_kappa);
        cells.push_back(std::move(cell));
    }
    return {{"design", r.design},
            {"description", r.description},
            {"generator", r.generator},
            {"seed", r.seed},
            {"replications", r.replications},
            {"r0", r.r0},
            {"m", r.m},
            {"power_shift", r.power_shift},
            {"cells", cells}};
}

ExperimentReport experiment_from(const json& j) {
    ExperimentReport r;
    r.design = j.at("design").get<std::string>();
    r.description = j.at("description").get<std::string>();
    r.generator = j.at("generator").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.replications = j.at("replications").get<int>();
    r.r0 = j.at("r0").get<int>();
    r.m = j.at("m").get<int>();
    r.power_shift = j.at("power_shift").get<double>();
    for (const auto& jc : j.at("cells")) {
        CellReport c;
        c.n = jc.at("n").get<std::size_t>();
        c.t = jc.at("t").get<std::size_t>();
        c.replications = jc.at("replications").get<int>();
        c.generation_failures = jc.at("generation_failures").get<int>();
        c.mean_pr2 = jc.at("mean_pr2").get<double>();
        c.mean_kappa = get_opt<double>(jc, "mean_kappa");
        for (const auto& jq : jc.at("by_q")) {
            QSummary q;
            q.q = jq.at("q").get<int>();
            q.failures = jq.at("failures").get<int>();
            for (const auto& js : jq.at("selection")) {
                q.selection.push_back({js.at("delta").get<double>(), js.at("frequency").get<std::vector<double>>()});
            }
            for (const auto& jk : jq.at("coefficients")) {
                CoefficientSummary k;
                k.name = jk.at("name").get<std::string>();
                k.truth = jk.at("truth").get<double>();
                k.bias = jk.at("bias").get<double>();
                k.rmse = jk.at("rmse").get<double>();
                k.size = jk.at("size").get<double>();
                k.power = jk.at("power").get<double>();
                k.mean_se = jk.at("mean_se").get<double>();
                k.count = jk.at("count").get<int>();
                q.coefficients.push_back(std::move(k));
            }
            c.by_q.push_back(std::move(q));
        }
        r.cells.push_back(std::move(c));
    }
    return r;
}

}  // namespace

bool operator==(const EstimateReport& a, const EstimateReport& b) {
    return a.outcome == b.outcome && a.r == b.r && same(a.b_hat, b.b_hat) && same(a.theta_hat, b.theta_hat) &&
           same(a.std_errors, b.std_errors) && same(a.t_stats, b.t_stats) && same(a.null_values, b.null_values) &&
           same(a.var_vec_theta, b.var_vec_theta) && a.q_used == b.q_used && a.t_ave == b.t_ave &&
           a.diagnostics == b.diagnostics;
}

SampleReport describe_sample(const PanelDataset& panel) {
    SampleReport s;
    s.n = panel.n();
    s.m = panel.m();
    if (panel.n() == 0) return s;
    s.t_min = panel.units.front().length();
    double inv = 0.0;
    for (const auto& u : panel.units) {
        const auto t = u.length();
        s.t_sum += t;
        s.t_min = std::min(s.t_min, t);
        s.t_max = std::max(s.t_max, t);
        inv += 1.0 / static_cast<double>(t);
    }
    if (s.t_min == s.t_max) {
        s.t_ave = s.t_ave_harmonic = static_cast<double>(s.t_min);
    } else {
        s.t_ave = static_cast<double>(s.t_sum) / static_cast<double>(s.n);
        s.t_ave_harmonic = static_cast<double>(s.n) / inv;
    }
    return s;
}

RankSelectionReport describe_selection(const Vector& eigenvalues, double t_ave, const std::vector<double>& deltas,
                                       double c) {
    RankSelectionReport s;
    s.eigenvalues.assign(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
    s.t_ave = t_ave;
    for (double d : deltas) {
        const auto sel = select_rank(eigenvalues, t_ave, d, c);
        s.by_delta.push_back({d, sel.threshold, sel.r_tilde});
    }
    return s;
}

EstimateReport describe_estimate(const EstimationResult& result) {
    EstimateReport e;
    e.outcome = to_string(result.outcome);
    e.diagnostics = result.diagnostics;
    if (!result.estimate) return e;
    const auto& est = *result.estimate;
    e.r = est.r;
    e.b_hat = est.b_hat;
    e.theta_hat = est.theta_hat;
    e.std_errors = est.std_errors;
    e.t_stats = est.t_stats;
    e.null_values = est.null_values;
    e.var_vec_theta = est.var_vec_theta;
    e.q_used = est.q_used;
    e.t_ave = est.t_ave;
    return e;
}

std::string to_json(const RunReport& report) {
    json j{{"version", kReportVersion}, {"config", config_json(report.config)}};
    if (report.rank_selection) j["rank_selection"] = selection_json(*report.rank_selection);
    if (report.estimate) j["estimate"] = estimate_json(*report.estimate);
    if (report.sample) j["sample"] = sample_json(*report.sample);
    if (report.exclusions) {
        json ex = json::array();
        for (const auto& e : *report.exclusions) {
            ex.push_back({{"unit_id", e.unit_id}, {"filter", e.filter}, {"reason", e.reason}});
        }
        j["exclusions"] = std::move(ex);
    }
    if (report.experiment) j["experiment"] = experiment_json(*report.experiment);
    return j.dump(2) + "\n";
}

RunReport run_report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
    }
    try {
        if (j.value("version", std::string()) != kReportVersion) throw ParseError("unsupported report version", 0);
        RunReport r;
        r.config = config_from(j.at("config"));
        if (j.contains("rank_selection")) r.rank_selection = selection_from(j.at("rank_selection"));
        if (j.contains("estimate")) r.estimate = estimate_from(j.at("estimate"));
        if (j.contains("sample")) r.sample = sample_from(j.at("sample"));
        if (j.contains("exclusions")) {
            std::vector<Exclusion> ex;
            for (const auto& e : j.at("exclusions")) {
                ex.push_back({e.at("unit_id").get<std::string>(), e.at("filter").get<int>(),
                              e.at("reason").get<std::string>()});
            }
            r.exclusions = std::move(ex);
        }
        if (j.contains("experiment")) r.experiment = experiment_from(j.at("experiment"));
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed report: ") + e.what(), 0);
    }
}

}  // namespace pme
