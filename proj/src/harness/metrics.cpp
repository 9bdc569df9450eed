#include "vlp/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "vlp/errors.hpp"
#include "vlp/harness/generate.hpp"

namespace vlp::harness {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ErrorSummary summarize(const std::vector<double>& values) {
    ErrorSummary s;
    if (values.empty()) return s;
    s.mean_cm = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.p90_cm = quantile(values, 0.9);
    s.max_cm = *std::max_element(values.begin(), values.end());
    return s;
}

nlohmann::json summary_json(const ErrorSummary& s) {
    return {{"mean_cm", s.mean_cm}, {"p90_cm", s.p90_cm}, {"max_cm", s.max_cm}};
}

nlohmann::json cdf_json(const std::vector<CdfPoint>& cdf) {
    auto arr = nlohmann::json::array();
    for (const auto& p : cdf) arr.push_back({p.error_cm, p.fraction});
    return arr;
}

}  // namespace

double error_3d(const geom::Vec3& pred, const geom::Vec3& truth) { return 100.0 * (pred - truth).norm(); }

std::vector<CdfPoint> empirical_cdf(std::vector<double> errors) {
    std::sort(errors.begin(), errors.end());
    std::vector<CdfPoint> cdf;
    cdf.reserve(errors.size() + 1);
    cdf.push_back({0.0, 0.0});
    const double n = static_cast<double>(errors.size());
    for (std::size_t k = 0; k < errors.size(); ++k) cdf.push_back({errors[k], static_cast<double>(k + 1) / n});
    return cdf;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    // Smallest rank k with k / n >= q; the epsilon absorbs q * n rounding up.
    auto k = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    k = std::clamp<std::size_t>(k, 1, values.size());
    return values[k - 1];
}

EvalReport evaluate_predictions(const std::vector<geom::Vec3>& predictions, const Dataset& test,
                                const std::string& name) {
    if (test.rows.empty()) throw EmptyTestSet("evaluation needs at least one test row");
    if (predictions.size() != test.rows.size())
        throw std::invalid_argument("one prediction per test row is required");
    EvalReport rep;
    rep.name = name;
    rep.rows = static_cast<int>(test.rows.size());
    std::array<std::vector<double>, 3> axis_errors;
    std::map<std::pair<int, int>, std::pair<int, double>> cells;
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        const auto& p = predictions[k];
        const auto& t = test.rows[k].target;
        const double e = error_3d(p, t);
        rep.errors_cm.push_back(e);
        axis_errors[0].push_back(100.0 * std::abs(p.x - t.x));
        axis_errors[1].push_back(100.0 * std::abs(p.y - t.y));
        axis_errors[2].push_back(100.0 * std::abs(p.z - t.z));
        auto& cell = cells[{test.rows[k].grid_i, test.rows[k].grid_j}];
        ++cell.first;
        cell.second += e;
    }
    rep.error_3d = summarize(rep.errors_cm);
    rep.cdf_3d = empirical_cdf(rep.errors_cm);
    for (int a = 0; a < 3; ++a) {
        rep.axis[a] = summarize(axis_errors[a]);
        rep.cdf_axis[a] = empirical_cdf(axis_errors[a]);
    }
    for (const auto& [ij, cell] : cells)
        rep.grid.push_back({ij.first, ij.second, cell.first, cell.second / cell.first});
    return rep;
}

EvalReport evaluate(const learn::EnsembleModel& model, const Dataset& test, const std::string& name) {
    if (test.rows.empty()) throw EmptyTestSet("evaluation needs at least one test row");
    std::vector<geom::Vec3> predictions;
    predictions.reserve(test.rows.size());
    for (const auto& r : test.rows) predictions.push_back(model.predict(r.features));
    return evaluate_predictions(predictions, test, name);
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["name"] = report.name;
    j["rows"] = report.rows;
    j["error_3d"] = summary_json(report.error_3d);
    const char* axes[] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) j["axis"][axes[a]] = summary_json(report.axis[a]);
    j["cdf_3d"] = cdf_json(report.cdf_3d);
    for (int a = 0; a < 3; ++a) j["cdf_axis"][axes[a]] = cdf_json(report.cdf_axis[a]);
    auto grid = nlohmann::json::array();
    for (const auto& c : report.grid)
        grid.push_back({{"grid_i", c.grid_i}, {"grid_j", c.grid_j}, {"count", c.count}, {"mean_cm", c.mean_error_cm}});
    j["grid"] = grid;
    j["config"] = report.config;
    return j.dump(1) + "\n";
}

std::string cdf_to_csv(const EvalReport& report) {
    std::string out = "curve,error_cm,fraction\n";
    auto emit = [&](const char* curve, const std::vector<CdfPoint>& cdf) {
        for (const auto& p : cdf) out += std::string(curve) + ',' + num(p.error_cm) + ',' + num(p.fraction) + '\n';
    };
    emit("3d", report.cdf_3d);
    emit("x", report.cdf_axis[0]);
    emit("y", report.cdf_axis[1]);
    emit("z", report.cdf_axis[2]);
    return out;
}

std::string grid_to_csv(const EvalReport& report) {
    std::string out = "grid_i,grid_j,count,mean_error_cm\n";
    for (const auto& c : report.grid)
        out += std::to_string(c.grid_i) + ',' + std::to_string(c.grid_j) + ',' + std::to_string(c.count) + ',' +
               num(c.mean_error_cm) + '\n';
    return out;
}

std::string grid_to_svg(const EvalReport& report, double grid_extent_m, double grid_spacing_m) {
    GridSpec spec{grid_extent_m, grid_spacing_m};
    const int n = spec.count();
    const int cell = 60, margin = 40;
    const int size = 2 * margin + n * cell;
    double worst = 0.0;
    for (const auto& c : report.grid) worst = std::max(worst, c.mean_error_cm);
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" font-family=\"sans-serif\">\n",
                  size, size + 20);
    out += buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"24\" font-size=\"14\">%s: mean error per grid point (cm)</text>\n",
                  margin, report.name.c_str());
    out += buf;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"#eeeeee\" stroke=\"#999999\"/>\n",
                          margin + i * cell, margin + (n - 1 - j) * cell, cell, cell);
            out += buf;
        }
    for (const auto& c : report.grid) {
        if (c.grid_i < 0 || c.grid_i >= n || c.grid_j < 0 || c.grid_j >= n) continue;
        const double t = worst > 0.0 ? c.mean_error_cm / worst : 0.0;
        const int r = static_cast<int>(std::lround(255.0 * t));
        const int g = static_cast<int>(std::lround(200.0 * (1.0 - t)));
        const int x = margin + c.grid_i * cell, y = margin + (n - 1 - c.grid_j) * cell;
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"rgb(%d,%d,80)\" stroke=\"#333333\"/>\n",
                      x, y, cell, cell, r, g);
        out += buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%d\" y=\"%d\" font-size=\"12\" text-anchor=\"middle\" fill=\"white\">%.2f</text>\n",
                      x + cell / 2, y + cell / 2 + 4, c.mean_error_cm);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" font-size=\"12\">x right, y up; %d x %d points, %.2f m spacing</text>\n",
                  margin, size + 8, n, n, grid_spacing_m);
    out += buf;
    out += "</svg>\n";
    return out;
}

}  // namespace vlp::harness
