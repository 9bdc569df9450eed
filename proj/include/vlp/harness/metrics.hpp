#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "vlp/geometry.hpp"
#include "vlp/harness/dataset.hpp"
#include "vlp/learn/model.hpp"

namespace vlp::harness {

// 100 * ||pred - truth||, centimetres.
double error_3d(const geom::Vec3& pred, const geom::Vec3& truth);

struct CdfPoint {
    double error_cm = 0.0;
    double fraction = 0.0;
};

// Starts at (0, 0); one step of 1/n per sorted sample.
std::vector<CdfPoint> empirical_cdf(std::vector<double> errors);

// Nearest-rank quantile: smallest sample with CDF >= q.
double quantile(std::vector<double> values, double q);

struct GridCell {
    int grid_i = 0;
    int grid_j = 0;
    int count = 0;
    double mean_error_cm = 0.0;
};

struct ErrorSummary {
    double mean_cm = 0.0;
    double p90_cm = 0.0;
    double max_cm = 0.0;
};

struct EvalReport {
    std::string name;
    int rows = 0;
    ErrorSummary error_3d;
    std::array<ErrorSummary, 3> axis;  // absolute deviations per axis
    std::vector<CdfPoint> cdf_3d;
    std::array<std::vector<CdfPoint>, 3> cdf_axis;
    std::vector<GridCell> grid;
    std::vector<double> errors_cm;  // per test row, input order
    std::map<std::string, std::string> config;
};

EvalReport evaluate_predictions(const std::vector<geom::Vec3>& predictions, const Dataset& test,
                                const std::string& name = "");

// Throws EmptyTestSet.
EvalReport evaluate(const learn::EnsembleModel& model, const Dataset& test, const std::string& name = "");

std::string report_to_json(const EvalReport& report);
std::string cdf_to_csv(const EvalReport& report);
std::string grid_to_csv(const EvalReport& report);
std::string grid_to_svg(const EvalReport& report, double grid_extent_m, double grid_spacing_m);

}  // namespace vlp::harness
