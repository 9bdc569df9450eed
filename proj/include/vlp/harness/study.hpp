#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vlp/config.hpp"
#include "vlp/harness/generate.hpp"
#include "vlp/harness/metrics.hpp"

namespace vlp::harness {

// Canned studies:
//   model-selection        forest / gbt / mlp trained on captures, common test split
//   sim-vs-capture         gbt trained on captures vs on the clean sweep, tested on
//                          held-out captures (clean and noisy)
//   height-generalization  gbt trained on the clean sweep at one set of heights,
//                          tested on captures at others
struct StudyResult {
    std::string study;
    std::vector<EvalReport> reports;
    std::map<std::string, long long> counts;
    std::map<std::string, std::string> config;  // echo, without thread count

    const EvalReport& report(const std::string& name) const;
};

// `threads` overrides the config's run.threads when > 0.
StudyResult run_experiment(const KeyValueConfig& cfg, int threads = 0);

// report JSON, CDF CSV, grid CSV and SVG per report, plus summary.json.
std::vector<std::filesystem::path> write_study_outputs(const StudyResult& result,
                                                       const std::filesystem::path& dir,
                                                       const GridSpec& grid);

std::string study_summary_json(const StudyResult& result);

SweepSpec sweep_from_config(const KeyValueConfig& cfg, const std::string& heights_key,
                            const std::vector<double>& default_heights);
CaptureSpec capture_from_config(const KeyValueConfig& cfg, const geom::CameraIntrinsics& intr);
learn::ModelParams model_params_from_config(const KeyValueConfig& cfg);

}  // namespace vlp::harness
