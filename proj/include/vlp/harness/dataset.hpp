#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vlp/geometry.hpp"
#include "vlp/learn/model.hpp"
#include "vlp/vision.hpp"

namespace vlp::harness {

enum class SourceTag { CleanSim, NoisySim };
std::string to_string(SourceTag tag);
SourceTag parse_source_tag(const std::string& text);

struct DatasetRow {
    vision::FeatureVector features{};
    geom::Vec3 target;  // regression label, metres
    geom::Attitude attitude;
    int grid_i = 0;
    int grid_j = 0;
    double height_m = 0.0;
    SourceTag source = SourceTag::CleanSim;
    int sample = 0;  // index within its location
};

struct LocationKey {
    double height_m;
    int grid_i;
    int grid_j;
    auto operator<=>(const LocationKey&) const = default;
};

struct Dataset {
    std::vector<DatasetRow> rows;
    long long candidates = 0;       // poses considered
    long long rejected_fov = 0;     // failed projection or the FoV filter
    long long vision_failures = 0;  // dropped by the vision pipeline

    learn::TrainingSet training_set() const;
    Dataset filter_heights(const std::vector<double>& heights) const;
};

// Columns x,y,z,roll,pitch,yaw,grid_i,grid_j,height,u1,v1,...,u4,v4,source.
std::string dataset_to_csv(const Dataset& ds);
Dataset dataset_from_csv(const std::string& text);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

// Features-only CSV (u1..v4), as written by `extract`.
std::string features_to_csv(const std::vector<vision::FeatureVector>& rows);

}  // namespace vlp::harness
