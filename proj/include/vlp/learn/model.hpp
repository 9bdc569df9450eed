#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "vlp/geometry.hpp"
#include "vlp/learn/ensemble.hpp"
#include "vlp/learn/mlp.hpp"
#include "vlp/vision.hpp"

namespace vlp::learn {

enum class ModelKind { SingleTree, Forest, Gbt, Mlp };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct ModelParams {
    TreeParams tree;
    ForestParams forest;
    GbtParams gbt;
    MlpParams mlp;
};

// N x 8 pixel features, N x 3 metre targets.
struct TrainingSet {
    FeatureMatrix features{0, 8};
    std::vector<std::array<double, 3>> targets;

    std::size_t size() const { return targets.size(); }
    void add(const vision::FeatureVector& f, const geom::Vec3& target);
    std::vector<double> target_column(int axis) const;
    // Throws InvalidTrainingSet.
    void validate() const;
};

using AxisModel = std::variant<TreeEnsemble, Mlp>;

struct EnsembleModel {
    ModelKind kind = ModelKind::Gbt;
    ModelParams params;
    std::uint64_t seed = 0;
    std::array<AxisModel, 3> axes;

    geom::Vec3 predict(const vision::FeatureVector& f) const;
};

// One submodel per axis (x, y, z), each with its own derived seed.
EnsembleModel fit_position_model(const TrainingSet& data, ModelKind kind, const ModelParams& params,
                                 std::uint64_t seed, int threads = 1);

inline geom::Vec3 predict_position(const EnsembleModel& model, const vision::FeatureVector& f) {
    return model.predict(f);
}

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const EnsembleModel& model);
EnsembleModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const EnsembleModel& model);
EnsembleModel load_model(const std::filesystem::path& path);

}  // namespace vlp::learn
