#include "vlp/learn/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vlp/errors.hpp"
#include "vlp/parallel.hpp"
#include "vlp/rng.hpp"

namespace vlp::learn {

using nlohmann::json;

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::SingleTree: return "tree";
        case ModelKind::Forest: return "forest";
        case ModelKind::Gbt: return "gbt";
        case ModelKind::Mlp: return "mlp";
    }
    return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
    if (name == "tree" || name == "single-tree") return ModelKind::SingleTree;
    if (name == "forest" || name == "rf") return ModelKind::Forest;
    if (name == "gbt" || name == "xgboost") return ModelKind::Gbt;
    if (name == "mlp") return ModelKind::Mlp;
    throw std::invalid_argument("unknown model kind '" + name + "'");
}

void TrainingSet::add(const vision::FeatureVector& f, const geom::Vec3& target) {
    features.append_row(f);
    targets.push_back({target.x, target.y, target.z});
}

std::vector<double> TrainingSet::target_column(int axis) const {
    std::vector<double> out;
    out.reserve(targets.size());
    for (const auto& t : targets) out.push_back(t[static_cast<std::size_t>(axis)]);
    return out;
}

void TrainingSet::validate() const {
    if (targets.empty()) throw InvalidTrainingSet("training set is empty");
    if (features.rows() != targets.size()) throw InvalidTrainingSet("feature and target row counts differ");
    if (features.cols() != 8) throw InvalidTrainingSet("expected 8 feature columns");
    for (double v : features.data())
        if (!std::isfinite(v)) throw InvalidTrainingSet("non-finite feature value");
    for (const auto& t : targets)
        for (double v : t)
            if (!std::isfinite(v)) throw InvalidTrainingSet("non-finite target value");
}

geom::Vec3 EnsembleModel::predict(const vision::FeatureVector& f) const {
    std::array<double, 3> out{};
    for (std::size_t a = 0; a < 3; ++a)
        out[a] = std::visit([&](const auto& m) { return m.predict(f); }, axes[a]);
    return {out[0], out[1], out[2]};
}

EnsembleModel fit_position_model(const TrainingSet& data, ModelKind kind, const ModelParams& params,
                                 std::uint64_t seed, int threads) {
    data.validate();
    EnsembleModel model;
    model.kind = kind;
    model.params = params;
    model.seed = seed;
    auto fit_axis = [&](std::size_t axis, int inner_threads) -> AxisModel {
        const std::vector<double> y = data.target_column(static_cast<int>(axis));
        const std::uint64_t axis_seed = derive_seed(seed, {axis});
        switch (kind) {
            case ModelKind::SingleTree: {
                Rng rng(axis_seed);
                TreeEnsemble single;
                single.trees.push_back(fit_tree(data.features, y, params.tree, rng));
                return single;
            }
            case ModelKind::Forest: return fit_forest(data.features, y, params.forest, axis_seed, inner_threads);
            case ModelKind::Gbt: return fit_gbt(data.features, y, params.gbt, axis_seed);
            case ModelKind::Mlp: return fit_mlp(data.features, y, params.mlp, axis_seed);
        }
        throw std::logic_error("unhandled model kind");
    };
    if (kind == ModelKind::Forest) {
        for (std::size_t a = 0; a < 3; ++a) model.axes[a] = fit_axis(a, threads);
    } else {
        parallel_for(3, threads, [&](std::size_t a) { model.axes[a] = fit_axis(a, 1); });
    }
    return model;
}

namespace {

json tree_params_json(const TreeParams& p) {
    return {{"max_depth", p.max_depth}, {"min_leaf", p.min_leaf}, {"feature_subset_size", p.feature_subset_size}};
}

TreeParams tree_params_from(const json& j) {
    TreeParams p;
    p.max_depth = j.at("max_depth").get<int>();
    p.min_leaf = j.at("min_leaf").get<int>();
    p.feature_subset_size = j.at("feature_subset_size").get<int>();
    return p;
}

json params_json(const ModelParams& p) {
    return {
        {"tree", tree_params_json(p.tree)},
        {"forest", {{"n_trees", p.forest.n_trees}, {"bootstrap", p.forest.bootstrap}, {"tree", tree_params_json(p.forest.tree)}}},
        {"gbt",
         {{"rounds", p.gbt.rounds},
          {"learning_rate", p.gbt.learning_rate},
          {"max_depth", p.gbt.max_depth},
          {"lambda", p.gbt.lambda},
          {"gamma", p.gbt.gamma},
          {"min_child_weight", p.gbt.min_child_weight}}},
        {"mlp",
         {{"hidden", p.mlp.hidden},
          {"learning_rate", p.mlp.learning_rate},
          {"epochs", p.mlp.epochs},
          {"batch_size", p.mlp.batch_size},
          {"l2", p.mlp.l2},
          {"beta1", p.mlp.beta1},
          {"beta2", p.mlp.beta2},
          {"epsilon", p.mlp.epsilon},
          {"standardize", p.mlp.standardize}}},
    };
}

ModelParams params_from(const json& j) {
    ModelParams p;
    p.tree = tree_params_from(j.at("tree"));
    const json& f = j.at("forest");
    p.forest.n_trees = f.at("n_trees").get<int>();
    p.forest.bootstrap = f.at("bootstrap").get<bool>();
    p.forest.tree = tree_params_from(f.at("tree"));
    const json& g = j.at("gbt");
    p.gbt.rounds = g.at("rounds").get<int>();
    p.gbt.learning_rate = g.at("learning_rate").get<double>();
    p.gbt.max_depth = g.at("max_depth").get<int>();
    p.gbt.lambda = g.at("lambda").get<double>();
    p.gbt.gamma = g.at("gamma").get<double>();
    p.gbt.min_child_weight = g.at("min_child_weight").get<double>();
    const json& m = j.at("mlp");
    p.mlp.hidden = m.at("hidden").get<std::vector<int>>();
    p.mlp.learning_rate = m.at("learning_rate").get<double>();
    p.mlp.epochs = m.at("epochs").get<int>();
    p.mlp.batch_size = m.at("batch_size").get<int>();
    p.mlp.l2 = m.at("l2").get<double>();
    p.mlp.beta1 = m.at("beta1").get<double>();
    p.mlp.beta2 = m.at("beta2").get<double>();
    p.mlp.epsilon = m.at("epsilon").get<double>();
    p.mlp.standardize = m.at("standardize").get<bool>();
    return p;
}

json axis_json(const AxisModel& axis) {
    if (const auto* ens = std::get_if<TreeEnsemble>(&axis)) {
        json trees = json::array();
        for (const Tree& t : ens->trees) {
            json nodes = json::array();
            // [feature, threshold, left, right, value]
            for (const TreeNode& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            trees.push_back({{"nodes", std::move(nodes)}});
        }
        return {{"type", "trees"},
                {"combine", ens->combine == TreeEnsemble::Combine::Mean ? "mean" : "additive"},
                {"base_score", ens->base_score},
                {"learning_rate", ens->learning_rate},
                {"trees", std::move(trees)}};
    }
    const Mlp& mlp = std::get<Mlp>(axis);
    std::vector<double> mean(mlp.feature_mean().data(), mlp.feature_mean().data() + mlp.feature_mean().size());
    std::vector<double> scale(mlp.feature_scale().data(), mlp.feature_scale().data() + mlp.feature_scale().size());
    return {{"type", "mlp"},
            {"widths", mlp.widths()},
            {"feature_mean", mean},
            {"feature_scale", scale},
            {"parameters", mlp.parameters()}};
}

AxisModel axis_from(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "trees") {
        TreeEnsemble ens;
        const std::string combine = j.at("combine").get<std::string>();
        if (combine != "mean" && combine != "additive") throw MalformedModel("unknown combine '" + combine + "'");
        ens.combine = combine == "mean" ? TreeEnsemble::Combine::Mean : TreeEnsemble::Combine::Additive;
        ens.base_score = j.at("base_score").get<double>();
        ens.learning_rate = j.at("learning_rate").get<double>();
        for (const json& jt : j.at("trees")) {
            Tree t;
            for (const json& jn : jt.at("nodes")) {
                if (!jn.is_array() || jn.size() != 5) throw MalformedModel("node record must have 5 fields");
                TreeNode n;
                n.feature = jn[0].get<int>();
                n.threshold = jn[1].get<double>();
                n.left = jn[2].get<int>();
                n.right = jn[3].get<int>();
                n.value = jn[4].get<double>();
                t.nodes.push_back(n);
            }
            const int count = static_cast<int>(t.nodes.size());
            if (count == 0) throw MalformedModel("empty tree");
            for (const TreeNode& n : t.nodes)
                if (!n.is_leaf() && (n.feature > 7 || n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
                    throw MalformedModel("tree node references out of range");
            ens.trees.push_back(std::move(t));
        }
        return ens;
    }
    if (type == "mlp") {
        const auto widths = j.at("widths").get<std::vector<int>>();
        Mlp mlp(widths, 0.0, 0);
        const auto mean = j.at("feature_mean").get<std::vector<double>>();
        const auto scale = j.at("feature_scale").get<std::vector<double>>();
        mlp.set_standardization(Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                                Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size())));
        mlp.set_parameters(j.at("parameters").get<std::vector<double>>());
        return mlp;
    }
    throw MalformedModel("unknown axis model type '" + type + "'");
}

}  // namespace

std::string model_to_json(const EnsembleModel& model) {
    json axes = json::array();
    for (const auto& a : model.axes) axes.push_back(axis_json(a));
    const json doc = {{"format", "vlp-position-model"},
                      {"version", kModelFormatVersion},
                      {"kind", to_string(model.kind)},
                      {"seed", model.seed},
                      {"params", params_json(model.params)},
                      {"axes", std::move(axes)}};
    return doc.dump(1);
}

EnsembleModel model_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format").get<std::string>() != "vlp-position-model") throw MalformedModel("not a position model");
        const int version = doc.at("version").get<int>();
        if (version != kModelFormatVersion) throw MalformedModel("unsupported model version " + std::to_string(version));
        EnsembleModel model;
        model.kind = parse_model_kind(doc.at("kind").get<std::string>());
        model.seed = doc.at("seed").get<std::uint64_t>();
        model.params = params_from(doc.at("params"));
        const json& axes = doc.at("axes");
        if (!axes.is_array() || axes.size() != 3) throw MalformedModel("expected exactly 3 axis models");
        for (std::size_t a = 0; a < 3; ++a) model.axes[a] = axis_from(axes[a]);
        return model;
    } catch (const json::exception& e) {
        throw MalformedModel(std::string("invalid model document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw MalformedModel(e.what());
    }
}

void save_model(const std::filesystem::path& path, const EnsembleModel& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << model_to_json(model) << "\n";
}

EnsembleModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace vlp::learn
