#include "fbsc/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "fbsc/error.hpp"

namespace fbsc::pipeline {

namespace fs = std::filesystem;

std::string to_string(predictor::LatentMode mode) {
    return mode == predictor::LatentMode::Mean ? "mean" : "stochastic";
}

predictor::LatentMode latent_mode_from(const std::string& name) {
    if (name == "mean") return predictor::LatentMode::Mean;
    if (name == "stochastic") return predictor::LatentMode::Stochastic;
    throw Error("latent mode must be \"mean\" or \"stochastic\", got \"" + name + "\"");
}

void RunConfig::validate() const {
    model.validate();
    loss.validate();
    if (seed > static_cast<std::uint64_t>(INT64_MAX)) throw Error("seed must fit in a signed 64-bit integer");
    if (!(optimizer.learning_rate > 0)) throw Error("optimizer.learning_rate must be > 0");
    if (optimizer.batch_size < 1) throw Error("optimizer.batch_size must be >= 1");
    if (optimizer.steps < 0) throw Error("optimizer.steps must be >= 0");
    if (optimizer.checkpoint_every < 1) throw Error("optimizer.checkpoint_every must be >= 1");
    if (optimizer.log_every < 1) throw Error("optimizer.log_every must be >= 1");
    if (scene_encoder.epochs < 0 || scene_encoder.samples_per_scene < 1 ||
        scene_encoder.batch_size < 1 || !(scene_encoder.learning_rate > 0))
        throw Error("scene_encoder settings must be positive");
    if (data.stride < 1) throw Error("data.stride must be >= 1");
    if (!(data.margin > 0)) throw Error("data.margin must be > 0");
    if (data.min_side < 0) throw Error("data.min_side must be >= 0");
    if (scoring.patch < 1 || scoring.patch_stride < 1 || scoring.patch > model.crop_size)
        throw Error("scoring.patch must lie in [1, crop_size] and patch_stride >= 1");
    if (scoring.batch_size < 1) throw Error("scoring.batch_size must be >= 1");
    for (int a : alphas)
        if (a < 1 || a > model.forward_out - 1)
            throw Error("alphas must lie in [1, " + std::to_string(model.forward_out - 1) + "]");
}

corpus::WindowGeometry RunConfig::geometry() const {
    corpus::WindowGeometry g;
    g.input_frames = model.input_frames;
    g.horizon = model.forward_out;
    g.stride = data.stride;
    g.crop_size = model.crop_size;
    g.margin = data.margin;
    g.min_side = data.min_side;
    return g;
}

scoring::ScoringOptions RunConfig::scoring_options() const {
    scoring::ScoringOptions o;
    o.geometry = geometry();
    o.grid = {scoring.patch, scoring.patch_stride};
    o.lambda_l1 = loss.lambda_l1;
    o.latent_mode = scoring.latent_mode;
    o.batch_size = scoring.batch_size;
    return o;
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"", {"dataset_root", "output_dir", "seed", "alphas", "train_latent_mode", "model", "loss",
              "optimizer", "scene_encoder", "data", "scoring"}},
        {"model", {"input_frames", "forward_out", "backward_out", "crop_size", "widths",
                   "latent_dim", "gamma", "scene_embedding_dim", "scene_count"}},
        {"loss", {"lambda_l1", "lambda_kl"}},
        {"optimizer", {"learning_rate", "batch_size", "steps", "checkpoint_every", "log_every"}},
        {"scene_encoder", {"epochs", "samples_per_scene", "batch_size", "learning_rate"}},
        {"data", {"stride", "margin", "min_side"}},
        {"scoring", {"patch", "patch_stride", "batch_size", "latent_mode", "minmax_normalize"}},
    };
    return keys;
}

void check_keys(const toml::table& table, const std::string& section) {
    const auto& allowed = known_keys().at(section);
    for (const auto& [key, node] : table) {
        const std::string name(key.str());
        if (!allowed.contains(name))
            throw Error("config: unknown key \"" + (section.empty() ? name : section + "." + name) + "\"");
        if (section.empty() && known_keys().contains(name) && !node.is_table())
            throw Error("config: \"" + name + "\" must be a table");
    }
}

template <typename T>
void read(const toml::table& table, const std::string& section, const char* key, T& out) {
    const auto* node = table.get(key);
    if (!node) return;
    const auto where = section.empty() ? std::string(key) : section + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
        if (!node->is_boolean()) throw Error("config: " + where + " must be a boolean");
        out = node->as_boolean()->get();
    } else if constexpr (std::is_integral_v<T>) {
        if (!node->is_integer()) throw Error("config: " + where + " must be an integer");
        const auto v = node->as_integer()->get();
        if constexpr (std::is_unsigned_v<T>)
            if (v < 0) throw Error("config: " + where + " must be >= 0");
        out = static_cast<T>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!node->is_number()) throw Error("config: " + where + " must be a number");
        out = *node->value<double>();
    } else {
        if (!node->is_string()) throw Error("config: " + where + " must be a string");
        out = T(node->as_string()->get());
    }
}

std::vector<int> read_int_array(const toml::node& node, const std::string& where) {
    const auto* arr = node.as_array();
    if (!arr) throw Error("config: " + where + " must be an array of integers");
    std::vector<int> out;
    for (const auto& v : *arr) {
        if (!v.is_integer()) throw Error("config: " + where + " must be an array of integers");
        out.push_back(static_cast<int>(v.as_integer()->get()));
    }
    return out;
}

const toml::table& section(const toml::table& root, const char* name) {
    static const toml::table empty;
    const auto* t = root.get_as<toml::table>(name);
    if (!t) return empty;
    check_keys(*t, name);
    return *t;
}

}  // namespace

RunConfig parse_config(const std::string& toml_text) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config: " << e.description() << " at line " << e.source().begin.line;
        throw Error(msg.str());
    }
    check_keys(root, "");

    RunConfig c;
    std::string text;
    if (root.contains("dataset_root")) {
        read(root, "", "dataset_root", text);
        c.dataset_root = text;
    }
    if (root.contains("output_dir")) {
        read(root, "", "output_dir", text);
        c.output_dir = text;
    }
    read(root, "", "seed", c.seed);
    if (const auto* a = root.get("alphas")) c.alphas = read_int_array(*a, "alphas");
    if (root.contains("train_latent_mode")) {
        read(root, "", "train_latent_mode", text);
        c.train_latent_mode = latent_mode_from(text);
    }

    const auto& m = section(root, "model");
    read(m, "model", "input_frames", c.model.input_frames);
    read(m, "model", "forward_out", c.model.forward_out);
    read(m, "model", "backward_out", c.model.backward_out);
    read(m, "model", "crop_size", c.model.crop_size);
    if (const auto* w = m.get("widths")) {
        const auto widths = read_int_array(*w, "model.widths");
        if (widths.size() != 3) throw Error("config: model.widths needs exactly 3 entries");
        std::copy(widths.begin(), widths.end(), c.model.widths.begin());
    }
    read(m, "model", "latent_dim", c.model.latent_dim);
    read(m, "model", "gamma", c.model.gamma);
    read(m, "model", "scene_embedding_dim", c.model.scene_embedding_dim);
    read(m, "model", "scene_count", c.model.scene_count);

    const auto& l = section(root, "loss");
    read(l, "loss", "lambda_l1", c.loss.lambda_l1);
    read(l, "loss", "lambda_kl", c.loss.lambda_kl);

    const auto& o = section(root, "optimizer");
    read(o, "optimizer", "learning_rate", c.optimizer.learning_rate);
    read(o, "optimizer", "batch_size", c.optimizer.batch_size);
    read(o, "optimizer", "steps", c.optimizer.steps);
    read(o, "optimizer", "checkpoint_every", c.optimizer.checkpoint_every);
    read(o, "optimizer", "log_every", c.optimizer.log_every);

    const auto& s = section(root, "scene_encoder");
    read(s, "scene_encoder", "epochs", c.scene_encoder.epochs);
    read(s, "scene_encoder", "samples_per_scene", c.scene_encoder.samples_per_scene);
    read(s, "scene_encoder", "batch_size", c.scene_encoder.batch_size);
    read(s, "scene_encoder", "learning_rate", c.scene_encoder.learning_rate);

    const auto& d = section(root, "data");
    read(d, "data", "stride", c.data.stride);
    read(d, "data", "margin", c.data.margin);
    read(d, "data", "min_side", c.data.min_side);

    const auto& sc = section(root, "scoring");
    read(sc, "scoring", "patch", c.scoring.patch);
    read(sc, "scoring", "patch_stride", c.scoring.patch_stride);
    read(sc, "scoring", "batch_size", c.scoring.batch_size);
    if (sc.contains("latent_mode")) {
        read(sc, "scoring", "latent_mode", text);
        c.scoring.latent_mode = latent_mode_from(text);
    }
    read(sc, "scoring", "minmax_normalize", c.scoring.minmax_normalize);

    c.validate();
    return c;
}

RunConfig load_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open config " + file.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto c = parse_config(buffer.str());
    const auto base = file.parent_path();
    if (!c.dataset_root.empty() && c.dataset_root.is_relative()) c.dataset_root = base / c.dataset_root;
    if (c.output_dir.is_relative()) c.output_dir = base / c.output_dir;
    return c;
}

std::string serialize_config(const RunConfig& c) {
    auto ints = [](const auto& values) {
        toml::array a;
        for (int v : values) a.push_back(v);
        return a;
    };
    toml::table root{
        {"dataset_root", c.dataset_root.string()},
        {"output_dir", c.output_dir.string()},
        {"seed", static_cast<std::int64_t>(c.seed)},
        {"alphas", ints(c.alphas)},
        {"train_latent_mode", to_string(c.train_latent_mode)},
        {"model",
         toml::table{{"input_frames", c.model.input_frames},
                     {"forward_out", c.model.forward_out},
                     {"backward_out", c.model.backward_out},
                     {"crop_size", c.model.crop_size},
                     {"widths", ints(c.model.widths)},
                     {"latent_dim", c.model.latent_dim},
                     {"gamma", c.model.gamma},
                     {"scene_embedding_dim", c.model.scene_embedding_dim},
                     {"scene_count", c.model.scene_count}}},
        {"loss", toml::table{{"lambda_l1", c.loss.lambda_l1}, {"lambda_kl", c.loss.lambda_kl}}},
        {"optimizer", toml::table{{"learning_rate", c.optimizer.learning_rate},
                                  {"batch_size", c.optimizer.batch_size},
                                  {"steps", c.optimizer.steps},
                                  {"checkpoint_every", c.optimizer.checkpoint_every},
                                  {"log_every", c.optimizer.log_every}}},
        {"scene_encoder", toml::table{{"epochs", c.scene_encoder.epochs},
                                      {"samples_per_scene", c.scene_encoder.samples_per_scene},
                                      {"batch_size", c.scene_encoder.batch_size},
                                      {"learning_rate", c.scene_encoder.learning_rate}}},
        {"data", toml::table{{"stride", c.data.stride},
                             {"margin", c.data.margin},
                             {"min_side", c.data.min_side}}},
        {"scoring", toml::table{{"patch", c.scoring.patch},
                                {"patch_stride", c.scoring.patch_stride},
                                {"batch_size", c.scoring.batch_size},
                                {"latent_mode", to_string(c.scoring.latent_mode)},
                                {"minmax_normalize", c.scoring.minmax_normalize}}},
    };
    std::ostringstream out;
    out << root << '\n';
    return out.str();
}

RunConfig benchmark_preset(const std::string& benchmark_name) {
    if (benchmark_name != "basic" && benchmark_name != "scenedep" && benchmark_name != "anticipate")
        throw Error("no preset for benchmark " + benchmark_name);
    RunConfig c;
    c.output_dir = "runs/" + benchmark_name;
    c.model.crop_size = 32;
    c.model.widths = {8, 16, 32};
    c.model.latent_dim = 16;
    c.model.scene_embedding_dim = 32;
    c.data.stride = 2;
    c.data.min_side = 40;
    c.scoring.patch = 8;
    c.scoring.patch_stride = 4;
    c.optimizer.learning_rate = 2e-3;
    c.optimizer.steps = 1500;
    c.optimizer.checkpoint_every = 500;
    c.scene_encoder.epochs = 4;
    c.scene_encoder.samples_per_scene = 128;
    return c;
}

}  // namespace fbsc::pipeline
