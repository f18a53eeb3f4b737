#include "hypee/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hypee::config {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

} // namespace

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown_keys(j, {"seed", "curvature", "cone", "mode", "backbone", "loss", "optimizer",
                            "trigger", "entropy_thresholds", "data"},
                        "config root");

    RunConfig cfg;
    cfg.seed = get_or<uint64_t>(j, "seed", 1);
    try {
        cfg.curvature = geometry::Curvature(get_or<double>(j, "curvature", 1.0));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    if (j.contains("cone")) {
        const auto& cone = j.at("cone");
        reject_unknown_keys(cone, {"K"}, "cone");
        cfg.cone = entailment::ConeConfig(get_or<double>(cone, "K", 0.1), cfg.curvature);
    } else {
        cfg.cone = entailment::ConeConfig(0.1, cfg.curvature);
    }

    const std::string mode = get_or<std::string>(j, "mode", "hyperbolic");
    try {
        cfg.backbone.mode = model::latent_mode_from_string(mode);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    if (!j.contains("backbone")) throw ConfigError("config is missing 'backbone'");
    {
        const auto& bb = j.at("backbone");
        reject_unknown_keys(bb, {"input_dim", "hidden_dims", "exit_after", "latent_dim",
                                 "num_classes"},
                            "backbone");
        cfg.backbone.input_dim = get_or<int>(bb, "input_dim", 0);
        cfg.backbone.hidden_dims = get_or<std::vector<int>>(bb, "hidden_dims", {});
        cfg.backbone.exit_after = get_or<std::vector<int>>(bb, "exit_after", {});
        cfg.backbone.latent_dim = get_or<int>(bb, "latent_dim", 0);
        cfg.backbone.num_classes = get_or<int>(bb, "num_classes", 0);
        try {
            cfg.backbone.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }

    {
        const json loss = j.contains("loss") ? j.at("loss") : json::object();
        reject_unknown_keys(
            loss, {"exit_weights", "lambda", "stop_parent_gradient", "per_batch_exit_sampling"},
            "loss");
        cfg.loss.exit_weights = get_or<std::vector<double>>(
            loss, "exit_weights",
            std::vector<double>(static_cast<size_t>(cfg.backbone.num_exits()), 1.0));
        cfg.loss.lambda = get_or<double>(loss, "lambda", 0.2);
        cfg.loss.stop_parent_gradient = get_or<bool>(loss, "stop_parent_gradient", false);
        cfg.loss.per_batch_exit_sampling = get_or<bool>(loss, "per_batch_exit_sampling", false);
        try {
            cfg.loss.validate(cfg.backbone.num_exits());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }

    {
        const json opt = j.contains("optimizer") ? j.at("optimizer") : json::object();
        reject_unknown_keys(opt,
                            {"algorithm", "learning_rate", "momentum", "epochs", "batch_size",
                             "lr_decay", "lr_decay_every", "adam_beta1", "adam_beta2", "adam_eps",
                             "weight_decay"},
                            "optimizer");
        const std::string alg = get_or<std::string>(opt, "algorithm", "sgd");
        if (alg == "sgd") {
            cfg.optimizer.kind = trainer::OptimizerKind::sgd;
        } else if (alg == "adam") {
            cfg.optimizer.kind = trainer::OptimizerKind::adam;
        } else {
            throw ConfigError("unknown optimizer '" + alg + "' (sgd|adam)");
        }
        cfg.optimizer.learning_rate = get_or<double>(opt, "learning_rate",
                                                     alg == "adam" ? 0.01 : 0.05);
        cfg.optimizer.momentum = get_or<double>(opt, "momentum", 0.9);
        cfg.optimizer.epochs = get_or<int>(opt, "epochs", 40);
        cfg.optimizer.batch_size = get_or<int>(opt, "batch_size", 32);
        cfg.optimizer.lr_decay = get_or<double>(opt, "lr_decay", 0.5);
        cfg.optimizer.lr_decay_every = get_or<int>(opt, "lr_decay_every", 20);
        cfg.optimizer.adam_beta1 = get_or<double>(opt, "adam_beta1", 0.9);
        cfg.optimizer.adam_beta2 = get_or<double>(opt, "adam_beta2", 0.999);
        cfg.optimizer.adam_eps = get_or<double>(opt, "adam_eps", 1e-8);
        cfg.optimizer.weight_decay = get_or<double>(opt, "weight_decay", 0.0);
        if (cfg.optimizer.epochs < 0 || cfg.optimizer.batch_size < 1 ||
            !(cfg.optimizer.learning_rate > 0.0) || cfg.optimizer.weight_decay < 0.0) {
            throw ConfigError(
                "optimizer: epochs >= 0, batch_size >= 1, learning_rate > 0, weight_decay >= 0");
        }
    }

    {
        const json trig = j.contains("trigger") ? j.at("trigger") : json::object();
        reject_unknown_keys(trig,
                            {"sigma_floor", "min_class_support", "sigma_floor_fallback",
                             "use_confidence_gate"},
                            "trigger");
        cfg.trigger_options.sigma_floor = get_or<double>(trig, "sigma_floor", 1e-3);
        cfg.trigger_options.min_class_support = get_or<int>(trig, "min_class_support", 5);
        cfg.trigger_options.sigma_floor_fallback = get_or<bool>(trig, "sigma_floor_fallback", false);
        cfg.trigger_options.use_confidence_gate = get_or<bool>(trig, "use_confidence_gate", false);
        if (!(cfg.trigger_options.sigma_floor > 0.0) || cfg.trigger_options.min_class_support < 1) {
            throw ConfigError("trigger: sigma_floor > 0 and min_class_support >= 1 required");
        }
    }

    cfg.entropy_thresholds = get_or<std::vector<double>>(j, "entropy_thresholds", {});

    if (!j.contains("data")) throw ConfigError("config is missing 'data'");
    {
        const auto& data = j.at("data");
        reject_unknown_keys(data, {"synthetic", "csv", "splits"}, "data");
        if (data.contains("synthetic") == data.contains("csv")) {
            throw ConfigError("data: specify exactly one of 'synthetic' or 'csv'");
        }
        if (data.contains("synthetic")) {
            const auto& syn = data.at("synthetic");
            reject_unknown_keys(syn,
                                {"num_superclasses", "subclasses_per_superclass",
                                 "samples_per_class", "input_dim", "class_spread",
                                 "superclass_separation", "seed"},
                                "data.synthetic");
            data_io::SyntheticSpec spec;
            spec.num_superclasses = get_or<int>(syn, "num_superclasses", 4);
            spec.subclasses_per_superclass = get_or<int>(syn, "subclasses_per_superclass", 3);
            spec.samples_per_class = get_or<int>(syn, "samples_per_class", 100);
            spec.input_dim = get_or<int>(syn, "input_dim", cfg.backbone.input_dim);
            spec.class_spread = get_or<double>(syn, "class_spread", 0.5);
            spec.superclass_separation = get_or<double>(syn, "superclass_separation", 6.0);
            spec.seed = get_or<uint64_t>(syn, "seed", cfg.seed);
            try {
                spec.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            if (spec.input_dim != cfg.backbone.input_dim) {
                throw ConfigError("data.synthetic.input_dim must match backbone.input_dim");
            }
            if (spec.num_classes() != cfg.backbone.num_classes) {
                throw ConfigError("synthetic class count " + std::to_string(spec.num_classes()) +
                                  " does not match backbone.num_classes");
            }
            cfg.data.synthetic = spec;
        } else {
            const auto& csv = data.at("csv");
            reject_unknown_keys(csv, {"path", "label_column"}, "data.csv");
            if (!csv.contains("path")) throw ConfigError("data.csv: missing 'path'");
            cfg.data.csv_path = csv.at("path").get<std::string>();
            if (csv.contains("label_column")) {
                cfg.data.csv_label_column = csv.at("label_column").get<std::string>();
            }
        }
        if (data.contains("splits")) {
            const auto& splits = data.at("splits");
            reject_unknown_keys(splits, {"train", "calibration", "eval"}, "data.splits");
            cfg.data.train_fraction = get_or<double>(splits, "train", 0.6);
            cfg.data.calibration_fraction = get_or<double>(splits, "calibration", 0.2);
            const double eval_frac = get_or<double>(
                splits, "eval", 1.0 - cfg.data.train_fraction - cfg.data.calibration_fraction);
            const double sum = cfg.data.train_fraction + cfg.data.calibration_fraction + eval_frac;
            if (std::abs(sum - 1.0) > 1e-9) {
                throw ConfigError("data.splits must sum to 1");
            }
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

json resolved_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["curvature"] = cfg.curvature.c;
    j["cone"] = {{"K", cfg.cone.K}};
    j["mode"] = model::to_string(cfg.backbone.mode);
    j["backbone"] = {
        {"input_dim", cfg.backbone.input_dim},   {"hidden_dims", cfg.backbone.hidden_dims},
        {"exit_after", cfg.backbone.exit_after}, {"latent_dim", cfg.backbone.latent_dim},
        {"num_classes", cfg.backbone.num_classes},
    };
    j["loss"] = {
        {"exit_weights", cfg.loss.exit_weights},
        {"lambda", cfg.loss.lambda},
        {"stop_parent_gradient", cfg.loss.stop_parent_gradient},
        {"per_batch_exit_sampling", cfg.loss.per_batch_exit_sampling},
    };
    j["optimizer"] = {
        {"algorithm", cfg.optimizer.kind == trainer::OptimizerKind::sgd ? "sgd" : "adam"},
        {"learning_rate", cfg.optimizer.learning_rate},
        {"momentum", cfg.optimizer.momentum},
        {"epochs", cfg.optimizer.epochs},
        {"batch_size", cfg.optimizer.batch_size},
        {"lr_decay", cfg.optimizer.lr_decay},
        {"lr_decay_every", cfg.optimizer.lr_decay_every},
        {"adam_beta1", cfg.optimizer.adam_beta1},
        {"adam_beta2", cfg.optimizer.adam_beta2},
        {"adam_eps", cfg.optimizer.adam_eps},
        {"weight_decay", cfg.optimizer.weight_decay},
    };
    j["trigger"] = {
        {"sigma_floor", cfg.trigger_options.sigma_floor},
        {"min_class_support", cfg.trigger_options.min_class_support},
        {"sigma_floor_fallback", cfg.trigger_options.sigma_floor_fallback},
        {"use_confidence_gate", cfg.trigger_options.use_confidence_gate},
    };
    if (!cfg.entropy_thresholds.empty()) j["entropy_thresholds"] = cfg.entropy_thresholds;
    json data;
    if (cfg.data.synthetic) {
        const auto& s = *cfg.data.synthetic;
        data["synthetic"] = {
            {"num_superclasses", s.num_superclasses},
            {"subclasses_per_superclass", s.subclasses_per_superclass},
            {"samples_per_class", s.samples_per_class},
            {"input_dim", s.input_dim},
            {"class_spread", s.class_spread},
            {"superclass_separation", s.superclass_separation},
            {"seed", s.seed},
        };
    } else {
        data["csv"] = {{"path", cfg.data.csv_path->string()}};
        if (cfg.data.csv_label_column) data["csv"]["label_column"] = *cfg.data.csv_label_column;
    }
    data["splits"] = {
        {"train", cfg.data.train_fraction},
        {"calibration", cfg.data.calibration_fraction},
        {"eval", 1.0 - cfg.data.train_fraction - cfg.data.calibration_fraction},
    };
    j["data"] = data;
    return j;
}

std::string config_hash(const json& resolved) {
    const std::string dump = resolved.dump();
    uint64_t hash = 14695981039346656037ull;
    for (unsigned char ch : dump) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    std::ostringstream ss;
    ss << std::hex << hash;
    return ss.str();
}

Dataset load_dataset(const RunConfig& cfg) {
    if (cfg.data.synthetic) {
        return data_io::generate_synthetic(*cfg.data.synthetic);
    }
    data_io::CsvSchema schema;
    schema.label_column = cfg.data.csv_label_column;
    Dataset ds = data_io::load_csv_features(*cfg.data.csv_path, schema);
    if (ds.num_classes < cfg.backbone.num_classes) ds.num_classes = cfg.backbone.num_classes;
    return ds;
}

DatasetSplits load_splits(const RunConfig& cfg) {
    const Dataset full = load_dataset(cfg);
    return split_dataset(full, cfg.data.train_fraction, cfg.data.calibration_fraction, cfg.seed);
}

} // namespace hypee::config
