#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hypee/analysis.hpp"
#include "hypee/config.hpp"
#include "hypee/data_io.hpp"
#include "hypee/trigger.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hypee;

namespace {

// "-" sends CSV to stdout (piping); anything else is an atomic file write.
void write_text_output(const std::string& out, const std::string& contents) {
    if (out == "-") {
        std::cout << contents;
        return;
    }
    data_io::atomic_write(out, contents);
}

std::string fmt(double x) {
    std::ostringstream ss;
    ss.precision(10);
    ss << x;
    return ss.str();
}

// Embedding sets come from the binary format or, for plain point clouds, CSV.
analysis::EmbeddingSet load_points(const std::string& input,
                                   const std::optional<std::string>& label_column) {
    const fs::path path(input);
    if (path.extension() == ".csv") {
        data_io::CsvSchema schema;
        schema.label_column = label_column;
        const Dataset ds = data_io::load_csv_features(path, schema);
        analysis::EmbeddingSet set;
        set.points = ds.features;
        if (label_column) set.labels = ds.labels;
        set.hyperbolic = false;
        return set;
    }
    return data_io::read_embeddings(path);
}

Dataset dataset_for_split(const config::RunConfig& cfg, const std::string& split) {
    const auto splits = config::load_splits(cfg);
    if (split == "train") return splits.train;
    if (split == "calibration") return splits.calibration;
    if (split == "eval") return splits.eval;
    if (split == "all") return config::load_dataset(cfg);
    throw ConfigError("unknown split '" + split + "' (train|calibration|eval|all)");
}

model::MultiExitModel load_model_and_config(const std::string& checkpoint,
                                            config::RunConfig& cfg_out, json& resolved_out) {
    json resolved;
    auto m = data_io::load_checkpoint(checkpoint, &resolved);
    if (resolved.is_null()) {
        throw IoError(IoError::Code::bad_payload,
                      checkpoint + ": checkpoint carries no run config");
    }
    cfg_out = config::parse_run_config(resolved);
    resolved_out = resolved;
    return m;
}

analysis::EmbeddingSet collect_embeddings(const model::MultiExitModel& m, const Dataset& data) {
    analysis::EmbeddingSet set;
    set.curvature = m.curvature.c;
    set.hyperbolic = m.config.mode == model::LatentMode::hyperbolic;
    for (size_t i = 0; i < data.size(); ++i) {
        const auto exits = model::forward_with_exits(m, data.features[i]);
        for (int e = 0; e < m.config.num_exits(); ++e) {
            const auto& out = exits[static_cast<size_t>(e)];
            if (set.hyperbolic) {
                // store space coordinates; time is derived on read
                set.points.emplace_back(out.embedding.begin() + 1, out.embedding.end());
            } else {
                set.points.push_back(out.embedding);
            }
            set.labels.push_back(data.labels[i]);
            set.exit_ids.push_back(e);
        }
    }
    return set;
}

// ---- train ---------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    const auto cfg = config::load_run_config(config_path);
    const json resolved = config::resolved_json(cfg);
    const std::string hash = config::config_hash(resolved);

    fs::create_directories(out_dir);
    const auto splits = config::load_splits(cfg);
    if (splits.train.empty()) throw ConfigError("training split is empty");

    auto m = model::initialize_model(cfg.backbone, cfg.curvature, cfg.seed);
    const auto result = trainer::train(m, splits.train, cfg.loss, cfg.cone, cfg.optimizer,
                                       cfg.seed);

    std::ostringstream metrics;
    json header = {{"event", "start"},
                   {"mode", model::to_string(cfg.backbone.mode)},
                   {"lambda", cfg.backbone.mode == model::LatentMode::hyperbolic
                                  ? cfg.loss.lambda
                                  : 0.0},
                   {"config_hash", hash}};
    metrics << header.dump() << "\n";
    for (const auto& epoch : result.history) {
        json line = {{"epoch", epoch.epoch},
                     {"loss", epoch.mean_loss},
                     {"exit_accuracy", epoch.exit_accuracy},
                     {"mean_entailment_violation", epoch.mean_entailment_violation}};
        if (!epoch.mean_spatial_norm.empty()) {
            line["mean_spatial_norm"] = epoch.mean_spatial_norm;
        }
        metrics << line.dump() << "\n";
    }
    data_io::atomic_write(fs::path(out_dir) / "metrics.jsonl", metrics.str());

    json resolved_with_hash = resolved;
    resolved_with_hash["config_hash"] = hash;
    data_io::atomic_write(fs::path(out_dir) / "resolved_config.json",
                          resolved_with_hash.dump(2) + "\n");
    data_io::save_checkpoint(m, resolved, fs::path(out_dir) / "checkpoint.json");

    if (!result.history.empty()) {
        const auto& last = result.history.back();
        std::cerr << "trained " << result.history.size() << " epochs; final loss "
                  << last.mean_loss << "; exit accuracies:";
        for (double a : last.exit_accuracy) std::cerr << " " << a;
        std::cerr << "\n";
    }
    std::cerr << "wrote " << out_dir << "/checkpoint.json, metrics.jsonl, resolved_config.json\n";
    return 0;
}

// ---- embed ---------------------------------------------------------------

int cmd_embed(const std::string& checkpoint, const std::string& split, const std::string& out,
              const std::optional<std::string>& tangent_csv) {
    config::RunConfig cfg;
    json resolved;
    const auto m = load_model_and_config(checkpoint, cfg, resolved);
    const auto data = dataset_for_split(cfg, split);
    if (data.empty()) throw ConfigError("requested split is empty");
    const auto set = collect_embeddings(m, data);
    data_io::write_embeddings(set, out);

    if (tangent_csv) {
        // 2D-projectable export: log-map (tangent-space) coordinates for
        // hyperbolic embeddings, raw unit vectors for the euclidean baseline.
        const std::string hash = config::config_hash(resolved);
        std::ostringstream csv;
        for (int d = 0; d < m.config.latent_dim; ++d) csv << "v" << d << ",";
        csv << "label,exit_id,config_hash\n";
        for (size_t i = 0; i < set.size(); ++i) {
            std::vector<double> coords = set.points[i];
            if (set.hyperbolic) {
                coords = geometry::log_map_origin(geometry::lift(set.points[i], m.curvature),
                                                  m.curvature)
                             .space;
            }
            for (double v : coords) csv << fmt(v) << ",";
            csv << set.labels[i] << "," << set.exit_ids[i] << "," << hash << "\n";
        }
        write_text_output(*tangent_csv, csv.str());
    }
    std::cerr << "wrote " << out << " (" << data.size() << " samples x "
              << m.config.num_exits() << " exits)\n";
    return 0;
}

// ---- calibrate -----------------------------------------------------------

int cmd_calibrate(const std::string& checkpoint, const std::string& split,
                  const std::optional<std::string>& data_csv,
                  const std::optional<std::string>& label_column, const std::string& out) {
    config::RunConfig cfg;
    json resolved;
    const auto m = load_model_and_config(checkpoint, cfg, resolved);
    Dataset reference;
    if (data_csv) {
        data_io::CsvSchema schema;
        schema.label_column = label_column.value_or("label");
        reference = data_io::load_csv_features(*data_csv, schema);
        reference.num_classes = std::max(reference.num_classes, cfg.backbone.num_classes);
    } else {
        reference = dataset_for_split(cfg, split);
    }
    const auto stats = trigger::calibrate(m, reference, cfg.trigger_options);
    trigger::save_norm_stats(stats, out, config::config_hash(resolved));
    std::cerr << "calibrated on " << reference.size() << " samples -> " << out << "\n";
    return 0;
}

// ---- infer ---------------------------------------------------------------

std::string report_csv(const trigger::TriggerReport& report, trigger::Strategy strategy,
                       const std::string& hash) {
    std::ostringstream csv;
    csv << "strategy,gate,triggered_pct,correct_pct,incorrect_pct,macs_saved_pct,accuracy_pct,"
           "config_hash\n";
    for (size_t e = 0; e < report.triggered_fraction.size(); ++e) {
        csv << trigger::to_string(strategy) << "," << e << ","
            << fmt(100.0 * report.triggered_fraction[e]) << ","
            << fmt(100.0 * report.correct_fraction[e]) << ","
            << fmt(100.0 * report.incorrect_fraction[e]) << ","
            << fmt(100.0 * report.macs_saved) << "," << fmt(100.0 * report.accuracy) << ","
            << hash << "\n";
    }
    return csv.str();
}

int cmd_infer(const std::string& checkpoint, const std::optional<std::string>& stats_path,
              const std::string& strategy_name, const std::vector<double>& entropy_thresholds,
              const std::string& split, const std::optional<std::string>& data_csv,
              const std::optional<std::string>& label_column, const std::string& out_prefix,
              const std::optional<std::string>& decisions_out) {
    config::RunConfig cfg;
    json resolved;
    const auto m = load_model_and_config(checkpoint, cfg, resolved);
    const std::string hash = config::config_hash(resolved);

    Dataset eval_set;
    if (data_csv) {
        data_io::CsvSchema schema;
        schema.label_column = label_column.value_or("label");
        eval_set = data_io::load_csv_features(*data_csv, schema);
        eval_set.num_classes = std::max(eval_set.num_classes, cfg.backbone.num_classes);
    } else {
        eval_set = dataset_for_split(cfg, split);
    }
    if (eval_set.empty()) throw ConfigError("evaluation set is empty");

    const auto cost = trainer::cost_model_from_config(cfg.backbone);

    trigger::Strategy strategy;
    trigger::TriggerReport report;
    std::vector<trigger::TriggerDecision> decisions;
    decisions.reserve(eval_set.size());

    if (strategy_name == "entropy") {
        strategy = trigger::Strategy::entropy;
        std::vector<double> thresholds = entropy_thresholds;
        if (thresholds.empty()) thresholds = cfg.entropy_thresholds;
        if (thresholds.empty()) {
            throw ConfigError("entropy strategy needs --entropy-thresholds or config values");
        }
        report = trigger::evaluate_entropy_trigger(m, thresholds, eval_set, cost);
        for (const auto& x : eval_set.features) {
            decisions.push_back(trigger::entropy_decide(m, thresholds, x));
        }
    } else {
        if (!stats_path) throw ConfigError("norm strategies need --stats");
        const auto stats = trigger::load_norm_stats(*stats_path);
        if (strategy_name == "class") {
            strategy = trigger::Strategy::class_specific;
        } else if (strategy_name == "global") {
            strategy = trigger::Strategy::global_only;
        } else {
            throw ConfigError("unknown strategy '" + strategy_name + "' (class|global|entropy)");
        }
        report = trigger::evaluate_trigger(m, stats, eval_set, cost, strategy);
        for (const auto& x : eval_set.features) {
            decisions.push_back(strategy == trigger::Strategy::class_specific
                                    ? trigger::decide(m, stats, x)
                                    : trigger::decide_global_only(m, stats, x));
        }
    }

    json j;
    j["strategy"] = trigger::to_string(strategy);
    j["config_hash"] = hash;
    j["total"] = report.total;
    j["accuracy"] = report.accuracy;
    j["macs_saved"] = report.macs_saved;
    j["triggered_fraction"] = report.triggered_fraction;
    j["correct_fraction"] = report.correct_fraction;
    j["incorrect_fraction"] = report.incorrect_fraction;
    data_io::atomic_write(out_prefix + ".json", j.dump(2) + "\n");
    write_text_output(out_prefix + ".csv", report_csv(report, strategy, hash));

    if (decisions_out) {
        std::ostringstream csv;
        csv << "index,exit_taken,predicted_class,label,reason,norm,config_hash\n";
        for (size_t i = 0; i < decisions.size(); ++i) {
            const auto& d = decisions[i];
            csv << i << "," << d.exit_taken << "," << d.predicted_class << ","
                << eval_set.labels[i] << "," << trigger::to_string(d.reason) << ","
                << fmt(d.norm) << "," << hash << "\n";
        }
        write_text_output(*decisions_out, csv.str());
    }

    std::cerr << trigger::to_string(strategy) << ": accuracy " << 100.0 * report.accuracy
              << "%, MACs saved " << 100.0 * report.macs_saved << "%\n";
    return 0;
}

// ---- analyze -------------------------------------------------------------

json analyze_invocation(const std::string& subcommand, const json& args) {
    json j;
    j["analyze"] = subcommand;
    j["args"] = args;
    return j;
}

int cmd_analyze_delta(const std::string& input, const std::string& metric_name,
                      double curvature, const std::string& out,
                      const std::optional<std::string>& json_out) {
    const auto set = load_points(input, std::nullopt);
    analysis::MetricKind metric;
    double c = curvature;
    if (metric_name == "auto") {
        metric = set.hyperbolic ? analysis::MetricKind::lorentz_geodesic
                                : analysis::MetricKind::euclidean;
        if (set.hyperbolic) c = set.curvature;
    } else if (metric_name == "lorentz") {
        metric = analysis::MetricKind::lorentz_geodesic;
    } else if (metric_name == "euclidean") {
        metric = analysis::MetricKind::euclidean;
    } else {
        throw ConfigError("unknown metric '" + metric_name + "' (auto|lorentz|euclidean)");
    }
    const auto report = analysis::delta_hyperbolicity(set.points, metric, c);
    const std::string hash = config::config_hash(analyze_invocation(
        "delta", {{"input", input}, {"metric", metric_name}, {"curvature", c}}));

    std::ostringstream csv;
    csv << "delta,diameter,delta_rel,c_estimate,config_hash\n";
    csv << fmt(report.delta) << "," << fmt(report.diameter) << "," << fmt(report.delta_rel)
        << "," << (report.c_estimate ? fmt(*report.c_estimate) : "") << "," << hash << "\n";
    write_text_output(out, csv.str());
    if (json_out) {
        json j;
        j["delta"] = report.delta;
        j["diameter"] = report.diameter;
        j["delta_rel"] = report.delta_rel;
        if (report.c_estimate) j["c_estimate"] = *report.c_estimate;
        j["config_hash"] = hash;
        write_text_output(*json_out, j.dump(2) + "\n");
    }
    std::cerr << "delta_rel = " << report.delta_rel;
    if (report.c_estimate) std::cerr << ", c = " << *report.c_estimate;
    std::cerr << "\n";
    return 0;
}

int cmd_analyze_kmeans(const std::string& input, int k, int max_iters, uint64_t seed,
                       const std::string& out, const std::optional<std::string>& json_out) {
    const auto set = load_points(input, std::nullopt);
    if (!set.hyperbolic) throw ConfigError("kmeans expects hyperbolic embeddings");
    const auto result = analysis::hyperbolic_kmeans(set.points, k, max_iters, seed,
                                                    geometry::Curvature(set.curvature));
    const std::string hash = config::config_hash(analyze_invocation(
        "kmeans", {{"input", input}, {"k", k}, {"max_iters", max_iters}, {"seed", seed}}));

    std::ostringstream csv;
    csv << "index,cluster,label,exit_id,config_hash\n";
    for (size_t i = 0; i < result.assignment.size(); ++i) {
        csv << i << "," << result.assignment[i] << ","
            << (set.has_labels() ? std::to_string(set.labels[i]) : "") << ","
            << (set.has_exit_ids() ? std::to_string(set.exit_ids[i]) : "") << "," << hash
            << "\n";
    }
    write_text_output(out, csv.str());
    if (json_out) {
        json j;
        j["assignment"] = result.assignment;
        j["centroid_space"] = result.centroid_space;
        j["objective_history"] = result.objective_history;
        j["geodesic_objective"] = result.geodesic_objective;
        j["iterations"] = result.iterations;
        j["config_hash"] = hash;
        write_text_output(*json_out, j.dump(2) + "\n");
    }
    std::cerr << "kmeans: " << result.iterations << " iterations, objective "
              << result.objective_history.back() << "\n";
    return 0;
}

int cmd_analyze_lookahead(const std::string& input, int query_exit,
                          const std::vector<double>& thresholds, double cone_k,
                          const std::string& out, const std::optional<std::string>& json_out) {
    const auto set = load_points(input, std::nullopt);
    if (!set.hyperbolic) throw ConfigError("lookahead expects hyperbolic embeddings");
    if (!set.has_exit_ids() || !set.has_labels()) {
        throw ConfigError("lookahead needs embeddings with labels and exit ids");
    }
    analysis::EmbeddingSet queries;
    queries.curvature = set.curvature;
    analysis::EmbeddingSet references = queries;
    for (size_t i = 0; i < set.size(); ++i) {
        auto& dst = set.exit_ids[i] == query_exit ? queries : references;
        dst.points.push_back(set.points[i]);
        dst.labels.push_back(set.labels[i]);
        dst.exit_ids.push_back(set.exit_ids[i]);
    }
    const entailment::ConeConfig cone(cone_k, geometry::Curvature(set.curvature));
    const auto rows = analysis::lookahead_sweep(queries, query_exit, references, thresholds,
                                                cone);
    const std::string hash = config::config_hash(analyze_invocation(
        "lookahead",
        {{"input", input}, {"query_exit", query_exit}, {"thresholds", thresholds}, {"K", cone_k}}));

    std::ostringstream csv;
    csv << "threshold,queries,retrieved,matched,precision,coverage,config_hash\n";
    for (const auto& row : rows) {
        csv << fmt(row.threshold) << "," << row.queries << "," << row.retrieved << ","
            << row.matched << "," << fmt(row.precision) << "," << fmt(row.coverage) << ","
            << hash << "\n";
    }
    write_text_output(out, csv.str());
    if (json_out) {
        json arr = json::array();
        for (const auto& row : rows) {
            arr.push_back({{"threshold", row.threshold},
                           {"queries", row.queries},
                           {"retrieved", row.retrieved},
                           {"matched", row.matched},
                           {"precision", row.precision},
                           {"coverage", row.coverage}});
        }
        json j;
        j["rows"] = arr;
        j["config_hash"] = hash;
        write_text_output(*json_out, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_analyze_traverse(const std::string& input, long start_index, int steps,
                         const std::string& mode_name, const std::string& out,
                         const std::optional<std::string>& json_out) {
    const auto set = load_points(input, std::nullopt);
    if (start_index < 0 || static_cast<size_t>(start_index) >= set.size()) {
        throw ConfigError("start index out of range");
    }
    const auto mode = mode_name == "euclidean" ? analysis::TraversalMode::euclidean
                                               : analysis::TraversalMode::hyperbolic;
    const auto path = analysis::traverse(set.points[static_cast<size_t>(start_index)], steps,
                                         set, mode, geometry::Curvature(set.curvature));
    const std::string hash = config::config_hash(analyze_invocation(
        "traverse",
        {{"input", input}, {"start", start_index}, {"steps", steps}, {"mode", mode_name}}));

    std::ostringstream csv;
    csv << "step,point_norm,nearest_index,nearest_exit,nearest_label,similarity,config_hash\n";
    for (size_t s = 0; s < path.size(); ++s) {
        double norm = 0.0;
        for (double x : path[s].point) norm += x * x;
        csv << s << "," << fmt(std::sqrt(norm)) << "," << path[s].nearest_index << ","
            << path[s].nearest_exit << "," << path[s].nearest_label << ","
            << fmt(path[s].similarity) << "," << hash << "\n";
    }
    write_text_output(out, csv.str());
    if (json_out) {
        json arr = json::array();
        for (const auto& step : path) {
            arr.push_back({{"point", step.point},
                           {"nearest_index", step.nearest_index},
                           {"nearest_exit", step.nearest_exit},
                           {"nearest_label", step.nearest_label},
                           {"similarity", step.similarity}});
        }
        json j;
        j["steps"] = arr;
        j["config_hash"] = hash;
        write_text_output(*json_out, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_analyze_hist(const std::string& input, int bins, const std::string& out,
                     const std::optional<std::string>& json_out) {
    const auto set = load_points(input, std::nullopt);
    const auto table = analysis::norm_histogram(set, bins);
    const std::string hash = config::config_hash(
        analyze_invocation("hist", {{"input", input}, {"bins", bins}}));

    std::ostringstream csv;
    csv << "exit,bin_index,bin_lo,bin_hi,count,mean_norm,config_hash\n";
    for (size_t e = 0; e < table.exit_ids.size(); ++e) {
        for (size_t b = 0; b < table.counts[e].size(); ++b) {
            csv << table.exit_ids[e] << "," << b << "," << fmt(table.edges[b]) << ","
                << fmt(table.edges[b + 1]) << "," << table.counts[e][b] << ","
                << fmt(table.mean_norm[e]) << "," << hash << "\n";
        }
    }
    write_text_output(out, csv.str());
    if (json_out) {
        json j;
        j["edges"] = table.edges;
        j["exit_ids"] = table.exit_ids;
        j["counts"] = table.counts;
        j["mean_norm"] = table.mean_norm;
        j["config_hash"] = hash;
        write_text_output(*json_out, j.dump(2) + "\n");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hypee: hyperbolic early-exit networks, triggering and geometric analysis"};
    app.require_subcommand(1);

    std::function<int()> action;

    // train
    {
        auto* cmd = app.add_subcommand("train", "train a multi-exit model from a config");
        auto config_path = std::make_shared<std::string>();
        auto out_dir = std::make_shared<std::string>("out");
        cmd->add_option("--config", *config_path, "run configuration (JSON)")->required();
        cmd->add_option("--out", *out_dir, "output directory");
        cmd->callback([=, &action]() {
            action = [=]() { return cmd_train(*config_path, *out_dir); };
        });
    }

    // embed
    {
        auto* cmd = app.add_subcommand("embed", "export per-exit embeddings for a data split");
        auto checkpoint = std::make_shared<std::string>();
        auto split = std::make_shared<std::string>("train");
        auto out = std::make_shared<std::string>();
        auto tangent = std::make_shared<std::string>();
        cmd->add_option("--checkpoint", *checkpoint, "trained checkpoint")->required();
        cmd->add_option("--split", *split, "train|calibration|eval|all");
        cmd->add_option("--out", *out, "output embedding file")->required();
        auto* tangent_opt = cmd->add_option("--tangent-csv", *tangent,
                                            "also export log-map coordinates as CSV");
        cmd->callback([=, &action]() {
            action = [=]() {
                return cmd_embed(*checkpoint, *split, *out,
                                 tangent_opt->count() ? std::optional(*tangent) : std::nullopt);
            };
        });
    }

    // calibrate
    {
        auto* cmd = app.add_subcommand("calibrate", "compute norm statistics on a reference set");
        auto checkpoint = std::make_shared<std::string>();
        auto split = std::make_shared<std::string>("calibration");
        auto data_csv = std::make_shared<std::string>();
        auto label_column = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--checkpoint", *checkpoint, "trained checkpoint")->required();
        cmd->add_option("--split", *split, "which split of the configured data to use");
        auto* data_opt = cmd->add_option("--data", *data_csv, "reference CSV instead of a split");
        cmd->add_option("--label-column", *label_column, "label column for --data");
        cmd->add_option("--out", *out, "output stats file")->required();
        cmd->callback([=, &action]() {
            action = [=]() {
                return cmd_calibrate(*checkpoint, *split,
                                     data_opt->count() ? std::optional(*data_csv) : std::nullopt,
                                     label_column->empty() ? std::nullopt
                                                           : std::optional(*label_column),
                                     *out);
            };
        });
    }

    // infer
    {
        auto* cmd = app.add_subcommand("infer", "uncertainty-gated early-exit inference");
        auto checkpoint = std::make_shared<std::string>();
        auto stats = std::make_shared<std::string>();
        auto strategy = std::make_shared<std::string>("class");
        auto thresholds = std::make_shared<std::vector<double>>();
        auto split = std::make_shared<std::string>("eval");
        auto data_csv = std::make_shared<std::string>();
        auto label_column = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>("report");
        auto decisions = std::make_shared<std::string>();
        cmd->add_option("--checkpoint", *checkpoint, "trained checkpoint")->required();
        auto* stats_opt = cmd->add_option("--stats", *stats, "norm statistics file");
        cmd->add_option("--strategy", *strategy, "class|global|entropy");
        cmd->add_option("--entropy-thresholds", *thresholds, "per-gate entropy thresholds");
        cmd->add_option("--split", *split, "which split of the configured data to use");
        auto* data_opt = cmd->add_option("--data", *data_csv, "eval CSV instead of a split");
        cmd->add_option("--label-column", *label_column, "label column for --data");
        cmd->add_option("--out", *out, "output prefix (.json / .csv)");
        auto* dec_opt = cmd->add_option("--decisions", *decisions, "per-sample decisions CSV");
        cmd->callback([=, &action]() {
            action = [=]() {
                return cmd_infer(*checkpoint,
                                 stats_opt->count() ? std::optional(*stats) : std::nullopt,
                                 *strategy, *thresholds, *split,
                                 data_opt->count() ? std::optional(*data_csv) : std::nullopt,
                                 label_column->empty() ? std::nullopt
                                                       : std::optional(*label_column),
                                 *out,
                                 dec_opt->count() ? std::optional(*decisions) : std::nullopt);
            };
        });
    }

    // analyze
    {
        auto* analyze = app.add_subcommand("analyze", "geometric analyses");
        analyze->require_subcommand(1);

        {
            auto* cmd = analyze->add_subcommand("delta", "Gromov delta-hyperbolicity");
            auto input = std::make_shared<std::string>();
            auto metric = std::make_shared<std::string>("auto");
            auto curvature = std::make_shared<double>(1.0);
            auto out = std::make_shared<std::string>("-");
            auto json_path = std::make_shared<std::string>();
            cmd->add_option("--input", *input, "embedding file or CSV")->required();
            cmd->add_option("--metric", *metric, "auto|lorentz|euclidean");
            cmd->add_option("--curvature", *curvature, "curvature for the lorentz metric");
            cmd->add_option("--out", *out, "output CSV ('-' for stdout)");
            auto* json_opt = cmd->add_option("--json", *json_path, "also write a JSON report");
            cmd->callback([=, &action]() {
                action = [=]() {
                    return cmd_analyze_delta(*input, *metric, *curvature, *out,
                                             json_opt->count() ? std::optional(*json_path)
                                                               : std::nullopt);
                };
            });
        }
        {
            auto* cmd = analyze->add_subcommand("kmeans", "hyperbolic k-means clustering");
            auto input = std::make_shared<std::string>();
            auto k = std::make_shared<int>(5);
            auto iters = std::make_shared<int>(50);
            auto seed = std::make_shared<uint64_t>(1);
            auto out = std::make_shared<std::string>("-");
            auto json_path = std::make_shared<std::string>();
            cmd->add_option("--input", *input, "embedding file")->required();
            cmd->add_option("--k", *k, "number of clusters");
            cmd->add_option("--max-iters", *iters, "iteration cap");
            cmd->add_option("--seed", *seed, "seed for centroid init");
            cmd->add_option("--out", *out, "output CSV");
            auto* json_opt = cmd->add_option("--json", *json_path, "also write a JSON report");
            cmd->callback([=, &action]() {
                action = [=]() {
                    return cmd_analyze_kmeans(*input, *k, *iters, *seed, *out,
                                              json_opt->count() ? std::optional(*json_path)
                                                                : std::nullopt);
                };
            });
        }
        {
            auto* cmd = analyze->add_subcommand("lookahead",
                                                "entailment-cone retrieval statistics");
            auto input = std::make_shared<std::string>();
            auto query_exit = std::make_shared<int>(0);
            auto thresholds = std::make_shared<std::vector<double>>(
                std::vector<double>{1.2, 1.5, 2.0});
            auto cone_k = std::make_shared<double>(0.1);
            auto out = std::make_shared<std::string>("-");
            auto json_path = std::make_shared<std::string>();
            cmd->add_option("--input", *input, "embedding file with labels and exit ids")
                ->required();
            cmd->add_option("--query-exit", *query_exit, "exit level acting as queries");
            cmd->add_option("--thresholds", *thresholds, "relaxation thresholds T");
            cmd->add_option("--cone-k", *cone_k, "cone constant K");
            cmd->add_option("--out", *out, "output CSV");
            auto* json_opt = cmd->add_option("--json", *json_path, "also write a JSON report");
            cmd->callback([=, &action]() {
                action = [=]() {
                    return cmd_analyze_lookahead(*input, *query_exit, *thresholds, *cone_k, *out,
                                                 json_opt->count() ? std::optional(*json_path)
                                                                   : std::nullopt);
                };
            });
        }
        {
            auto* cmd = analyze->add_subcommand("traverse",
                                                "interpolate from an embedding to the root");
            auto input = std::make_shared<std::string>();
            auto start = std::make_shared<long>(0);
            auto steps = std::make_shared<int>(analysis::kDefaultTraversalSteps);
            auto mode = std::make_shared<std::string>("hyperbolic");
            auto out = std::make_shared<std::string>("-");
            auto json_path = std::make_shared<std::string>();
            cmd->add_option("--input", *input, "embedding file")->required();
            cmd->add_option("--start-index", *start, "index of the start embedding");
            cmd->add_option("--steps", *steps, "interpolation steps");
            cmd->add_option("--mode", *mode, "hyperbolic|euclidean");
            cmd->add_option("--out", *out, "output CSV");
            auto* json_opt = cmd->add_option("--json", *json_path, "also write a JSON report");
            cmd->callback([=, &action]() {
                action = [=]() {
                    return cmd_analyze_traverse(*input, *start, *steps, *mode, *out,
                                                json_opt->count() ? std::optional(*json_path)
                                                                  : std::nullopt);
                };
            });
        }
        {
            auto* cmd = analyze->add_subcommand("hist", "per-exit embedding norm histogram");
            auto input = std::make_shared<std::string>();
            auto bins = std::make_shared<int>(30);
            auto out = std::make_shared<std::string>("-");
            auto json_path = std::make_shared<std::string>();
            cmd->add_option("--input", *input, "embedding file")->required();
            cmd->add_option("--bins", *bins, "histogram bins");
            cmd->add_option("--out", *out, "output CSV");
            auto* json_opt = cmd->add_option("--json", *json_path, "also write a JSON report");
            cmd->callback([=, &action]() {
                action = [=]() {
                    return cmd_analyze_hist(*input, *bins, *out,
                                            json_opt->count() ? std::optional(*json_path)
                                                              : std::nullopt);
                };
            });
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        return action();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
