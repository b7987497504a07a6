#include "afex/cli.hpp"

#include <filesystem>
#include <initializer_list>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "afex/checkpoint.hpp"
#include "afex/csv.hpp"
#include "afex/ioutil.hpp"
#include "afex/svg.hpp"

namespace afex::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
}

json parse_json_file(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

OracleSpec oracle_from_json(const json& j, const std::string& where) {
    check_keys(j, {"kind", "name", "dim", "path", "argv"}, where);
    OracleSpec spec;
    spec.kind = j.at("kind").get<std::string>();
    if (j.contains("name")) spec.name = j.at("name").get<std::string>();
    if (j.contains("dim")) spec.dim = j.at("dim").get<std::size_t>();
    if (j.contains("path")) spec.path = j.at("path").get<std::string>();
    if (j.contains("argv")) spec.argv = j.at("argv").get<std::vector<std::string>>();

    if (spec.kind == "analytic") {
        if (spec.name.empty()) throw ConfigError(where + ": analytic oracle needs a name");
    } else if (spec.kind == "file") {
        if (spec.path.empty()) throw ConfigError(where + ": file oracle needs a path");
    } else if (spec.kind == "command") {
        if (spec.argv.empty() || spec.dim == 0) {
            throw ConfigError(where + ": command oracle needs argv and dim");
        }
    } else {
        throw ConfigError(where + ": unknown oracle kind '" + spec.kind + "'");
    }
    return spec;
}

json oracle_to_json(const OracleSpec& spec) {
    json out;
    out["kind"] = spec.kind;
    if (!spec.name.empty()) out["name"] = spec.name;
    if (spec.dim != 0) out["dim"] = spec.dim;
    if (!spec.path.empty()) out["path"] = spec.path;
    if (!spec.argv.empty()) out["argv"] = spec.argv;
    return out;
}

TrainConfig train_from_json(const json& j, const std::string& where) {
    check_keys(j,
               {"batch_size", "iterations", "learning_rate", "center_stddev",
                "local_radius", "k", "lambda_ridge", "surrogate_enabled",
                "lambda_surrogate", "surrogate_hidden", "pairwise_enabled",
                "standardize", "seed", "method"},
               where);
    TrainConfig config;  // defaults hold for absent keys
    if (j.contains("batch_size")) config.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("iterations")) config.iterations = j.at("iterations").get<std::size_t>();
    if (j.contains("learning_rate")) config.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("center_stddev")) config.center_stddev = j.at("center_stddev").get<double>();
    if (j.contains("local_radius")) config.local_radius = j.at("local_radius").get<double>();
    if (j.contains("k")) config.k = j.at("k").get<std::size_t>();
    if (j.contains("lambda_ridge")) config.lambda_ridge = j.at("lambda_ridge").get<double>();
    if (j.contains("surrogate_enabled")) {
        config.surrogate_enabled = j.at("surrogate_enabled").get<bool>();
    }
    if (j.contains("lambda_surrogate")) {
        config.lambda_surrogate = j.at("lambda_surrogate").get<double>();
    }
    if (j.contains("surrogate_hidden")) {
        config.surrogate_hidden = j.at("surrogate_hidden").get<std::vector<std::size_t>>();
    }
    if (j.contains("pairwise_enabled")) {
        config.pairwise_enabled = j.at("pairwise_enabled").get<bool>();
    }
    if (j.contains("standardize")) config.standardize = j.at("standardize").get<bool>();
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("method")) {
        try {
            config.method = weight_method_by_name(j.at("method").get<std::string>());
        } catch (const WeightingError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    return config;
}

std::vector<WeightMethod> all_methods() {
    return {WeightMethod::LinearRegression, WeightMethod::DotSoftmax, WeightMethod::Cosine,
            WeightMethod::Pearson, WeightMethod::PearsonSoftmax};
}

Neighborhood neighborhood_from_json(const json& j, std::size_t d,
                                    const std::string& where) {
    check_keys(j, {"kind", "half_widths", "half_width", "fraction", "min", "max"}, where);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "box") {
        if (j.contains("half_widths")) {
            return Neighborhood::box(j.at("half_widths").get<std::vector<double>>());
        }
        if (j.contains("half_width")) {
            return Neighborhood::uniform_box(d, j.at("half_width").get<double>());
        }
        throw ConfigError(where + ": box needs half_width or half_widths");
    }
    if (kind == "fraction") {
        if (!j.contains("fraction") || !j.contains("min") || !j.contains("max")) {
            throw ConfigError(where + ": fraction needs fraction, min and max");
        }
        return Neighborhood::fraction_of_range(j.at("fraction").get<double>(),
                                               j.at("min").get<std::vector<double>>(),
                                               j.at("max").get<std::vector<double>>());
    }
    throw ConfigError(where + ": unknown neighborhood kind '" + kind + "'");
}

std::string join(const std::optional<std::string>& override_dir,
                 const std::string& config_dir, const std::string& name) {
    return (fs::path(override_dir ? *override_dir : config_dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " +
                              ec.message());
}

std::string trace_csv(const std::string& method,
                      const std::vector<double>& mse_trace) {
    std::ostringstream out;
    out << "iteration,method,mse\n";
    for (std::size_t i = 0; i < mse_trace.size(); ++i) {
        out << i << ',' << method << ',' << csv::format_double(mse_trace[i]) << '\n';
    }
    return out.str();
}

const char* column_kind_name(ColumnDesc::Kind kind) {
    switch (kind) {
        case ColumnDesc::Kind::Single: return "single";
        case ColumnDesc::Kind::Pair: return "pair";
        case ColumnDesc::Kind::Bias: return "bias";
    }
    return "?";
}

json explanation_to_json(const Explanation& explanation) {
    json out;
    out["kind"] = "afex-explanation";
    out["format_version"] = 1;
    out["center"] = explanation.request.center;
    out["seed"] = explanation.request.seed;
    out["sample_count"] = explanation.request.sample_count;
    out["residual_mse"] = explanation.residual_mse;
    out["lambda"] = explanation.weights.lambda;

    json rank;
    rank["estimated_rank"] = explanation.rank.estimated_rank;
    rank["threshold"] = explanation.rank.threshold;
    rank["path"] = explanation.rank.path == RankReport::Path::Qr ? "qr" : "ridge";
    out["rank"] = std::move(rank);

    out["weights"] = std::vector<double>(explanation.weights.w.ptr(),
                                         explanation.weights.w.ptr() +
                                             explanation.weights.w.numel());
    json columns = json::array();
    for (const ColumnDesc& desc : explanation.columns) {
        json c;
        c["kind"] = column_kind_name(desc.kind);
        if (desc.kind != ColumnDesc::Kind::Bias) {
            c["i"] = desc.i;
            c["j"] = desc.j;
        }
        if (desc.kind == ColumnDesc::Kind::Pair) {
            c["s"] = desc.s;
            c["l"] = desc.l;
        }
        columns.push_back(std::move(c));
    }
    out["columns"] = std::move(columns);

    json importances = json::array();
    for (const auto& [feature, importance] : rank_features(explanation)) {
        json row;
        row["feature"] = feature;
        row["importance"] = importance;
        importances.push_back(std::move(row));
    }
    out["importances"] = std::move(importances);
    return out;
}

std::string curve_csv(const ShapeCurve& curve) {
    std::ostringstream out;
    out << "x,contribution\n";
    for (std::size_t t = 0; t < curve.grid.size(); ++t) {
        out << csv::format_double(curve.grid[t]) << ','
            << csv::format_double(curve.contribution[t]) << '\n';
    }
    return out.str();
}

std::string heatmap_csv(const PairHeatmap& map, bool adjusted) {
    const Tensor& values = adjusted ? map.adjusted : map.raw;
    std::ostringstream out;
    out << "x,y,value\n";
    for (std::size_t p = 0; p < map.grid_i.size(); ++p) {
        for (std::size_t q = 0; q < map.grid_s.size(); ++q) {
            out << csv::format_double(map.grid_i[p]) << ','
                << csv::format_double(map.grid_s[q]) << ','
                << csv::format_double(values.at(p, q)) << '\n';
        }
    }
    return out.str();
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    const json root = parse_json_file(path);
    try {
        check_keys(root, {"oracle", "train", "methods", "out_dir", "emit_svg"}, path);
        RunConfig config;
        config.oracle = oracle_from_json(root.at("oracle"), path + ": oracle");
        if (root.contains("train")) {
            config.train = train_from_json(root.at("train"), path + ": train");
        }
        if (root.contains("methods")) {
            for (const auto& name : root.at("methods").get<std::vector<std::string>>()) {
                try {
                    config.methods.push_back(weight_method_by_name(name));
                } catch (const WeightingError& e) {
                    throw ConfigError(path + ": " + e.what());
                }
            }
        } else {
            config.methods = all_methods();
        }
        if (root.contains("out_dir")) config.out_dir = root.at("out_dir").get<std::string>();
        if (root.contains("emit_svg")) config.emit_svg = root.at("emit_svg").get<bool>();
        return config;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

ExplainSpec load_explain_spec(const std::string& path) {
    const json root = parse_json_file(path);
    try {
        check_keys(root,
                   {"oracle", "center", "neighborhood", "sample_count", "grid_resolution",
                    "heatmap_resolution", "pairs", "seed", "emit_svg"},
                   path);
        ExplainSpec spec;
        spec.oracle = oracle_from_json(root.at("oracle"), path + ": oracle");
        spec.request.center = root.at("center").get<std::vector<double>>();
        if (spec.request.center.empty()) throw ConfigError(path + ": empty center");
        if (root.contains("neighborhood")) {
            spec.request.neighborhood = neighborhood_from_json(
                root.at("neighborhood"), spec.request.center.size(),
                path + ": neighborhood");
        } else {
            spec.request.neighborhood =
                Neighborhood::uniform_box(spec.request.center.size(), 0.5);
        }
        if (root.contains("sample_count")) {
            spec.request.sample_count = root.at("sample_count").get<std::size_t>();
        }
        if (root.contains("grid_resolution")) {
            spec.request.grid_resolution = root.at("grid_resolution").get<std::size_t>();
        }
        if (root.contains("heatmap_resolution")) {
            spec.request.heatmap_resolution =
                root.at("heatmap_resolution").get<std::size_t>();
        }
        if (root.contains("pairs")) {
            const json& pairs = root.at("pairs");
            if (pairs.is_string()) {
                if (pairs.get<std::string>() != "all") {
                    throw ConfigError(path + ": pairs must be \"all\" or a pair list");
                }
                spec.request.all_pairs = true;
            } else {
                spec.request.all_pairs = false;
                for (const auto& entry : pairs) {
                    const auto pair = entry.get<std::vector<std::size_t>>();
                    if (pair.size() != 2) {
                        throw ConfigError(path + ": each pair needs two indices");
                    }
                    spec.request.pairs.emplace_back(pair[0], pair[1]);
                }
            }
        }
        if (root.contains("seed")) spec.request.seed = root.at("seed").get<std::uint64_t>();
        if (root.contains("emit_svg")) spec.emit_svg = root.at("emit_svg").get<bool>();
        return spec;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::unique_ptr<Oracle> make_oracle(const OracleSpec& spec) {
    try {
        if (spec.kind == "analytic") return make_analytic_oracle(spec.name, spec.dim);
        if (spec.kind == "file") return make_file_oracle(spec.path);
        if (spec.kind == "command") return make_command_oracle(spec.argv, spec.dim);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("oracle: ") + e.what());
    }
    throw ConfigError("unknown oracle kind '" + spec.kind + "'");
}

std::pair<Tensor, Tensor> load_csv_dataset(const std::string& path) {
    csv::Table table;
    try {
        table = csv::read_numeric_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (table.rows.empty() || table.cols() < 2) {
        throw ConfigError("'" + path + "' needs at least one row and two columns");
    }
    const std::size_t n = table.rows.size(), d = table.cols() - 1;
    Tensor x = Tensor::matrix(n, d);
    Tensor y({n});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) x.at(r, c) = table.rows[r][c];
        y[r] = table.rows[r][d];
    }
    return {std::move(x), std::move(y)};
}

int run_train(const std::string& config_path, const std::optional<std::string>& out_dir,
              std::optional<std::uint64_t> seed) {
    RunConfig config;
    std::unique_ptr<Oracle> oracle;
    try {
        config = load_run_config(config_path);
        if (seed) config.train.seed = *seed;
        oracle = make_oracle(config.oracle);
        config.train.validate(oracle->dim());
        ensure_dir(out_dir ? *out_dir : config.out_dir);
    } catch (const std::exception& e) {
        std::cerr << "afex: config error: " << e.what() << '\n';
        return 1;
    }

    try {
        const TrainedModel model = train_fresh(*oracle, config.train);

        save_checkpoint(model, join(out_dir, config.out_dir, "checkpoint.json"));
        atomic_write_file(join(out_dir, config.out_dir, "trace.csv"),
                          trace_csv(weight_method_name(config.train.method),
                                    model.report.mse_trace));

        json manifest;
        manifest["kind"] = "afex-run-manifest";
        manifest["format_version"] = 1;
        manifest["oracle"] = oracle_to_json(config.oracle);
        manifest["method"] = weight_method_name(config.train.method);
        manifest["seed"] = config.train.seed;
        manifest["iterations"] = model.report.mse_trace.size();
        manifest["final_loss"] = model.report.final_loss;
        manifest["wall_seconds"] = model.report.wall_seconds;  // informational only
        manifest["qr_steps"] = model.report.qr_steps;
        manifest["ridge_steps"] = model.report.ridge_steps;
        manifest["checkpoint_format_version"] = kCheckpointFormatVersion;
        manifest["column_order"] = kColumnOrderTag;
        atomic_write_file(join(out_dir, config.out_dir, "manifest.json"),
                          manifest.dump(2) + "\n");

        if (config.emit_svg && !model.report.mse_trace.empty()) {
            svg::PlotSpec plot;
            plot.kind = svg::PlotSpec::Kind::LossTrace;
            plot.title = "training loss";
            plot.x_label = "iteration";
            plot.y_label = "mse";
            plot.path = join(out_dir, config.out_dir, "loss_trace.svg");
            plot.validate();
            svg::Series series;
            series.name = weight_method_name(config.train.method);
            for (std::size_t i = 0; i < model.report.mse_trace.size(); ++i) {
                series.x.push_back(static_cast<double>(i));
                series.y.push_back(model.report.mse_trace[i]);
            }
            atomic_write_file(plot.path, svg::render_line_plot(plot, {series}));
        }

        std::cout << "trained " << model.report.mse_trace.size() << " iterations, final loss "
                  << csv::format_double(model.report.final_loss) << ", checkpoint at "
                  << join(out_dir, config.out_dir, "checkpoint.json") << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "afex: " << e.what() << '\n';
        return 2;
    }
}

int run_explain(const std::string& checkpoint_path, const std::string& request_path,
                const std::optional<std::string>& out_dir,
                std::optional<std::uint64_t> seed) {
    TrainedModel model;
    ExplainSpec spec;
    std::unique_ptr<Oracle> oracle;
    std::string dir;
    try {
        model = load_checkpoint(checkpoint_path);
        spec = load_explain_spec(request_path);
        if (seed) spec.request.seed = *seed;
        oracle = make_oracle(spec.oracle);

        const std::size_t d = model.bank.d, k = model.bank.k;
        std::size_t width = k * d + 1;
        if (model.config.pairwise_enabled) width += k * k * d * (d - 1) / 2;
        spec.request.validate(d, width, model.config.pairwise_enabled);
        if (oracle->dim() != d) {
            throw ConfigError("oracle dimension " + std::to_string(oracle->dim()) +
                              " does not match the checkpoint's " + std::to_string(d));
        }
        dir = out_dir ? *out_dir : std::string(".");
        ensure_dir(dir);
    } catch (const std::exception& e) {
        std::cerr << "afex: config error: " << e.what() << '\n';
        return 1;
    }

    try {
        const Explanation explanation = explain_point(model, *oracle, spec.request);

        atomic_write_file((fs::path(dir) / "explanation.json").string(),
                          explanation_to_json(explanation).dump(2) + "\n");
        for (const ShapeCurve& curve : explanation.curves) {
            const std::string stem = "curve_" + std::to_string(curve.feature);
            atomic_write_file((fs::path(dir) / (stem + ".csv")).string(),
                              curve_csv(curve));
            if (spec.emit_svg) {
                svg::PlotSpec plot;
                plot.kind = svg::PlotSpec::Kind::Curve;
                plot.title = "shape function, feature " + std::to_string(curve.feature);
                plot.x_label = "x" + std::to_string(curve.feature);
                plot.y_label = "contribution";
                plot.path = (fs::path(dir) / (stem + ".svg")).string();
                plot.validate();
                svg::Series series;
                series.name = "feature " + std::to_string(curve.feature);
                series.x = curve.grid;
                series.y = curve.contribution;
                atomic_write_file(plot.path, svg::render_line_plot(plot, {series}));
            }
        }
        for (const PairHeatmap& map : explanation.heatmaps) {
            const std::string stem =
                "pair_" + std::to_string(map.i) + "_" + std::to_string(map.s);
            atomic_write_file((fs::path(dir) / (stem + "_adjusted.csv")).string(),
                              heatmap_csv(map, true));
            atomic_write_file((fs::path(dir) / (stem + "_raw.csv")).string(),
                              heatmap_csv(map, false));
            if (spec.emit_svg) {
                for (const bool adjusted : {true, false}) {
                    svg::PlotSpec plot;
                    plot.kind = svg::PlotSpec::Kind::Heatmap;
                    plot.title = std::string(adjusted ? "adjusted" : "raw") +
                                 " interaction (" + std::to_string(map.i) + ", " +
                                 std::to_string(map.s) + ")";
                    plot.x_label = "x" + std::to_string(map.i);
                    plot.y_label = "x" + std::to_string(map.s);
                    plot.path = (fs::path(dir) /
                                 (stem + (adjusted ? "_adjusted.svg" : "_raw.svg")))
                                    .string();
                    plot.validate();
                    atomic_write_file(plot.path,
                                      svg::render_heatmap(plot, map.grid_i, map.grid_s,
                                                          adjusted ? map.adjusted
                                                                   : map.raw));
                }
            }
        }
        std::cout << "explained point with residual mse "
                  << csv::format_double(explanation.residual_mse) << ", outputs in " << dir
                  << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "afex: " << e.what() << '\n';
        return 2;
    }
}

int run_compare(const std::string& config_path, const std::optional<std::string>& out_dir,
                std::optional<std::uint64_t> seed) {
    RunConfig config;
    std::unique_ptr<Oracle> oracle;
    try {
        config = load_run_config(config_path);
        if (seed) config.train.seed = *seed;
        if (config.methods.empty()) {
            throw ConfigError("compare-weighting needs at least one method");
        }
        oracle = make_oracle(config.oracle);
        for (WeightMethod method : config.methods) {
            TrainConfig per_method = config.train;
            per_method.method = method;
            per_method.validate(oracle->dim());
        }
        ensure_dir(out_dir ? *out_dir : config.out_dir);
    } catch (const std::exception& e) {
        std::cerr << "afex: config error: " << e.what() << '\n';
        return 1;
    }

    try {
        const std::vector<MethodTrace> traces =
            compare_weighting(*oracle, config.train, config.methods);

        std::ostringstream out;
        out << "iteration,method,mse\n";
        for (const MethodTrace& trace : traces) {
            const char* name = weight_method_name(trace.method);
            for (std::size_t i = 0; i < trace.mse_trace.size(); ++i) {
                out << i << ',' << name << ','
                    << csv::format_double(trace.mse_trace[i]) << '\n';
            }
        }
        atomic_write_file(join(out_dir, config.out_dir, "compare.csv"), out.str());

        if (config.emit_svg && !traces.empty() && !traces[0].mse_trace.empty()) {
            svg::PlotSpec plot;
            plot.kind = svg::PlotSpec::Kind::LossTrace;
            plot.title = "weighting methods";
            plot.x_label = "iteration";
            plot.y_label = "mse";
            plot.path = join(out_dir, config.out_dir, "compare.svg");
            plot.validate();
            std::vector<svg::Series> series;
            for (const MethodTrace& trace : traces) {
                svg::Series s;
                s.name = weight_method_name(trace.method);
                for (std::size_t i = 0; i < trace.mse_trace.size(); ++i) {
                    s.x.push_back(static_cast<double>(i));
                    s.y.push_back(trace.mse_trace[i]);
                }
                series.push_back(std::move(s));
            }
            atomic_write_file(plot.path, svg::render_line_plot(plot, series));
        }

        std::cout << "compared " << traces.size() << " weighting methods, outputs in "
                  << (out_dir ? *out_dir : config.out_dir) << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "afex: " << e.what() << '\n';
        return 2;
    }
}

int run_oracle_eval(const std::string& config_path,
                    const std::optional<std::string>& out_dir) {
    std::unique_ptr<Oracle> oracle;
    csv::Table table;
    std::string dir;
    try {
        const json root = parse_json_file(config_path);
        check_keys(root, {"oracle", "data", "out_dir"}, config_path);
        oracle = make_oracle(oracle_from_json(root.at("oracle"), config_path + ": oracle"));
        const std::string data_path = root.at("data").get<std::string>();
        try {
            table = csv::read_numeric_file(data_path);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        if (table.rows.empty()) throw ConfigError("'" + data_path + "' has no data rows");
        if (table.cols() != oracle->dim()) {
            throw ConfigError("'" + data_path + "' has " + std::to_string(table.cols()) +
                              " columns, the oracle expects " +
                              std::to_string(oracle->dim()));
        }
        std::string config_dir = ".";
        if (root.contains("out_dir")) config_dir = root.at("out_dir").get<std::string>();
        dir = out_dir ? *out_dir : config_dir;
        ensure_dir(dir);
    } catch (const json::exception& e) {
        std::cerr << "afex: config error: " << config_path << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "afex: config error: " << e.what() << '\n';
        return 1;
    }

    try {
        const std::size_t n = table.rows.size(), d = table.cols();
        Tensor x = Tensor::matrix(n, d);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) x.at(r, c) = table.rows[r][c];
        }
        const Tensor y = oracle->eval(x);

        std::ostringstream out;
        if (!table.header.empty()) {
            for (const std::string& name : table.header) out << name << ',';
            out << "prediction\n";
        } else {
            for (std::size_t c = 0; c < d; ++c) out << 'x' << c << ',';
            out << "prediction\n";
        }
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                out << csv::format_double(x.at(r, c)) << ',';
            }
            out << csv::format_double(y[r]) << '\n';
        }
        const std::string path = (fs::path(dir) / "predictions.csv").string();
        atomic_write_file(path, out.str());
        std::cout << "wrote " << n << " predictions to " << path << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "afex: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace afex::cli
