#include "afex/checkpoint.hpp"

#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "afex/basis.hpp"
#include "afex/ioutil.hpp"

namespace afex {

namespace {

using nlohmann::json;

constexpr const char* kKind = "afex-checkpoint";

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!obj.is_object()) {
        throw CheckpointError(where + ": expected an object");
    }
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw CheckpointError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

json tensor_to_json(const Tensor& t) {
    json out;
    out["shape"] = t.shape();
    out["data"] = std::vector<double>(t.ptr(), t.ptr() + t.numel());
    return out;
}

Tensor tensor_from_json(const json& j, const std::string& where) {
    check_keys(j, {"shape", "data"}, where);
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    const auto data = j.at("data").get<std::vector<double>>();
    std::size_t numel = 1;
    for (std::size_t s : shape) numel *= s;
    if (shape.empty() || numel != data.size()) {
        throw CheckpointError(where + ": shape does not match the data length");
    }
    return Tensor(shape, data);
}

json subnet_to_json(const Subnet& subnet) {
    json out;
    out["feature"] = subnet.feature;
    out["basis"] = subnet.basis;
    out["w1"] = tensor_to_json(subnet.w1);
    out["b1"] = tensor_to_json(subnet.b1);
    out["w2"] = tensor_to_json(subnet.w2);
    out["b2"] = tensor_to_json(subnet.b2);
    out["w3"] = tensor_to_json(subnet.w3);
    out["b3"] = tensor_to_json(subnet.b3);
    out["alpha"] = tensor_to_json(subnet.alpha);
    return out;
}

Subnet subnet_from_json(const json& j, const std::string& where) {
    check_keys(j, {"feature", "basis", "w1", "b1", "w2", "b2", "w3", "b3", "alpha"},
               where);
    Subnet subnet;
    subnet.feature = j.at("feature").get<std::size_t>();
    subnet.basis = j.at("basis").get<std::size_t>();
    subnet.w1 = tensor_from_json(j.at("w1"), where + ".w1");
    subnet.b1 = tensor_from_json(j.at("b1"), where + ".b1");
    subnet.w2 = tensor_from_json(j.at("w2"), where + ".w2");
    subnet.b2 = tensor_from_json(j.at("b2"), where + ".b2");
    subnet.w3 = tensor_from_json(j.at("w3"), where + ".w3");
    subnet.b3 = tensor_from_json(j.at("b3"), where + ".b3");
    subnet.alpha = tensor_from_json(j.at("alpha"), where + ".alpha");

    const bool chain_ok = subnet.w1.rank() == 2 && subnet.w1.rows() == 1 &&
                          subnet.b1.numel() == subnet.w1.cols() &&
                          subnet.w2.rank() == 2 && subnet.w2.rows() == subnet.w1.cols() &&
                          subnet.b2.numel() == subnet.w2.cols() &&
                          subnet.w3.rank() == 2 && subnet.w3.rows() == subnet.w2.cols() &&
                          subnet.w3.cols() == 1 && subnet.b3.numel() == 1 &&
                          subnet.alpha.numel() == 1;
    if (!chain_ok) {
        throw CheckpointError(where + ": layer shapes do not chain");
    }
    return subnet;
}

json config_to_json(const TrainConfig& config) {
    json out;
    out["batch_size"] = config.batch_size;
    out["iterations"] = config.iterations;
    out["learning_rate"] = config.learning_rate;
    out["center_stddev"] = config.center_stddev;
    out["local_radius"] = config.local_radius;
    out["k"] = config.k;
    out["lambda_ridge"] = config.lambda_ridge;
    out["surrogate_enabled"] = config.surrogate_enabled;
    out["lambda_surrogate"] = config.lambda_surrogate;
    out["surrogate_hidden"] = config.surrogate_hidden;
    out["pairwise_enabled"] = config.pairwise_enabled;
    out["standardize"] = config.standardize;
    out["seed"] = config.seed;
    out["method"] = weight_method_name(config.method);
    return out;
}

TrainConfig config_from_json(const json& j, const std::string& where) {
    check_keys(j,
               {"batch_size", "iterations", "learning_rate", "center_stddev",
                "local_radius", "k", "lambda_ridge", "surrogate_enabled",
                "lambda_surrogate", "surrogate_hidden", "pairwise_enabled",
                "standardize", "seed", "method"},
               where);
    TrainConfig config;
    config.batch_size = j.at("batch_size").get<std::size_t>();
    config.iterations = j.at("iterations").get<std::size_t>();
    config.learning_rate = j.at("learning_rate").get<double>();
    config.center_stddev = j.at("center_stddev").get<double>();
    config.local_radius = j.at("local_radius").get<double>();
    config.k = j.at("k").get<std::size_t>();
    config.lambda_ridge = j.at("lambda_ridge").get<double>();
    config.surrogate_enabled = j.at("surrogate_enabled").get<bool>();
    config.lambda_surrogate = j.at("lambda_surrogate").get<double>();
    config.surrogate_hidden = j.at("surrogate_hidden").get<std::vector<std::size_t>>();
    config.pairwise_enabled = j.at("pairwise_enabled").get<bool>();
    config.standardize = j.at("standardize").get<bool>();
    config.seed = j.at("seed").get<std::uint64_t>();
    try {
        config.method = weight_method_by_name(j.at("method").get<std::string>());
    } catch (const WeightingError& e) {
        throw CheckpointError(where + ": " + e.what());
    }
    return config;
}

}  // namespace

std::string serialize_checkpoint(const TrainedModel& model) {
    json out;
    out["format_version"] = kCheckpointFormatVersion;
    out["kind"] = kKind;
    out["column_order"] = kColumnOrderTag;
    out["config"] = config_to_json(model.config);

    json bank;
    bank["d"] = model.bank.d;
    bank["k"] = model.bank.k;
    json subnets = json::array();
    for (const Subnet& subnet : model.bank.subnets) {
        subnets.push_back(subnet_to_json(subnet));
    }
    bank["subnets"] = std::move(subnets);
    out["bank"] = std::move(bank);

    if (model.surrogate) {
        json surrogate;
        surrogate["d"] = model.surrogate->d;
        surrogate["hidden"] = model.surrogate->hidden;
        json weights = json::array(), biases = json::array();
        for (const Tensor& w : model.surrogate->weights) weights.push_back(tensor_to_json(w));
        for (const Tensor& b : model.surrogate->biases) biases.push_back(tensor_to_json(b));
        surrogate["weights"] = std::move(weights);
        surrogate["biases"] = std::move(biases);
        out["surrogate"] = std::move(surrogate);
    } else {
        out["surrogate"] = nullptr;
    }

    if (model.standardizer) {
        json standardizer;
        standardizer["mean"] = model.standardizer->mean;
        standardizer["scale"] = model.standardizer->scale;
        out["standardizer"] = std::move(standardizer);
    } else {
        out["standardizer"] = nullptr;
    }

    json optimizer;
    optimizer["lr"] = model.optimizer.lr;
    optimizer["beta1"] = model.optimizer.beta1;
    optimizer["beta2"] = model.optimizer.beta2;
    optimizer["eps"] = model.optimizer.eps;
    optimizer["t"] = model.optimizer.t;
    json m = json::array(), v = json::array();
    for (const Tensor& t : model.optimizer.m) m.push_back(tensor_to_json(t));
    for (const Tensor& t : model.optimizer.v) v.push_back(tensor_to_json(t));
    optimizer["m"] = std::move(m);
    optimizer["v"] = std::move(v);
    out["optimizer"] = std::move(optimizer);

    return out.dump(2) + "\n";
}

TrainedModel parse_checkpoint(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
    }

    try {
        check_keys(root,
                   {"format_version", "kind", "column_order", "config", "bank",
                    "surrogate", "standardizer", "optimizer"},
                   "checkpoint");
        const int version = root.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion) {
            throw CheckpointError("checkpoint format_version " + std::to_string(version) +
                                  " is not supported; this build reads version " +
                                  std::to_string(kCheckpointFormatVersion));
        }
        if (root.at("kind").get<std::string>() != kKind) {
            throw CheckpointError("file is not an " + std::string(kKind) + " document");
        }
        const std::string order = root.at("column_order").get<std::string>();
        if (order != kColumnOrderTag) {
            throw CheckpointError("column order tag '" + order + "' does not match '" +
                                  kColumnOrderTag + "'");
        }

        TrainedModel model;
        model.config = config_from_json(root.at("config"), "config");

        const json& bank = root.at("bank");
        check_keys(bank, {"d", "k", "subnets"}, "bank");
        model.bank.d = bank.at("d").get<std::size_t>();
        model.bank.k = bank.at("k").get<std::size_t>();
        const json& subnets = bank.at("subnets");
        if (!subnets.is_array() || subnets.size() != model.bank.d * model.bank.k) {
            throw CheckpointError("bank: expected " +
                                  std::to_string(model.bank.d * model.bank.k) +
                                  " subnets");
        }
        for (std::size_t idx = 0; idx < subnets.size(); ++idx) {
            Subnet subnet =
                subnet_from_json(subnets[idx], "bank.subnets[" + std::to_string(idx) + "]");
            if (subnet.feature != idx / model.bank.k || subnet.basis != idx % model.bank.k) {
                throw CheckpointError("bank.subnets[" + std::to_string(idx) +
                                      "]: out of feature-major order");
            }
            model.bank.subnets.push_back(std::move(subnet));
        }
        if (model.bank.k != model.config.k) {
            throw CheckpointError("bank k disagrees with the recorded config");
        }

        const json& surrogate = root.at("surrogate");
        if (!surrogate.is_null()) {
            check_keys(surrogate, {"d", "hidden", "weights", "biases"}, "surrogate");
            SurrogateNet net;
            net.d = surrogate.at("d").get<std::size_t>();
            net.hidden = surrogate.at("hidden").get<std::vector<std::size_t>>();
            const json& weights = surrogate.at("weights");
            const json& biases = surrogate.at("biases");
            if (!weights.is_array() || !biases.is_array() ||
                weights.size() != net.hidden.size() + 1 || biases.size() != weights.size()) {
                throw CheckpointError("surrogate: layer count mismatch");
            }
            for (std::size_t l = 0; l < weights.size(); ++l) {
                net.weights.push_back(
                    tensor_from_json(weights[l], "surrogate.weights[" + std::to_string(l) + "]"));
                net.biases.push_back(
                    tensor_from_json(biases[l], "surrogate.biases[" + std::to_string(l) + "]"));
            }
            std::size_t prev = net.d;
            for (std::size_t l = 0; l < net.weights.size(); ++l) {
                const std::size_t width =
                    l < net.hidden.size() ? net.hidden[l] : std::size_t{1};
                if (net.weights[l].rank() != 2 || net.weights[l].rows() != prev ||
                    net.weights[l].cols() != width || net.biases[l].numel() != width) {
                    throw CheckpointError("surrogate: layer " + std::to_string(l) +
                                          " shapes do not chain");
                }
                prev = width;
            }
            model.surrogate = std::move(net);
        }
        if (model.config.surrogate_enabled && !model.surrogate) {
            throw CheckpointError("config says surrogate_enabled but none is stored");
        }

        const json& standardizer = root.at("standardizer");
        if (!standardizer.is_null()) {
            check_keys(standardizer, {"mean", "scale"}, "standardizer");
            Standardizer st;
            st.mean = standardizer.at("mean").get<std::vector<double>>();
            st.scale = standardizer.at("scale").get<std::vector<double>>();
            if (st.mean.size() != model.bank.d || st.scale.size() != model.bank.d) {
                throw CheckpointError("standardizer: size does not match the bank");
            }
            for (double s : st.scale) {
                if (!(s > 0.0)) throw CheckpointError("standardizer: nonpositive scale");
            }
            model.standardizer = std::move(st);
        }
        if (model.config.standardize && !model.standardizer) {
            throw CheckpointError("config says standardize but no transform is stored");
        }

        const json& optimizer = root.at("optimizer");
        check_keys(optimizer, {"lr", "beta1", "beta2", "eps", "t", "m", "v"}, "optimizer");
        model.optimizer.lr = optimizer.at("lr").get<double>();
        model.optimizer.beta1 = optimizer.at("beta1").get<double>();
        model.optimizer.beta2 = optimizer.at("beta2").get<double>();
        model.optimizer.eps = optimizer.at("eps").get<double>();
        model.optimizer.t = optimizer.at("t").get<std::size_t>();
        const json& m = optimizer.at("m");
        const json& v = optimizer.at("v");
        if (!m.is_array() || !v.is_array() || m.size() != v.size()) {
            throw CheckpointError("optimizer: malformed moment arrays");
        }
        for (std::size_t i = 0; i < m.size(); ++i) {
            model.optimizer.m.push_back(
                tensor_from_json(m[i], "optimizer.m[" + std::to_string(i) + "]"));
            model.optimizer.v.push_back(
                tensor_from_json(v[i], "optimizer.v[" + std::to_string(i) + "]"));
        }
        if (!model.optimizer.m.empty()) {
            std::vector<Tensor*> params = model.bank.parameters();
            if (model.surrogate) {
                for (Tensor* p : model.surrogate->parameters()) params.push_back(p);
            }
            if (model.optimizer.m.size() != params.size()) {
                throw CheckpointError("optimizer: state covers " +
                                      std::to_string(model.optimizer.m.size()) +
                                      " tensors, the model has " +
                                      std::to_string(params.size()));
            }
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (model.optimizer.m[i].numel() != params[i]->numel() ||
                    model.optimizer.v[i].numel() != params[i]->numel()) {
                    throw CheckpointError("optimizer: moment shape mismatch at slot " +
                                          std::to_string(i));
                }
            }
        }
        return model;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const TrainedModel& model, const std::string& path) {
    atomic_write_file(path, serialize_checkpoint(model));
}

TrainedModel load_checkpoint(const std::string& path) {
    return parse_checkpoint(read_file(path));
}

}  // namespace afex
