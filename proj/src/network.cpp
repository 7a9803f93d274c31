#include "annstat/network.hpp"

#include "annstat/csv.hpp"
#include "annstat/error.hpp"
#include "annstat/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace annstat {

namespace {
constexpr const char* kModule = "nn_core";
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::softmax: return "softmax";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    if (name == "identity" || name == "linear") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "softmax") return Activation::softmax;
    throw ValidationError(kModule, "unknown activation '" + std::string(name) + "'");
}

std::size_t parameter_count(const Architecture& arch) {
    const auto d = static_cast<std::size_t>(arch.input_dim);
    const auto k = static_cast<std::size_t>(arch.hidden_dim);
    const auto p = static_cast<std::size_t>(arch.output_dim);
    return (d * k + k) + (k * p + p);
}

Architecture NetworkModel::architecture() const {
    return {input_dim(), hidden_dim(), output_dim(), hidden_activation, output_activation};
}

void NetworkModel::validate() const {
    const auto k = hidden_weights.rows();
    const auto p = output_weights.rows();
    if (k == 0 || hidden_weights.cols() == 0 || p == 0) {
        throw ShapeError(kModule, "network dimensions must be positive");
    }
    if (hidden_biases.size() != k) throw ShapeError(kModule, "hidden bias length does not match hidden_dim");
    if (output_weights.cols() != k) throw ShapeError(kModule, "output weight columns do not match hidden_dim");
    if (output_biases.size() != p) throw ShapeError(kModule, "output bias length does not match output_dim");
    if (!hidden_weights.allFinite() || !hidden_biases.allFinite() || !output_weights.allFinite() ||
        !output_biases.allFinite()) {
        throw ValidationError(kModule, "network contains non-finite weights");
    }
    if (hidden_activation == Activation::softmax) {
        throw ValidationError(kModule, "softmax is not supported as a hidden activation");
    }
    if (output_activation == Activation::relu || output_activation == Activation::tanh) {
        throw ValidationError(kModule, "output activation must be identity, sigmoid or softmax");
    }
}

NetworkModel NetworkModel::zeros(const Architecture& arch) {
    NetworkModel m;
    m.hidden_weights = Eigen::MatrixXd::Zero(arch.hidden_dim, arch.input_dim);
    m.hidden_biases = Eigen::VectorXd::Zero(arch.hidden_dim);
    m.output_weights = Eigen::MatrixXd::Zero(arch.output_dim, arch.hidden_dim);
    m.output_biases = Eigen::VectorXd::Zero(arch.output_dim);
    m.hidden_activation = arch.hidden_activation;
    m.output_activation = arch.output_activation;
    return m;
}

void TrainConfig::validate(bool allow_zero_epochs) const {
    if (epochs < (allow_zero_epochs ? 0 : 1)) throw ConfigError(kModule, "epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError(kModule, "learning_rate must be > 0");
    }
    if (batch_size < 1) throw ConfigError(kModule, "batch_size must be >= 1");
    if (!(l2_penalty >= 0.0)) throw ConfigError(kModule, "l2_penalty must be >= 0");
}

double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::tanh: return std::tanh(z);
        case Activation::softmax: break;
    }
    throw ValidationError(kModule, "softmax is not an elementwise activation");
}

double activate_derivative(Activation a, double z) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case Activation::tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::softmax: break;
    }
    throw ValidationError(kModule, "softmax is not an elementwise activation");
}

Eigen::VectorXd apply_output_activation(Activation a, const Eigen::VectorXd& z) {
    if (a == Activation::softmax) {
        const double shift = z.maxCoeff();
        Eigen::VectorXd e = (z.array() - shift).exp();
        return e / e.sum();
    }
    return z.unaryExpr([a](double v) { return activate(a, v); });
}

namespace {

void check_input(const NetworkModel& model, Eigen::Index cols) {
    if (cols != model.input_dim()) {
        throw ShapeError(kModule, "input has " + std::to_string(cols) + " features, model expects " +
                                      std::to_string(model.input_dim()));
    }
}

Eigen::VectorXd hidden_pre(const NetworkModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return model.hidden_biases + model.hidden_weights * x;
}

Eigen::VectorXd apply_hidden(const NetworkModel& model, const Eigen::VectorXd& pre) {
    return pre.unaryExpr([&](double v) { return activate(model.hidden_activation, v); });
}

}  // namespace

ForwardResult forward(const NetworkModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    check_input(model, x.size());
    ForwardResult r;
    r.hidden = apply_hidden(model, hidden_pre(model, x));
    r.output = apply_output_activation(model.output_activation,
                                       model.output_biases + model.output_weights * r.hidden);
    return r;
}

Eigen::MatrixXd hidden_outputs(const NetworkModel& model, const Eigen::MatrixXd& inputs) {
    check_input(model, inputs.cols());
    Eigen::MatrixXd pre = (inputs * model.hidden_weights.transpose()).rowwise() + model.hidden_biases.transpose();
    return pre.unaryExpr([&](double v) { return activate(model.hidden_activation, v); });
}

Eigen::MatrixXd predict_proba(const NetworkModel& model, const Eigen::MatrixXd& inputs) {
    const Eigen::MatrixXd h = hidden_outputs(model, inputs);
    Eigen::MatrixXd z = (h * model.output_weights.transpose()).rowwise() + model.output_biases.transpose();
    Eigen::MatrixXd out(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        out.row(i) = apply_output_activation(model.output_activation, z.row(i).transpose()).transpose();
    }
    return out;
}

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& values) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return static_cast<int>(best);
}

std::vector<int> predict(const NetworkModel& model, const Eigen::MatrixXd& inputs) {
    const Eigen::MatrixXd proba = predict_proba(model, inputs);
    std::vector<int> out(static_cast<std::size_t>(proba.rows()));
    for (Eigen::Index i = 0; i < proba.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_lowest(proba.row(i).transpose());
    return out;
}

double accuracy(const NetworkModel& model, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    const auto pred = predict(model, data.features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

NetworkModel initialize_model(const Architecture& arch, double init_scale, std::uint64_t seed) {
    NetworkModel m = NetworkModel::zeros(arch);
    Rng rng(derive_seed(seed, "init"));
    auto fill = [&](Eigen::MatrixXd& w) {
        const double fan_in = static_cast<double>(w.cols());
        const double fan_out = static_cast<double>(w.rows());
        const double scale = init_scale > 0.0 ? init_scale : std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-scale, scale);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    };
    fill(m.hidden_weights);
    fill(m.output_weights);
    m.validate();
    return m;
}

namespace {

double sample_loss(Activation out_act, const Eigen::VectorXd& output, int label) {
    constexpr double tiny = 1e-300;
    switch (out_act) {
        case Activation::softmax: return -std::log(std::max(output[label], tiny));
        case Activation::sigmoid: {
            double loss = 0.0;
            for (Eigen::Index c = 0; c < output.size(); ++c) {
                const double t = c == label ? 1.0 : 0.0;
                loss -= t * std::log(std::max(output[c], tiny)) + (1.0 - t) * std::log(std::max(1.0 - output[c], tiny));
            }
            return loss;
        }
        default: {
            Eigen::VectorXd diff = output;
            diff[label] -= 1.0;
            return 0.5 * diff.squaredNorm();
        }
    }
}

void check_data(const NetworkModel& model, const Dataset& data) {
    check_input(model, data.num_features());
    if (static_cast<std::size_t>(data.features.rows()) != data.labels.size()) {
        throw ShapeError(kModule, "feature rows do not match label count");
    }
    for (int y : data.labels) {
        if (y < 0 || y >= model.output_dim()) throw ShapeError(kModule, "label exceeds model output_dim");
    }
}

// Sums per-sample gradients of the unpenalised loss over `rows`.
void accumulate_gradient(const NetworkModel& model, const Dataset& data, std::span<const std::size_t> rows,
                         ParameterGradient& g) {
    for (std::size_t r : rows) {
        const auto i = static_cast<Eigen::Index>(r);
        const Eigen::VectorXd x = data.features.row(i).transpose();
        const Eigen::VectorXd pre = hidden_pre(model, x);
        const Eigen::VectorXd h = apply_hidden(model, pre);
        const Eigen::VectorXd out =
            apply_output_activation(model.output_activation, model.output_biases + model.output_weights * h);
        Eigen::VectorXd delta_out = out;
        delta_out[data.labels[r]] -= 1.0;
        g.output_weights.noalias() += delta_out * h.transpose();
        g.output_biases += delta_out;
        Eigen::VectorXd delta_hidden = model.output_weights.transpose() * delta_out;
        for (Eigen::Index j = 0; j < delta_hidden.size(); ++j) {
            delta_hidden[j] *= activate_derivative(model.hidden_activation, pre[j]);
        }
        g.hidden_weights.noalias() += delta_hidden * x.transpose();
        g.hidden_biases += delta_hidden;
    }
}

ParameterGradient zero_gradient(const NetworkModel& model) {
    return {Eigen::MatrixXd::Zero(model.hidden_dim(), model.input_dim()), Eigen::VectorXd::Zero(model.hidden_dim()),
            Eigen::MatrixXd::Zero(model.output_dim(), model.hidden_dim()), Eigen::VectorXd::Zero(model.output_dim())};
}

bool all_finite(const NetworkModel& m) {
    return m.hidden_weights.allFinite() && m.hidden_biases.allFinite() && m.output_weights.allFinite() &&
           m.output_biases.allFinite();
}

}  // namespace

double training_loss(const NetworkModel& model, const Dataset& data, double l2_penalty) {
    check_data(model, data);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto r = forward(model, data.features.row(static_cast<Eigen::Index>(i)).transpose());
        total += sample_loss(model.output_activation, r.output, data.labels[i]);
    }
    const double mean = total / static_cast<double>(data.size());
    const double penalty =
        0.5 * l2_penalty * (model.hidden_weights.squaredNorm() + model.output_weights.squaredNorm());
    return mean + penalty;
}

ParameterGradient loss_gradient(const NetworkModel& model, const Dataset& data, double l2_penalty) {
    check_data(model, data);
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    ParameterGradient g = zero_gradient(model);
    accumulate_gradient(model, data, rows, g);
    const double inv_n = 1.0 / static_cast<double>(data.size());
    g.hidden_weights = g.hidden_weights * inv_n + l2_penalty * model.hidden_weights;
    g.hidden_biases *= inv_n;
    g.output_weights = g.output_weights * inv_n + l2_penalty * model.output_weights;
    g.output_biases *= inv_n;
    return g;
}

NetworkModel continue_training(NetworkModel model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate(/*allow_zero_epochs=*/true);
    model.validate();
    check_data(model, data);
    if (data.size() == 0) throw InputError(kModule, "cannot train on an empty dataset");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, "shuffle"));
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t len = std::min(batch, order.size() - start);
            ParameterGradient g = zero_gradient(model);
            accumulate_gradient(model, data, std::span<const std::size_t>(order).subspan(start, len), g);
            const double step = cfg.learning_rate / static_cast<double>(len);
            model.hidden_weights -= step * g.hidden_weights + cfg.learning_rate * cfg.l2_penalty * model.hidden_weights;
            model.hidden_biases -= step * g.hidden_biases;
            model.output_weights -= step * g.output_weights + cfg.learning_rate * cfg.l2_penalty * model.output_weights;
            model.output_biases -= step * g.output_biases;
        }
        if (!all_finite(model)) throw DivergenceError(kModule, epoch, std::numeric_limits<double>::quiet_NaN());
        const double loss = training_loss(model, data, cfg.l2_penalty);
        if (!std::isfinite(loss)) throw DivergenceError(kModule, epoch, loss);
    }
    return model;
}

NetworkModel train(const Dataset& data, const Architecture& arch, const TrainConfig& cfg) {
    cfg.validate();
    if (arch.input_dim != data.num_features()) {
        throw ShapeError(kModule, "architecture input_dim does not match dataset features");
    }
    if (arch.output_dim < data.num_classes()) {
        throw ShapeError(kModule, "architecture output_dim is smaller than the number of classes");
    }
    return continue_training(initialize_model(arch, cfg.init_scale, cfg.seed), data, cfg);
}

ActivationMatrix extract_hidden(const NetworkModel& model, const Dataset& data) {
    ActivationMatrix acts;
    acts.values = hidden_outputs(model, data.features);
    acts.labels = data.labels;
    acts.class_names = data.class_names;
    for (Eigen::Index j = 0; j < model.hidden_dim(); ++j) acts.neuron_names.push_back("h" + std::to_string(j));
    return acts;
}

Eigen::VectorXd input_gradient(const NetworkModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                               Eigen::Index out_index) {
    check_input(model, x.size());
    if (out_index < 0 || out_index >= model.output_dim()) throw ShapeError(kModule, "output index out of range");
    const Eigen::VectorXd pre = hidden_pre(model, x);
    const Eigen::VectorXd h = apply_hidden(model, pre);
    const Eigen::VectorXd z = model.output_biases + model.output_weights * h;

    // Row out_index of the Jacobian d output / d z.
    Eigen::VectorXd dout_dz = Eigen::VectorXd::Zero(z.size());
    switch (model.output_activation) {
        case Activation::softmax: {
            const Eigen::VectorXd s = apply_output_activation(Activation::softmax, z);
            dout_dz = -s[out_index] * s;
            dout_dz[out_index] += s[out_index];
            break;
        }
        default: dout_dz[out_index] = activate_derivative(model.output_activation, z[out_index]); break;
    }
    Eigen::VectorXd dh = model.output_weights.transpose() * dout_dz;
    for (Eigen::Index j = 0; j < dh.size(); ++j) dh[j] *= activate_derivative(model.hidden_activation, pre[j]);
    return model.hidden_weights.transpose() * dh;
}

namespace {

using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& field) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw ValidationError(kModule, "field '" + field + "' must have " + std::to_string(rows) + " rows");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ValidationError(kModule, "field '" + field + "' row " + std::to_string(r) + " must have " +
                                               std::to_string(cols) + " entries");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& cell = row[static_cast<std::size_t>(c)];
            if (!cell.is_number()) throw ValidationError(kModule, "field '" + field + "' holds a non-number");
            m(r, c) = cell.get<double>();
        }
    }
    return m;
}

Eigen::VectorXd vector_from(const json& j, Eigen::Index size, const std::string& field) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
        throw ValidationError(kModule, "field '" + field + "' must have " + std::to_string(size) + " entries");
    }
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        const auto& cell = j[static_cast<std::size_t>(i)];
        if (!cell.is_number()) throw ValidationError(kModule, "field '" + field + "' holds a non-number");
        v[i] = cell.get<double>();
    }
    return v;
}

}  // namespace

std::string model_to_json(const NetworkModel& model) {
    model.validate();
    json doc;
    doc["d"] = model.input_dim();
    doc["k"] = model.hidden_dim();
    doc["p"] = model.output_dim();
    doc["hidden_activation"] = to_string(model.hidden_activation);
    doc["output_activation"] = to_string(model.output_activation);
    doc["A"] = matrix_json(model.hidden_weights);
    doc["a0"] = vector_json(model.hidden_biases);
    doc["B"] = matrix_json(model.output_weights);
    doc["b0"] = vector_json(model.output_biases);
    return doc.dump(2) + "\n";
}

NetworkModel model_from_json(const std::string& text, const std::string& source_name) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(kModule, e.what(), source_name + ": byte " + std::to_string(e.byte));
    }
    if (!doc.is_object()) throw ValidationError(kModule, "model document must be an object");
    for (const char* key : {"d", "k", "p", "hidden_activation", "output_activation", "A", "a0", "B", "b0"}) {
        if (!doc.contains(key)) throw ValidationError(kModule, std::string("model document lacks field '") + key + "'");
    }
    auto dim = [&](const char* key) {
        const auto& v = doc[key];
        if (!v.is_number_integer() || v.get<long long>() < 1) {
            throw ValidationError(kModule, std::string("field '") + key + "' must be a positive integer");
        }
        return static_cast<Eigen::Index>(v.get<long long>());
    };
    const auto d = dim("d");
    const auto k = dim("k");
    const auto p = dim("p");
    NetworkModel m;
    m.hidden_activation = activation_from_string(doc["hidden_activation"].get<std::string>());
    m.output_activation = activation_from_string(doc["output_activation"].get<std::string>());
    m.hidden_weights = matrix_from(doc["A"], k, d, "A");
    m.hidden_biases = vector_from(doc["a0"], k, "a0");
    m.output_weights = matrix_from(doc["B"], p, k, "B");
    m.output_biases = vector_from(doc["b0"], p, "b0");
    m.validate();
    return m;
}

void save_model(const NetworkModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, model_to_json(model));
}

NetworkModel load_model(const std::filesystem::path& path) {
    return model_from_json(read_text_file(path), path.string());
}

}  // namespace annstat
