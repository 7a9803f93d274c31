#pragma once

#include "annstat/dataset.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace annstat {

enum class Activation { identity, relu, sigmoid, tanh, softmax };

std::string to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct Architecture {
    Eigen::Index input_dim = 0;
    Eigen::Index hidden_dim = 0;
    Eigen::Index output_dim = 0;
    Activation hidden_activation = Activation::relu;
    Activation output_activation = Activation::softmax;
};

// (d*k + k) + (k*p + p)
std::size_t parameter_count(const Architecture& arch);

/// Single-hidden-layer feedforward network:
///   hidden = psi(a0 + A x),  output = g(b0 + B hidden)
/// with A of shape k x d and B of shape p x k.
struct NetworkModel {
    Eigen::MatrixXd hidden_weights;  // k x d
    Eigen::VectorXd hidden_biases;   // k
    Eigen::MatrixXd output_weights;  // p x k
    Eigen::VectorXd output_biases;   // p
    Activation hidden_activation = Activation::relu;
    Activation output_activation = Activation::softmax;

    Eigen::Index input_dim() const { return hidden_weights.cols(); }
    Eigen::Index hidden_dim() const { return hidden_weights.rows(); }
    Eigen::Index output_dim() const { return output_weights.rows(); }
    Architecture architecture() const;
    std::size_t parameter_count() const { return annstat::parameter_count(architecture()); }

    // Throws ShapeError / ValidationError on inconsistent shapes, non-finite
    // weights or an activation that cannot be used in its slot.
    void validate() const;

    static NetworkModel zeros(const Architecture& arch);
};

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 0.05;
    int batch_size = 8;
    std::uint64_t seed = 42;
    double l2_penalty = 0.0;
    double init_scale = 0.0;  // <= 0: sqrt(6 / (fan_in + fan_out)) per layer

    // epochs >= 1 (or >= 0 when continuing training), learning_rate > 0
    void validate(bool allow_zero_epochs = false) const;
};

struct ForwardResult {
    Eigen::VectorXd hidden;
    Eigen::VectorXd output;
};

ForwardResult forward(const NetworkModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// Row-wise batch versions: n x k hidden outputs and n x p network outputs.
Eigen::MatrixXd hidden_outputs(const NetworkModel& model, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd predict_proba(const NetworkModel& model, const Eigen::MatrixXd& inputs);

// Argmax per row; ties resolve to the lowest class index.
std::vector<int> predict(const NetworkModel& model, const Eigen::MatrixXd& inputs);
int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& values);
double accuracy(const NetworkModel& model, const Dataset& data);

// Elementwise activation and its derivative with respect to the pre-activation
// (not defined for softmax, which is handled as a vector map).
double activate(Activation a, double z);
double activate_derivative(Activation a, double z);
Eigen::VectorXd apply_output_activation(Activation a, const Eigen::VectorXd& z);

NetworkModel initialize_model(const Architecture& arch, double init_scale, std::uint64_t seed);

// Mean training loss plus (l2 / 2) * sum of squared weights (biases excluded).
// The loss is paired with the output activation so that its gradient with
// respect to the output pre-activation is (output - one_hot):
// softmax -> cross-entropy, sigmoid -> binary cross-entropy per output,
// identity -> half squared error.
double training_loss(const NetworkModel& model, const Dataset& data, double l2_penalty = 0.0);

struct ParameterGradient {
    Eigen::MatrixXd hidden_weights;
    Eigen::VectorXd hidden_biases;
    Eigen::MatrixXd output_weights;
    Eigen::VectorXd output_biases;
};

ParameterGradient loss_gradient(const NetworkModel& model, const Dataset& data, double l2_penalty = 0.0);

// Mini-batch SGD from a seeded Glorot-uniform initialization. Deterministic in
// cfg.seed. Throws DivergenceError naming the epoch if the loss turns non-finite.
NetworkModel train(const Dataset& data, const Architecture& arch, const TrainConfig& cfg);

// Continues SGD from `start` (used for transfer-learning style retraining).
// cfg.epochs == 0 returns `start` unchanged.
NetworkModel continue_training(NetworkModel start, const Dataset& data, const TrainConfig& cfg);

/// Hidden-layer outputs over a dataset; row i is forward(model, x_i).hidden.
struct ActivationMatrix {
    Eigen::MatrixXd values;  // n x k
    std::vector<int> labels;
    std::vector<std::string> neuron_names;
    std::vector<std::string> class_names;

    Eigen::Index neurons() const { return values.cols(); }
    std::size_t size() const { return labels.size(); }
};

ActivationMatrix extract_hidden(const NetworkModel& model, const Dataset& data);

// d(output[out_index]) / dx, analytic through psi and g.
Eigen::VectorXd input_gradient(const NetworkModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                               Eigen::Index out_index);

// JSON document {d,k,p,hidden_activation,output_activation,A,a0,B,b0}; matrices
// are row-major nested arrays. Doubles are written in shortest round-trip form.
std::string model_to_json(const NetworkModel& model);
NetworkModel model_from_json(const std::string& text, const std::string& source_name = "<memory>");
void save_model(const NetworkModel& model, const std::filesystem::path& path);
NetworkModel load_model(const std::filesystem::path& path);

}  // namespace annstat
