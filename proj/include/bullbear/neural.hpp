/**
 * @file neural.hpp
 * @brief Small dense networks with exact reverse-mode gradients.
 *
 * Hidden layers use tanh. All computation is in double precision and works
 * on column batches: an input matrix is (input_size x batch).
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bullbear/market_data.hpp"

namespace bullbear {

enum class OutputActivation { Linear, Tanh, ScaledTanh };

struct Layer {
    Matrix weights;  // out x in
    Vector bias;     // out
};

/// Parameter-shaped gradient (or moment) storage.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> bias;

    Gradients& operator+=(const Gradients& other);
    double max_abs() const;
};

class Mlp {
public:
    /// Intermediate values of a forward pass, consumed by backward().
    struct Cache {
        std::vector<Matrix> inputs;  // input to each layer
        std::vector<Matrix> tanh;    // tanh of pre-activations (unused for a linear output layer)
    };

    Mlp() = default;

    /// Glorot-uniform weights, zero biases. Throws InvalidShape for fewer than
    /// two layers or a zero-width layer.
    static Mlp init(const std::vector<std::size_t>& layer_sizes, OutputActivation output, std::uint64_t seed,
                    double output_bound = 1.0);

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }
    OutputActivation output_activation() const { return output_; }
    double output_bound() const { return bound_; }
    std::size_t parameter_count() const;

    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
    Vector forward(const Vector& x) const;

    /// Gradients of sum(output .* upstream) with respect to every parameter;
    /// writes d/dx into `input_grad` when non-null.
    Gradients backward(const Cache& cache, const Matrix& upstream, Matrix* input_grad = nullptr) const;

    Gradients zero_gradients() const;

    /// Row-major weights then bias, layer by layer.
    Vector flat_parameters() const;
    void set_flat_parameters(const Vector& flat);
    static Vector flatten(const Gradients& g);

    bool same_shape(const Mlp& other) const { return sizes_ == other.sizes_; }
    bool all_finite() const;

    nlohmann::json to_json() const;
    static Mlp from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static Mlp load(const std::filesystem::path& path);

    friend bool operator==(const Mlp& a, const Mlp& b);

private:
    std::vector<std::size_t> sizes_;
    OutputActivation output_ = OutputActivation::Linear;
    double bound_ = 1.0;
    std::vector<Layer> layers_;
};

/// Adam with bias correction.
class Adam {
public:
    Adam() = default;
    Adam(const Mlp& net, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    /// Descends along `grads`. Throws ShapeMismatch for incongruent shapes.
    void apply(Mlp& net, const Gradients& grads);

    double learning_rate() const { return lr_; }
    std::uint64_t steps() const { return step_; }

    friend bool operator==(const Adam& a, const Adam& b);

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::uint64_t step_ = 0;
    Gradients m_;
    Gradients v_;
};

/// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(Mlp& target, const Mlp& online, double tau);

const char* to_string(OutputActivation a);

}  // namespace bullbear
