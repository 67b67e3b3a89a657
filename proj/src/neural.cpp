#include "bullbear/neural.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "bullbear/errors.hpp"

namespace bullbear {

Gradients& Gradients::operator+=(const Gradients& other) {
    if (weights.size() != other.weights.size()) throw ShapeMismatch("gradient layer count differs");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += other.weights[l];
        bias[l] += other.bias[l];
    }
    return *this;
}

double Gradients::max_abs() const {
    double m = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].size()) m = std::max(m, weights[l].cwiseAbs().maxCoeff());
        if (bias[l].size()) m = std::max(m, bias[l].cwiseAbs().maxCoeff());
    }
    return m;
}

const char* to_string(OutputActivation a) {
    switch (a) {
        case OutputActivation::Linear: return "linear";
        case OutputActivation::Tanh: return "tanh";
        case OutputActivation::ScaledTanh: return "scaled_tanh";
    }
    return "linear";
}

namespace {

OutputActivation activation_from_string(const std::string& s) {
    if (s == "linear") return OutputActivation::Linear;
    if (s == "tanh") return OutputActivation::Tanh;
    if (s == "scaled_tanh") return OutputActivation::ScaledTanh;
    throw InvalidShape("unknown output activation '" + s + "'");
}

}  // namespace

Mlp Mlp::init(const std::vector<std::size_t>& layer_sizes, OutputActivation output, std::uint64_t seed,
              double output_bound) {
    if (layer_sizes.size() < 2) throw InvalidShape("an MLP needs at least an input and an output layer");
    for (auto s : layer_sizes) {
        if (s == 0) throw InvalidShape("layer sizes must be >= 1");
    }
    if (!(output_bound > 0.0)) throw InvalidShape("output bound must be positive");

    Mlp net;
    net.sizes_ = layer_sizes;
    net.output_ = output;
    net.bound_ = output_bound;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const auto fan_in = static_cast<Eigen::Index>(layer_sizes[l]);
        const auto fan_out = static_cast<Eigen::Index>(layer_sizes[l + 1]);
        const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-s, s);
        Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
        for (Eigen::Index r = 0; r < fan_out; ++r)
            for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = dist(rng);
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) n += (sizes_[l] + 1) * sizes_[l + 1];
    return n;
}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
    if (layers_.empty()) throw InvalidShape("network is not initialized");
    if (static_cast<std::size_t>(x.rows()) != input_size())
        throw ShapeMismatch("input has " + std::to_string(x.rows()) + " rows, network expects " +
                            std::to_string(input_size()));
    if (cache) {
        cache->inputs.clear();
        cache->tanh.clear();
    }
    Matrix a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (cache) cache->inputs.push_back(a);
        Matrix z = (layers_[l].weights * a).colwise() + layers_[l].bias;
        const bool last = l + 1 == layers_.size();
        if (last && output_ == OutputActivation::Linear) {
            if (cache) cache->tanh.emplace_back();
            a = std::move(z);
            continue;
        }
        Matrix t = z.array().tanh();
        a = (last && output_ == OutputActivation::ScaledTanh) ? Matrix(bound_ * t) : t;
        if (cache) cache->tanh.push_back(std::move(t));
    }
    return a;
}

Vector Mlp::forward(const Vector& x) const { return forward(Matrix(x)).col(0); }

Gradients Mlp::backward(const Cache& cache, const Matrix& upstream, Matrix* input_grad) const {
    if (cache.inputs.size() != layers_.size()) throw ShapeMismatch("cache does not match network depth");
    const auto batch = cache.inputs.front().cols();
    if (static_cast<std::size_t>(upstream.rows()) != output_size() || upstream.cols() != batch)
        throw ShapeMismatch("upstream gradient shape does not match network output");

    Gradients g;
    g.weights.resize(layers_.size());
    g.bias.resize(layers_.size());
    Matrix delta = upstream;  // d/d(layer output)
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const bool last = k + 1 == layers_.size();
        // Through the activation, to d/dz.
        if (!(last && output_ == OutputActivation::Linear)) {
            const Matrix& t = cache.tanh[k];
            Matrix slope = 1.0 - t.array().square();
            if (last && output_ == OutputActivation::ScaledTanh) slope *= bound_;
            delta = delta.cwiseProduct(slope);
        }
        g.weights[k] = delta * cache.inputs[k].transpose();
        g.bias[k] = delta.rowwise().sum();
        if (k > 0 || input_grad) delta = layers_[k].weights.transpose() * delta;
    }
    if (input_grad) *input_grad = std::move(delta);
    return g;
}

Gradients Mlp::zero_gradients() const {
    Gradients g;
    for (const auto& l : layers_) {
        g.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        g.bias.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
}

Vector Mlp::flat_parameters() const {
    Vector out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index pos = 0;
    for (const auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out(pos++) = l.weights(r, c);
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) out(pos++) = l.bias(r);
    }
    return out;
}

void Mlp::set_flat_parameters(const Vector& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count()) throw ShapeMismatch("flat parameter length");
    Eigen::Index pos = 0;
    for (auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = flat(pos++);
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat(pos++);
    }
}

Vector Mlp::flatten(const Gradients& g) {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < g.weights.size(); ++l) n += g.weights[l].size() + g.bias[l].size();
    Vector out(n);
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        for (Eigen::Index r = 0; r < g.weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < g.weights[l].cols(); ++c) out(pos++) = g.weights[l](r, c);
        for (Eigen::Index r = 0; r < g.bias[l].size(); ++r) out(pos++) = g.bias[l](r);
    }
    return out;
}

bool Mlp::all_finite() const {
    for (const auto& l : layers_) {
        if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
    if (a.sizes_ != b.sizes_ || a.output_ != b.output_ || a.bound_ != b.bound_) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
        if (a.layers_[l].weights != b.layers_[l].weights || a.layers_[l].bias != b.layers_[l].bias) return false;
    }
    return true;
}

nlohmann::json Mlp::to_json() const {
    nlohmann::json j;
    j["format"] = "bullbear-mlp";
    j["version"] = 1;
    j["layer_sizes"] = sizes_;
    j["output_activation"] = to_string(output_);
    j["output_bound"] = bound_;
    auto& layers = j["layers"] = nlohmann::json::array();
    for (const auto& l : layers_) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
        layers.push_back({{"weights", w}, {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "bullbear-mlp" || j.at("version").get<int>() != 1)
            throw InvalidShape("unsupported network checkpoint format");
        Mlp net;
        net.sizes_ = j.at("layer_sizes").get<std::vector<std::size_t>>();
        net.output_ = activation_from_string(j.at("output_activation").get<std::string>());
        net.bound_ = j.at("output_bound").get<double>();
        const auto& layers = j.at("layers");
        if (net.sizes_.size() < 2 || layers.size() + 1 != net.sizes_.size())
            throw InvalidShape("layer list does not match layer sizes");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto rows = static_cast<Eigen::Index>(net.sizes_[l + 1]);
            const auto cols = static_cast<Eigen::Index>(net.sizes_[l]);
            auto w = layers[l].at("weights").get<std::vector<double>>();
            auto b = layers[l].at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
                throw InvalidShape("parameter array length does not match layer sizes");
            Layer layer{Matrix(rows, cols), Vector(rows)};
            std::size_t pos = 0;
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[pos++];
            for (Eigen::Index r = 0; r < rows; ++r) layer.bias(r) = b[static_cast<std::size_t>(r)];
            net.layers_.push_back(std::move(layer));
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidShape(std::string("malformed network checkpoint: ") + e.what());
    }
}

void Mlp::save(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << to_json().dump(1) << '\n';
    if (!os) throw IoError("write failed: " + path.string());
}

Mlp Mlp::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidShape(path.string() + ": " + e.what());
    }
    return from_json(j);
}

Adam::Adam(const Mlp& net, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(net.zero_gradients()), v_(net.zero_gradients()) {}

void Adam::apply(Mlp& net, const Gradients& grads) {
    auto& layers = net.layers();
    if (grads.weights.size() != layers.size() || m_.weights.size() != layers.size())
        throw ShapeMismatch("gradient/optimizer layer count does not match network");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (grads.weights[l].rows() != layers[l].weights.rows() || grads.weights[l].cols() != layers[l].weights.cols() ||
            grads.bias[l].size() != layers[l].bias.size())
            throw ShapeMismatch("gradient shape does not match layer " + std::to_string(l));
    }
    ++step_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weights, grads.weights[l], m_.weights[l], v_.weights[l]);
        update(layers[l].bias, grads.bias[l], m_.bias[l], v_.bias[l]);
    }
}

bool operator==(const Adam& a, const Adam& b) {
    if (a.step_ != b.step_ || a.lr_ != b.lr_ || a.m_.weights.size() != b.m_.weights.size()) return false;
    for (std::size_t l = 0; l < a.m_.weights.size(); ++l) {
        if (a.m_.weights[l] != b.m_.weights[l] || a.v_.weights[l] != b.v_.weights[l] || a.m_.bias[l] != b.m_.bias[l] ||
            a.v_.bias[l] != b.v_.bias[l])
            return false;
    }
    return true;
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
    if (!target.same_shape(online)) throw ShapeMismatch("soft update between networks of different shapes");
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidParams("tau must lie in [0, 1]");
    auto& t = target.layers();
    const auto& o = online.layers();
    for (std::size_t l = 0; l < t.size(); ++l) {
        t[l].weights = tau * o[l].weights + (1.0 - tau) * t[l].weights;
        t[l].bias = tau * o[l].bias + (1.0 - tau) * t[l].bias;
    }
}

}  // namespace bullbear
