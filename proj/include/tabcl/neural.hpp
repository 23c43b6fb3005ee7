#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tabcl/rng.hpp"

namespace tabcl::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Activation { relu, identity };

/// y = x * weight + bias, with weight stored in x out.
template <typename T>
struct Dense {
    Matrix<T> weight;
    RowVector<T> bias;

    bool operator==(const Dense& o) const { return weight == o.weight && bias == o.bias; }
};

/// Chain of dense layers. Hidden layers use `activation`; the last layer is
/// activated only when `activate_output` is set.
template <typename T>
struct Stack {
    std::vector<Dense<T>> layers;
    Activation activation = Activation::relu;
    bool activate_output = true;

    std::size_t in_width() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.rows()); }
    std::size_t out_width() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.cols()); }
    bool activated(std::size_t i) const { return i + 1 < layers.size() || activate_output; }

    template <typename U>
    Stack<U> cast() const {
        Stack<U> s;
        s.activation = activation;
        s.activate_output = activate_output;
        for (const auto& l : layers) s.layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
        return s;
    }

    bool operator==(const Stack& o) const {
        return layers == o.layers && activation == o.activation && activate_output == o.activate_output;
    }
};

template <typename T>
struct StackGrads {
    std::vector<Dense<T>> layers;
};

/// Per-layer inputs and pre-activations recorded by a forward pass.
template <typename T>
struct StackTape {
    std::vector<Matrix<T>> inputs;
    std::vector<Matrix<T>> pre;
};

template <typename T>
Matrix<T> forward(const Stack<T>& stack, const Matrix<T>& x, StackTape<T>* tape = nullptr,
                  const char* name = "stack") {
    if (!stack.layers.empty() && x.cols() != stack.layers.front().weight.rows()) {
        throw std::invalid_argument(std::string(name) + ": input width " + std::to_string(x.cols()) + " != " +
                                    std::to_string(stack.layers.front().weight.rows()));
    }
    if (tape) {
        tape->inputs.clear();
        tape->pre.clear();
    }
    Matrix<T> h = x;
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        const auto& layer = stack.layers[i];
        Matrix<T> z(h.rows(), layer.weight.cols());
        z.noalias() = h * layer.weight;
        z.rowwise() += layer.bias;
        if (tape) {
            tape->inputs.push_back(std::move(h));
            tape->pre.push_back(z);
        }
        if (stack.activated(i) && stack.activation == Activation::relu) z = z.cwiseMax(T(0));
        if (!z.allFinite()) {
            throw NumericError(std::string("non-finite activation in ") + name + " layer " + std::to_string(i));
        }
        h = std::move(z);
    }
    return h;
}

/// Accumulates parameter gradients into `grads` (overwritten) and returns d/dx.
template <typename T>
Matrix<T> backward(const Stack<T>& stack, const StackTape<T>& tape, const Matrix<T>& dout, StackGrads<T>& grads) {
    grads.layers.resize(stack.layers.size());
    Matrix<T> d = dout;
    for (std::size_t li = stack.layers.size(); li-- > 0;) {
        const auto& layer = stack.layers[li];
        if (stack.activated(li) && stack.activation == Activation::relu) {
            d = (tape.pre[li].array() > T(0)).select(d, T(0));
        }
        auto& g = grads.layers[li];
        g.weight.noalias() = tape.inputs[li].transpose() * d;
        g.bias = d.colwise().sum();
        Matrix<T> dx(d.rows(), layer.weight.rows());
        dx.noalias() = d * layer.weight.transpose();
        d = std::move(dx);
    }
    return d;
}

/// Fan-in scaled uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
Dense<T> init_dense(std::size_t in, std::size_t out, Rng& rng) {
    Dense<T> d{Matrix<T>(in, out), RowVector<T>(out)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index r = 0; r < d.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.weight.cols(); ++c) d.weight(r, c) = static_cast<T>(rng.uniform(-bound, bound));
    }
    for (Eigen::Index c = 0; c < d.bias.cols(); ++c) d.bias(c) = static_cast<T>(rng.uniform(-bound, bound));
    return d;
}

template <typename T>
Stack<T> init_stack(const std::vector<std::size_t>& widths, Activation act, bool activate_output, Rng& rng) {
    Stack<T> s;
    s.activation = act;
    s.activate_output = activate_output;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) s.layers.push_back(init_dense<T>(widths[i], widths[i + 1], rng));
    return s;
}

/// Encoder: input -> hidden x encoder_layers, all activated.
/// Pre-train head: hidden -> hidden -> projection_width.
/// Classification head: hidden -> hidden -> class_count.
struct MlpSpec {
    std::size_t input_width = 0;
    std::size_t hidden_width = 256;
    std::size_t encoder_layers = 4;
    std::size_t projection_width = 256;
    std::size_t class_count = 2;
    Activation activation = Activation::relu;

    std::vector<std::size_t> encoder_widths() const {
        std::vector<std::size_t> w{input_width};
        for (std::size_t i = 0; i < encoder_layers; ++i) w.push_back(hidden_width);
        return w;
    }
    std::vector<std::size_t> pretrain_widths() const { return {hidden_width, hidden_width, projection_width}; }
    std::vector<std::size_t> classifier_widths() const { return {hidden_width, hidden_width, class_count}; }

    bool operator==(const MlpSpec&) const = default;
};

template <typename T>
struct ModelParams {
    MlpSpec spec;
    Stack<T> encoder;
    Stack<T> pretrain_head;
    Stack<T> classifier_head;

    bool operator==(const ModelParams&) const = default;
};

template <typename T>
Stack<T> init_encoder(const MlpSpec& spec, Rng& rng) {
    return init_stack<T>(spec.encoder_widths(), spec.activation, true, rng);
}
template <typename T>
Stack<T> init_pretrain_head(const MlpSpec& spec, Rng& rng) {
    return init_stack<T>(spec.pretrain_widths(), spec.activation, false, rng);
}
template <typename T>
Stack<T> init_classifier_head(const MlpSpec& spec, Rng& rng) {
    return init_stack<T>(spec.classifier_widths(), spec.activation, false, rng);
}

/// Each block drawn from its own stream so re-initializing one leaves the others intact.
template <typename T>
ModelParams<T> init_params(const MlpSpec& spec, std::uint64_t seed) {
    Rng re(stream_seed(seed, 0xE1)), rp(stream_seed(seed, 0xE2)), rc(stream_seed(seed, 0xE3));
    return {spec, init_encoder<T>(spec, re), init_pretrain_head<T>(spec, rp), init_classifier_head<T>(spec, rc)};
}

template <typename T>
bool all_finite(const Stack<T>& s) {
    for (const auto& l : s.layers) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment optimizer state for one stack.
template <typename T>
struct AdamState {
    AdamConfig config;
    std::vector<Dense<T>> m;
    std::vector<Dense<T>> v;
    long step = 0;

    static AdamState for_stack(const Stack<T>& s, AdamConfig cfg = {}) {
        AdamState st;
        st.config = cfg;
        for (const auto& l : s.layers) {
            st.m.push_back({Matrix<T>::Zero(l.weight.rows(), l.weight.cols()), RowVector<T>::Zero(l.bias.cols())});
            st.v.push_back(st.m.back());
        }
        return st;
    }

    bool operator==(const AdamState& o) const {
        return m == o.m && v == o.v && step == o.step && config.learning_rate == o.config.learning_rate &&
               config.beta1 == o.config.beta1 && config.beta2 == o.config.beta2 && config.epsilon == o.config.epsilon;
    }
};

namespace detail {
template <typename T, typename P, typename G, typename S>
void adam_update(P& param, const G& grad, S& m, S& v, T lr_t, T b1, T b2, T eps) {
    m = b1 * m + (T(1) - b1) * grad;
    v = b2 * v + (T(1) - b2) * grad.cwiseProduct(grad);
    param.array() -= lr_t * m.array() / (v.array().sqrt() + eps);
}
}  // namespace detail

template <typename T>
void adam_step(Stack<T>& stack, const StackGrads<T>& grads, AdamState<T>& st) {
    if (grads.layers.size() != stack.layers.size() || st.m.size() != stack.layers.size()) {
        throw std::invalid_argument("optimizer state does not match parameters");
    }
    ++st.step;
    const auto& c = st.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
    // Bias correction folded into the step size; epsilon scaled to match the
    // uncorrected second moment.
    const T lr_t = static_cast<T>(c.learning_rate * std::sqrt(bc2) / bc1);
    const T eps = static_cast<T>(c.epsilon * std::sqrt(bc2));
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        detail::adam_update(stack.layers[i].weight, grads.layers[i].weight, st.m[i].weight, st.v[i].weight, lr_t,
                            static_cast<T>(c.beta1), static_cast<T>(c.beta2), eps);
        detail::adam_update(stack.layers[i].bias, grads.layers[i].bias, st.m[i].bias, st.v[i].bias, lr_t,
                            static_cast<T>(c.beta1), static_cast<T>(c.beta2), eps);
    }
}

/// Row-wise softmax with max subtraction.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
    Matrix<T> p = logits;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const T mx = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

/// Lowest index among maximal entries.
template <typename T>
std::vector<int> argmax_rows(const Matrix<T>& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < m.cols(); ++c) {
            if (m(r, c) > m(r, best)) best = c;
        }
        out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

/// Mean cross-entropy over rows and its gradient with respect to the logits.
template <typename T>
T cross_entropy(const Matrix<T>& logits, const std::vector<int>& targets, Matrix<T>* dlogits) {
    const Matrix<T> p = softmax_rows(logits);
    const auto n = static_cast<T>(logits.rows());
    T loss = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const auto t = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(r)]);
        const T mx = logits.row(r).maxCoeff();
        const T lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
        loss += lse - logits(r, t);
    }
    if (dlogits) {
        *dlogits = p;
        for (Eigen::Index r = 0; r < logits.rows(); ++r) (*dlogits)(r, targets[static_cast<std::size_t>(r)]) -= T(1);
        *dlogits /= n;
    }
    return loss / n;
}

/// Everything needed to resume or reproduce a model.
struct Checkpoint {
    ModelParams<float> params;
    AdamState<float> encoder_opt;
    AdamState<float> pretrain_opt;
    AdamState<float> classifier_opt;
    std::string rng_state;
    long epoch = 0;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tabcl::nn
