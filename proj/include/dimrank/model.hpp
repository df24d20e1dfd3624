#pragma once

// Scoring network: a one-hidden-layer MLP over [user; document; context]
// with a sigmoid output, plus weighted binary cross-entropy and its exact
// gradients. Templated on the scalar so serving runs in float and gradient
// checks run in double.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "dimrank/errors.hpp"
#include "dimrank/ids.hpp"
#include "dimrank/rng.hpp"

namespace dimrank {

enum class SessionKind : std::uint8_t { browse = 0, search = 1 };

inline constexpr std::size_t kContextDim = 6;
inline constexpr std::size_t kTimeBuckets = 4;

struct ContextFeatures {
    std::array<float, kContextDim> values{};

    bool operator==(const ContextFeatures&) const = default;
};

/// One-hot over four six-hour UTC buckets followed by one-hot session kind.
ContextFeatures featurize_context(std::int64_t timestamp, SessionKind kind);

const char* to_string(SessionKind kind);
SessionKind parse_session_kind(const std::string& s);

enum class LabelSource : std::uint8_t { explicit_signal = 0, implicit_signal = 1 };

struct Label {
    std::uint8_t target = 1;  // 1 = like, 0 = dislike
    float magnitude = 1.0f;   // "how much", in (0, 1]
    LabelSource source = LabelSource::explicit_signal;

    /// Throws InvalidLabel unless magnitude is in (0, 1].
    static Label make(bool like, double magnitude,
                      LabelSource source = LabelSource::explicit_signal);
    void validate() const;

    bool operator==(const Label&) const = default;
};

struct ModelDims {
    std::size_t user_dim = 32;
    std::size_t doc_dim = 32;
    std::size_t context_dim = kContextDim;
    std::size_t hidden = 64;

    std::size_t input_dim() const { return user_dim + doc_dim + context_dim; }
    bool operator==(const ModelDims&) const = default;
};

template <class T>
struct BasicWeights {
    ModelDims dims;
    std::vector<T> w1;  // hidden x input_dim, row-major
    std::vector<T> b1;  // hidden
    std::vector<T> w2;  // hidden
    T b2 = 0;

    BasicWeights() = default;
    explicit BasicWeights(const ModelDims& d)
        : dims(d), w1(d.hidden * d.input_dim(), T(0)), b1(d.hidden, T(0)), w2(d.hidden, T(0)) {}

    /// He-uniform, Uniform(+-sqrt(6/fan_in)), for both layers; zero biases.
    static BasicWeights random(const ModelDims& d, Rng& rng) {
        BasicWeights w(d);
        const double a1 = std::sqrt(6.0 / static_cast<double>(d.input_dim()));
        for (auto& x : w.w1) x = static_cast<T>(rng.uniform(-a1, a1));
        const double a2 = std::sqrt(6.0 / static_cast<double>(d.hidden));
        for (auto& x : w.w2) x = static_cast<T>(rng.uniform(-a2, a2));
        return w;
    }

    template <class U>
    BasicWeights<U> cast() const {
        BasicWeights<U> out(dims);
        std::copy(w1.begin(), w1.end(), out.w1.begin());
        std::copy(b1.begin(), b1.end(), out.b1.begin());
        std::copy(w2.begin(), w2.end(), out.w2.begin());
        out.b2 = static_cast<U>(b2);
        return out;
    }

    bool all_finite() const {
        auto finite = [](T x) { return std::isfinite(x); };
        return std::all_of(w1.begin(), w1.end(), finite) &&
               std::all_of(b1.begin(), b1.end(), finite) &&
               std::all_of(w2.begin(), w2.end(), finite) && std::isfinite(b2);
    }

    bool operator==(const BasicWeights&) const = default;
};

using ModelWeights = BasicWeights<float>;

template <class T>
struct BasicGradients {
    std::vector<T> dw1, db1, dw2;
    T db2 = 0;
    std::vector<T> du, dd;

    bool all_finite() const {
        auto finite = [](T x) { return std::isfinite(x); };
        for (const auto* v : {&dw1, &db1, &dw2, &du, &dd}) {
            if (!std::all_of(v->begin(), v->end(), finite)) return false;
        }
        return std::isfinite(db2);
    }
};

using Gradients = BasicGradients<float>;

/// Values cached by the forward pass for the following backward pass.
template <class T>
struct Activations {
    ModelDims dims;
    std::vector<T> input;   // [u; d; c]
    std::vector<T> pre;     // hidden pre-activations
    std::vector<T> hidden;  // ReLU(pre)
    T logit = 0;
    T prob = 0;
    const BasicWeights<T>* weights = nullptr;
    bool valid = false;
};

namespace detail {

template <class T>
T sigmoid(T z) {
    T p;
    if (z >= T(0)) {
        p = T(1) / (T(1) + std::exp(-z));
    } else {
        const T e = std::exp(z);
        p = e / (T(1) + e);
    }
    // Keep the output strictly inside (0, 1) even when saturated.
    return std::clamp(p, std::numeric_limits<T>::min(), std::nextafter(T(1), T(0)));
}

template <class T>
void check_dims(std::size_t u, std::size_t d, std::size_t c, const ModelDims& dims) {
    if (u != dims.user_dim || d != dims.doc_dim || c != dims.context_dim) {
        throw DimensionMismatch("input dimensions (" + std::to_string(u) + "," + std::to_string(d) +
                                "," + std::to_string(c) + ") do not match model (" +
                                std::to_string(dims.user_dim) + "," +
                                std::to_string(dims.doc_dim) + "," +
                                std::to_string(dims.context_dim) + ")");
    }
}

// Shared by the cached and uncached paths so both produce identical bits.
template <class T>
T forward_logit(std::span<const T> u, std::span<const T> d, std::span<const T> c,
                const BasicWeights<T>& w, std::type_identity_t<T>* pre_out,
                std::type_identity_t<T>* hidden_out) {
    const std::size_t in = w.dims.input_dim();
    T z = 0;
    for (std::size_t j = 0; j < w.dims.hidden; ++j) {
        const T* row = w.w1.data() + j * in;
        T a = w.b1[j];
        std::size_t i = 0;
        for (T x : u) a += row[i++] * x;
        for (T x : d) a += row[i++] * x;
        for (T x : c) a += row[i++] * x;
        const T h = a > T(0) ? a : T(0);
        if (pre_out) pre_out[j] = a;
        if (hidden_out) hidden_out[j] = h;
        z += w.w2[j] * h;
    }
    return z + w.b2;
}

}  // namespace detail

/// Like-probability only, no activation cache.
template <class T>
T score(std::span<const T> u, std::span<const T> d, std::span<const T> c,
        const BasicWeights<T>& w) {
    detail::check_dims<T>(u.size(), d.size(), c.size(), w.dims);
    return detail::sigmoid(detail::forward_logit(u, d, c, w, nullptr, nullptr));
}

template <class T>
T score_forward(std::span<const T> u, std::span<const T> d, std::span<const T> c,
                const BasicWeights<T>& w, Activations<T>& act) {
    detail::check_dims<T>(u.size(), d.size(), c.size(), w.dims);
    act.dims = w.dims;
    act.input.resize(w.dims.input_dim());
    std::copy(u.begin(), u.end(), act.input.begin());
    std::copy(d.begin(), d.end(), act.input.begin() + u.size());
    std::copy(c.begin(), c.end(), act.input.begin() + u.size() + d.size());
    act.pre.resize(w.dims.hidden);
    act.hidden.resize(w.dims.hidden);
    act.logit = detail::forward_logit(u, d, c, w, act.pre.data(), act.hidden.data());
    act.prob = detail::sigmoid(act.logit);
    act.weights = &w;
    act.valid = true;
    return act.prob;
}

/// magnitude * BCE(p, target). Requires p in (0, 1).
template <class T>
T loss(T p, const Label& label) {
    const T t = static_cast<T>(label.target);
    const T bce = -(t * std::log(p) + (T(1) - t) * std::log1p(-p));
    return static_cast<T>(label.magnitude) * bce;
}

/// Exact gradients of loss(score_forward(...)) with respect to the weights
/// and both embeddings. Consumes the activation cache.
template <class T>
BasicGradients<T> backward(Activations<T>& act, const Label& label) {
    if (!act.valid || act.weights == nullptr) {
        throw StaleActivations("backward called without a preceding forward pass");
    }
    act.valid = false;
    const BasicWeights<T>& w = *act.weights;
    const ModelDims& dims = act.dims;
    const std::size_t in = dims.input_dim();

    BasicGradients<T> g;
    g.dw1.assign(dims.hidden * in, T(0));
    g.db1.assign(dims.hidden, T(0));
    g.dw2.assign(dims.hidden, T(0));
    std::vector<T> dx(in, T(0));

    const T dz = static_cast<T>(label.magnitude) * (act.prob - static_cast<T>(label.target));
    g.db2 = dz;
    for (std::size_t j = 0; j < dims.hidden; ++j) {
        g.dw2[j] = dz * act.hidden[j];
        // ReLU subgradient at 0 is 0.
        if (!(act.pre[j] > T(0))) continue;
        const T dpre = dz * w.w2[j];
        g.db1[j] = dpre;
        const T* row = w.w1.data() + j * in;
        T* grow = g.dw1.data() + j * in;
        for (std::size_t i = 0; i < in; ++i) {
            grow[i] = dpre * act.input[i];
            dx[i] += dpre * row[i];
        }
    }
    g.du.assign(dx.begin(), dx.begin() + static_cast<std::ptrdiff_t>(dims.user_dim));
    g.dd.assign(dx.begin() + static_cast<std::ptrdiff_t>(dims.user_dim),
                dx.begin() + static_cast<std::ptrdiff_t>(dims.user_dim + dims.doc_dim));
    return g;
}

inline std::span<const float> context_span(const ContextFeatures& c) {
    return {c.values.data(), c.values.size()};
}

}  // namespace dimrank
