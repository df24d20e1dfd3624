#include <cmath>

#include "doctest.h"

#include "dimrank/model.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dimrank;
using dimrank::testing::RawNet;

namespace {

constexpr std::int64_t kDay = 86400;

ModelWeights zero_weights() { return ModelWeights(ModelDims{}); }

std::vector<float> filled(std::size_t n, float v) { return std::vector<float>(n, v); }

RawNet raw_of(const ModelWeights& w) {
    RawNet net{w.dims.user_dim, w.dims.doc_dim, w.dims.context_dim, w.dims.hidden, {}, {}, {}, w.b2};
    const std::size_t in = w.dims.input_dim();
    for (std::size_t j = 0; j < w.dims.hidden; ++j) {
        net.w1.emplace_back(w.w1.begin() + static_cast<std::ptrdiff_t>(j * in),
                            w.w1.begin() + static_cast<std::ptrdiff_t>((j + 1) * in));
    }
    net.b1.assign(w.b1.begin(), w.b1.end());
    net.w2.assign(w.w2.begin(), w.w2.end());
    return net;
}

}  // namespace

TEST_CASE("context buckets") {
    using V = std::array<float, 6>;
    CHECK(featurize_context(30 * 60, SessionKind::browse).values == V{1, 0, 0, 0, 1, 0});
    CHECK(featurize_context(13 * 3600, SessionKind::search).values == V{0, 0, 1, 0, 0, 1});
    CHECK(featurize_context(23 * 3600 + 59 * 60, SessionKind::browse).values == V{0, 0, 0, 1, 1, 0});
    CHECK(featurize_context(5 * kDay + 6 * 3600, SessionKind::browse).values == V{0, 1, 0, 0, 1, 0});
}

TEST_CASE("context has exactly one hot entry per group") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const auto c = featurize_context(static_cast<std::int64_t>(rng.below(1ull << 40)),
                                         rng.bernoulli(0.5) ? SessionKind::browse : SessionKind::search);
        int time_ones = 0, session_ones = 0;
        for (std::size_t k = 0; k < 4; ++k) time_ones += c.values[k] == 1.0f;
        for (std::size_t k = 4; k < 6; ++k) session_ones += c.values[k] == 1.0f;
        float total = 0;
        for (float v : c.values) total += v;
        CHECK(time_ones == 1);
        CHECK(session_ones == 1);
        CHECK(total == 2.0f);
    }
}

TEST_CASE("session kind names") {
    CHECK(parse_session_kind("browse") == SessionKind::browse);
    CHECK(parse_session_kind("search") == SessionKind::search);
    CHECK(std::string(to_string(SessionKind::search)) == "search");
    CHECK_THROWS_AS(parse_session_kind("scroll"), InvalidArgument);
}

TEST_CASE("label validation") {
    CHECK_THROWS_AS(Label::make(true, 0.0), InvalidLabel);
    CHECK_THROWS_AS(Label::make(true, -0.5), InvalidLabel);
    CHECK_THROWS_AS(Label::make(false, 1.01), InvalidLabel);
    CHECK_THROWS_AS(Label::make(false, std::nan("")), InvalidLabel);
    const Label l = Label::make(false, 1.0, LabelSource::implicit_signal);
    CHECK(l.target == 0);
    CHECK(l.magnitude == 1.0f);
    CHECK(l.source == LabelSource::implicit_signal);
}

TEST_CASE("score of the zero network is one half") {
    const auto w = zero_weights();
    const auto u = filled(32, 0), d = filled(32, 0), c = filled(6, 0);
    CHECK(score<float>(u, d, c, w) == 0.5f);
}

TEST_CASE("output bias alone sets the probability") {
    auto w = zero_weights();
    w.b2 = std::log(3.0f);
    const auto u = filled(32, 0.3f), d = filled(32, -0.2f);
    const auto c = featurize_context(0, SessionKind::browse);
    CHECK(score<float>(u, d, context_span(c), w) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("seeded network matches the scalar oracle") {
    Rng rng(42);
    const auto w = ModelWeights::random(ModelDims{}, rng);
    std::vector<float> u(32), d(32);
    for (std::size_t i = 0; i < 32; ++i) {
        u[i] = 0.1f * static_cast<float>(i % 7) - 0.3f;
        d[i] = 0.05f * static_cast<float>(i % 5) - 0.1f;
    }
    const auto c = featurize_context(13 * 3600, SessionKind::search);
    const double got = score<float>(u, d, context_span(c), w);
    const std::vector<double> ud(u.begin(), u.end()), dd(d.begin(), d.end()),
        cd(c.values.begin(), c.values.end());
    const double want = static_cast<double>(dimrank::testing::oracle_score(raw_of(w), ud, dd, cd));
    CHECK(got == doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("score stays strictly inside (0, 1)") {
    auto w = zero_weights();
    const auto u = filled(32, 0), d = filled(32, 0), c = filled(6, 0);
    for (float b : {-1e4f, -200.0f, -90.0f, 90.0f, 200.0f, 1e4f}) {
        w.b2 = b;
        const float p = score<float>(u, d, c, w);
        CHECK(p > 0.0f);
        CHECK(p < 1.0f);
        const float l = loss(p, Label::make(b < 0, 1.0));
        CHECK(std::isfinite(l));
    }
    auto wd = zero_weights().cast<double>();
    wd.b2 = 1e4;
    const std::vector<double> ud(32), dd(32), cd(6);
    const double p = score<double>(ud, dd, cd, wd);
    CHECK(p < 1.0);
}

TEST_CASE("forward is a pure function") {
    Rng rng(9);
    const auto w = ModelWeights::random(ModelDims{}, rng);
    std::vector<float> u(32), d(32);
    for (auto& x : u) x = static_cast<float>(rng.uniform(-1, 1));
    for (auto& x : d) x = static_cast<float>(rng.uniform(-1, 1));
    const auto c = featurize_context(1234567, SessionKind::browse);
    const float a = score<float>(u, d, context_span(c), w);
    Activations<float> act;
    const float b = score_forward<float>(u, d, context_span(c), w, act);
    const float again = score<float>(u, d, context_span(c), w);
    CHECK(a == b);
    CHECK(a == again);
}

TEST_CASE("dimension mismatch") {
    const auto w = zero_weights();
    const auto u16 = filled(16, 0), d = filled(32, 0), c = filled(6, 0), c5 = filled(5, 0);
    CHECK_THROWS_AS(score<float>(u16, d, c, w), DimensionMismatch);
    CHECK_THROWS_AS(score<float>(d, d, c5, w), DimensionMismatch);
    Activations<float> act;
    CHECK_THROWS_AS(score_forward<float>(d, u16, c, w, act), DimensionMismatch);
}

TEST_CASE("weighted cross-entropy") {
    CHECK(loss(0.5, Label::make(true, 1.0)) == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(loss(0.5, Label::make(true, 0.5)) == doctest::Approx(0.3466).epsilon(1e-4));
    CHECK(loss(0.5, Label::make(false, 1.0)) == doctest::Approx(std::log(2.0)));
    // Minimum over p sits at p = t.
    for (double m : {0.2, 1.0}) {
        const auto like = Label::make(true, m);
        const auto dislike = Label::make(false, m);
        for (double p : {0.1, 0.5, 0.9, 0.99}) {
            CHECK(loss(1.0 - 1e-12, like) < loss(p, like));
            CHECK(loss(1e-12, dislike) < loss(p, dislike));
        }
    }
    CHECK(loss(1.0 - 1e-15, Label::make(true, 1.0)) >= 0.0);
}

TEST_CASE("logit gradient closed form") {
    auto w = zero_weights();
    w.b2 = std::log(3.0f);
    const auto u = filled(32, 0), d = filled(32, 0), c = filled(6, 0);
    Activations<float> act;
    score_forward<float>(u, d, c, w, act);
    const auto g = backward(act, Label::make(true, 1.0));
    CHECK(g.db2 == doctest::Approx(-0.25).epsilon(1e-6));

    score_forward<float>(u, d, c, w, act);
    const auto half = backward(act, Label::make(true, 0.5));
    CHECK(half.db2 == doctest::Approx(-0.125).epsilon(1e-6));
}

TEST_CASE("inactive hidden units get no gradient") {
    Rng rng(5);
    auto w = ModelWeights::random(ModelDims{}, rng);
    for (std::size_t j = 0; j < w.dims.hidden; j += 2) w.b1[j] = -100.0f;  // dead
    std::vector<float> u(32), d(32);
    for (auto& x : u) x = static_cast<float>(rng.uniform(-1, 1));
    for (auto& x : d) x = static_cast<float>(rng.uniform(-1, 1));
    const auto c = featurize_context(0, SessionKind::browse);
    Activations<float> act;
    score_forward<float>(u, d, context_span(c), w, act);
    const auto g = backward(act, Label::make(false, 1.0));
    const std::size_t in = w.dims.input_dim();
    for (std::size_t j = 0; j < w.dims.hidden; j += 2) {
        CHECK(g.db1[j] == 0.0f);
        CHECK(g.dw2[j] == 0.0f);
        for (std::size_t i = 0; i < in; ++i) REQUIRE(g.dw1[j * in + i] == 0.0f);
    }
}

TEST_CASE("relu subgradient at zero is zero") {
    auto w = zero_weights();
    std::fill(w.w2.begin(), w.w2.end(), 1.0f);
    const auto u = filled(32, 0), d = filled(32, 0), c = filled(6, 0);
    Activations<float> act;
    score_forward<float>(u, d, c, w, act);
    const auto g = backward(act, Label::make(true, 1.0));
    for (float x : g.db1) CHECK(x == 0.0f);
    for (float x : g.du) CHECK(x == 0.0f);
}

TEST_CASE("backward consumes the activation cache") {
    const auto w = zero_weights();
    const auto u = filled(32, 0), d = filled(32, 0), c = filled(6, 0);
    Activations<float> act;
    CHECK_THROWS_AS(backward(act, Label::make(true, 1.0)), StaleActivations);
    score_forward<float>(u, d, c, w, act);
    CHECK_NOTHROW(backward(act, Label::make(true, 1.0)));
    CHECK_THROWS_AS(backward(act, Label::make(true, 1.0)), StaleActivations);
}

TEST_CASE("gradient shapes mirror parameters") {
    ModelDims dims{5, 7, 6, 3};
    Rng rng(1);
    const auto w = ModelWeights::random(dims, rng);
    const auto u = filled(5, 0.2f), d = filled(7, -0.4f);
    const auto c = featurize_context(0, SessionKind::browse);
    Activations<float> act;
    score_forward<float>(u, d, context_span(c), w, act);
    const auto g = backward(act, Label::make(true, 1.0));
    CHECK(g.dw1.size() == w.w1.size());
    CHECK(g.db1.size() == 3);
    CHECK(g.dw2.size() == 3);
    CHECK(g.du.size() == 5);
    CHECK(g.dd.size() == 7);
    CHECK(g.all_finite());
}

TEST_CASE("analytic gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto r = dimrank::testing::gradient_check(seed, ModelDims{});
        INFO("seed " << seed << " worst " << r.worst);
        CHECK(r.max_relative_error < 1e-4);
        CHECK(r.components == 64 * 70 + 64 + 64 + 1 + 32 + 32);
    }
    const auto small = dimrank::testing::gradient_check(77, ModelDims{3, 4, 6, 5});
    CHECK(small.max_relative_error < 1e-4);
}

TEST_CASE("weights cast round trip") {
    Rng rng(2);
    const auto w = ModelWeights::random(ModelDims{}, rng);
    CHECK(w.cast<double>().cast<float>() == w);
    CHECK(w.all_finite());
    auto bad = w;
    bad.w2[3] = INFINITY;
    CHECK_FALSE(bad.all_finite());
}

TEST_CASE("he-uniform initialization range") {
    Rng rng(8);
    const ModelDims dims;
    const auto w = ModelWeights::random(dims, rng);
    const double a1 = std::sqrt(6.0 / 70.0), a2 = std::sqrt(6.0 / 64.0);
    for (float x : w.w1) REQUIRE(std::fabs(x) <= a1);
    for (float x : w.w2) REQUIRE(std::fabs(x) <= a2);
    for (float x : w.b1) CHECK(x == 0.0f);
    CHECK(w.b2 == 0.0f);
}
