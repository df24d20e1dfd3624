#include "dimrank/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dimrank::kernels {

namespace {

void check_out(std::size_t rows, std::size_t out) {
    if (rows != out) throw DimensionMismatch("output span length does not match row count");
}

std::vector<std::size_t> select_top_k(const std::vector<double>& sims, std::size_t k) {
    std::vector<std::size_t> idx(sims.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, idx.size());
    auto better = [&](std::size_t a, std::size_t b) {
        return sims[a] != sims[b] ? sims[a] > sims[b] : a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    idx.resize(k);
    return idx;
}

}  // namespace

void score_users_serial(const ModelWeights& w, std::span<const float> doc,
                        const ContextFeatures& context, Rows users, std::span<float> out) {
    check_out(users.size(), out.size());
    const auto c = context_span(context);
    for (std::size_t i = 0; i < users.size(); ++i) out[i] = score(users[i], doc, c, w);
}

void score_users_parallel(const ModelWeights& w, std::span<const float> doc,
                          const ContextFeatures& context, Rows users, std::span<float> out) {
    check_out(users.size(), out.size());
    // Exceptions cannot leave an OpenMP region, so validate up front.
    for (const auto& u : users) detail::check_dims<float>(u.size(), doc.size(), kContextDim, w.dims);
    const auto c = context_span(context);
    const auto n = static_cast<std::ptrdiff_t>(users.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out[k] = detail::sigmoid(detail::forward_logit(users[k], doc, c, w, nullptr, nullptr));
    }
}

void score_documents_serial(const ModelWeights& w, std::span<const float> user,
                            const ContextFeatures& context, Rows docs, std::span<float> out) {
    check_out(docs.size(), out.size());
    const auto c = context_span(context);
    for (std::size_t i = 0; i < docs.size(); ++i) out[i] = score(user, docs[i], c, w);
}

void score_documents_parallel(const ModelWeights& w, std::span<const float> user,
                              const ContextFeatures& context, Rows docs, std::span<float> out) {
    check_out(docs.size(), out.size());
    for (const auto& d : docs) detail::check_dims<float>(user.size(), d.size(), kContextDim, w.dims);
    const auto c = context_span(context);
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out[k] = detail::sigmoid(detail::forward_logit(user, docs[k], c, w, nullptr, nullptr));
    }
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw DimensionMismatch("cosine of vectors with different lengths");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::size_t> cosine_top_k_serial(std::span<const float> query, Rows rows, std::size_t k) {
    std::vector<double> sims(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) sims[i] = cosine(query, rows[i]);
    return select_top_k(sims, k);
}

std::vector<std::size_t> cosine_top_k_parallel(std::span<const float> query, Rows rows,
                                               std::size_t k) {
    for (const auto& r : rows) {
        if (r.size() != query.size()) throw DimensionMismatch("cosine of vectors with different lengths");
    }
    std::vector<double> sims(rows.size());
    const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        sims[static_cast<std::size_t>(i)] = cosine(query, rows[static_cast<std::size_t>(i)]);
    }
    return select_top_k(sims, k);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace dimrank::kernels
