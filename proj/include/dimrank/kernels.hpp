#pragma once

// Batch scoring and similarity kernels. Each has an OpenMP version used in
// serving and a plain serial version kept as the reference for tests and the
// benchmark. Every output element is computed independently with the same
// scalar code, so both versions agree bit for bit.

#include <cstddef>
#include <span>
#include <vector>

#include "dimrank/model.hpp"

namespace dimrank::kernels {

using Rows = std::span<const std::span<const float>>;

/// out[i] = score(users[i], doc, context).
void score_users_serial(const ModelWeights& w, std::span<const float> doc,
                        const ContextFeatures& context, Rows users, std::span<float> out);
void score_users_parallel(const ModelWeights& w, std::span<const float> doc,
                          const ContextFeatures& context, Rows users, std::span<float> out);

/// out[i] = score(user, docs[i], context).
void score_documents_serial(const ModelWeights& w, std::span<const float> user,
                            const ContextFeatures& context, Rows docs, std::span<float> out);
void score_documents_parallel(const ModelWeights& w, std::span<const float> user,
                              const ContextFeatures& context, Rows docs, std::span<float> out);

/// Cosine similarity in double precision; 0 when either vector is zero.
double cosine(std::span<const float> a, std::span<const float> b);

/// Indices of the k rows most similar to `query`, best first, ties broken
/// by lower index.
std::vector<std::size_t> cosine_top_k_serial(std::span<const float> query, Rows rows, std::size_t k);
std::vector<std::size_t> cosine_top_k_parallel(std::span<const float> query, Rows rows,
                                               std::size_t k);

int max_threads();

}  // namespace dimrank::kernels
