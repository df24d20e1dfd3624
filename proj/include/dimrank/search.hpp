#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dimrank/records.hpp"
#include "dimrank/state.hpp"

namespace dimrank {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
inline constexpr std::size_t kCandidateMultiplier = 5;

/// ASCII lowercase, split on anything that is not an ASCII letter or digit.
/// Bytes >= 0x80 are kept inside tokens so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct Posting {
    PostId post;
    std::uint32_t term_frequency = 0;
};

/// Immutable once published.
struct InvertedIndex {
    std::unordered_map<std::string, std::vector<Posting>> postings;  // sorted by post id
    std::unordered_map<PostId, std::uint32_t> doc_length;
    std::uint64_t total_length = 0;

    std::size_t doc_count() const { return doc_length.size(); }
    double avg_length() const {
        return doc_count() ? static_cast<double>(total_length) / static_cast<double>(doc_count()) : 0.0;
    }
    std::size_t doc_frequency(const std::string& token) const;
};

/// Single writer; readers take immutable snapshots that are swapped in on
/// commit().
class IndexWriter {
public:
    IndexWriter();

    /// Returns the number of tokens indexed; 0 if the post was already
    /// indexed (no-op) or has no tokens.
    std::size_t index_post(const Post& post);
    void commit();
    std::shared_ptr<const InvertedIndex> snapshot() const;

private:
    InvertedIndex master_;
    std::unordered_set<PostId> indexed_;
    mutable std::mutex mu_;
    std::shared_ptr<const InvertedIndex> published_;
};

struct GenericHit {
    PostId post;
    double bm25 = 0.0;
};

/// BM25 over the OR of the query tokens. Throws EmptyQuery when the query
/// has no tokens. Ties broken by ascending post id.
std::vector<GenericHit> generic_search(const InvertedIndex& index, std::string_view keywords,
                                       std::size_t top_k);

struct SearchResult {
    PostId post;
    double generic_score = 0.0;
    double personalized_score = 0.0;
    double final_score = 0.0;
    std::size_t rank = 0;
};

/// Author of each candidate post, needed for documents the model has not
/// trained on yet.
using AuthorLookup = std::unordered_map<PostId, UserId>;

/// final = alpha * bm25 / max_bm25 + (1 - alpha) * model score. Output is a
/// permutation of the input, best first, ties by ascending post id.
std::vector<SearchResult> personalize(const std::vector<GenericHit>& hits, UserId user,
                                      const ContextFeatures& context, double alpha,
                                      const ModelState& model, const AuthorLookup& authors);

/// Generic pass for kCandidateMultiplier * top_k candidates, then
/// personalize, then the first top_k.
std::vector<SearchResult> keyword_search(const InvertedIndex& index, std::string_view keywords,
                                         UserId user, const ContextFeatures& context,
                                         std::size_t top_k, double alpha, const ModelState& model,
                                         const AuthorLookup& authors);

class Store;

/// Search over a store's posts: keeps the index current and resolves users
/// and authors for the personalized pass.
class Searcher {
public:
    explicit Searcher(Store& store);

    /// Indexes posts not yet indexed (including ones added by other
    /// processes) and publishes a new index snapshot if anything changed.
    std::size_t sync();
    std::size_t index_post(const Post& post);

    /// Throws UnknownUser, EmptyQuery. Uses the latest model snapshot.
    std::vector<SearchResult> search(std::string_view keywords, UserId user,
                                     const ContextFeatures& context, std::size_t top_k,
                                     double alpha);

    std::shared_ptr<const InvertedIndex> index() const { return writer_.snapshot(); }

private:
    Store& store_;
    std::mutex mu_;
    IndexWriter writer_;
    AuthorLookup authors_;
    std::shared_ptr<const AuthorLookup> published_authors_;
};

}  // namespace dimrank
