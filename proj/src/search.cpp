#include "dimrank/search.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dimrank/kernels.hpp"
#include "dimrank/store.hpp"

namespace dimrank {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                          (c >= '0' && c <= '9') || c >= 0x80;
        if (word) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t InvertedIndex::doc_frequency(const std::string& token) const {
    auto it = postings.find(token);
    return it == postings.end() ? 0 : it->second.size();
}

IndexWriter::IndexWriter() : published_(std::make_shared<InvertedIndex>()) {}

std::size_t IndexWriter::index_post(const Post& post) {
    if (!indexed_.insert(post.post_id).second) return 0;
    const auto tokens = tokenize(post.text);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [token, count] : tf) {
        auto& list = master_.postings[token];
        const Posting p{post.post_id, count};
        auto pos = std::lower_bound(list.begin(), list.end(), p,
                                    [](const Posting& a, const Posting& b) { return a.post < b.post; });
        list.insert(pos, p);
    }
    master_.doc_length[post.post_id] = static_cast<std::uint32_t>(tokens.size());
    master_.total_length += tokens.size();
    return tokens.size();
}

void IndexWriter::commit() {
    auto snap = std::make_shared<const InvertedIndex>(master_);
    std::lock_guard lock(mu_);
    published_ = std::move(snap);
}

std::shared_ptr<const InvertedIndex> IndexWriter::snapshot() const {
    std::lock_guard lock(mu_);
    return published_;
}

std::vector<GenericHit> generic_search(const InvertedIndex& index, std::string_view keywords,
                                       std::size_t top_k) {
    if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
    auto tokens = tokenize(keywords);
    if (tokens.empty()) throw EmptyQuery("query has no searchable tokens");
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());

    const double n = static_cast<double>(index.doc_count());
    const double avgdl = index.avg_length();
    std::map<PostId, double> acc;
    for (const auto& token : tokens) {
        auto it = index.postings.find(token);
        if (it == index.postings.end()) continue;
        const double df = static_cast<double>(it->second.size());
        // The +1 inside the log keeps idf positive even for very common terms.
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const Posting& p : it->second) {
            const double tf = p.term_frequency;
            const double dl = index.doc_length.at(p.post);
            const double norm = kBm25K1 * (1.0 - kBm25B + kBm25B * dl / avgdl);
            acc[p.post] += idf * tf * (kBm25K1 + 1.0) / (tf + norm);
        }
    }
    std::vector<GenericHit> hits;
    hits.reserve(acc.size());
    for (const auto& [post, s] : acc) {
        if (s > 0.0) hits.push_back({post, s});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const GenericHit& a, const GenericHit& b) {
        return a.bm25 != b.bm25 ? a.bm25 > b.bm25 : a.post < b.post;
    });
    if (hits.size() > top_k) hits.resize(top_k);
    return hits;
}

std::vector<SearchResult> personalize(const std::vector<GenericHit>& hits, UserId user,
                                      const ContextFeatures& context, double alpha,
                                      const ModelState& model, const AuthorLookup& authors) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in [0, 1]");
    if (hits.empty()) return {};

    std::vector<std::vector<float>> docs;
    docs.reserve(hits.size());
    for (const auto& h : hits) {
        auto it = authors.find(h.post);
        if (it == authors.end()) throw UnknownPost("no author known for post " + std::to_string(h.post.value));
        docs.push_back(document_vector(model, h.post, it->second));
    }
    std::vector<std::span<const float>> rows(docs.begin(), docs.end());
    std::vector<float> model_scores(hits.size());
    const auto u = user_vector(model, user);
    kernels::score_documents_parallel(model.weights, u, context, rows, model_scores);

    double max_bm25 = 0.0;
    for (const auto& h : hits) max_bm25 = std::max(max_bm25, h.bm25);

    std::vector<SearchResult> out(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const double norm = max_bm25 > 0.0 ? hits[i].bm25 / max_bm25 : 0.0;
        const double m = model_scores[i];
        out[i] = {hits[i].post, hits[i].bm25, m, alpha * norm + (1.0 - alpha) * m, 0};
    }
    std::sort(out.begin(), out.end(), [](const SearchResult& a, const SearchResult& b) {
        return a.final_score != b.final_score ? a.final_score > b.final_score : a.post < b.post;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
    return out;
}

std::vector<SearchResult> keyword_search(const InvertedIndex& index, std::string_view keywords,
                                         UserId user, const ContextFeatures& context,
                                         std::size_t top_k, double alpha, const ModelState& model,
                                         const AuthorLookup& authors) {
    if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
    const auto hits = generic_search(index, keywords, kCandidateMultiplier * top_k);
    auto results = personalize(hits, user, context, alpha, model, authors);
    if (results.size() > top_k) results.resize(top_k);
    return results;
}

Searcher::Searcher(Store& store)
    : store_(store), published_authors_(std::make_shared<AuthorLookup>()) {
    sync();
}

std::size_t Searcher::index_post(const Post& post) {
    std::lock_guard lock(mu_);
    authors_[post.post_id] = post.author_user_id;
    const auto n = writer_.index_post(post);
    writer_.commit();
    published_authors_ = std::make_shared<const AuthorLookup>(authors_);
    return n;
}

std::size_t Searcher::sync() {
    std::lock_guard lock(mu_);
    std::size_t added = 0;
    for (const Post& p : store_.posts().all()) {
        if (authors_.contains(p.post_id)) continue;
        authors_[p.post_id] = p.author_user_id;
        writer_.index_post(p);
        ++added;
    }
    if (added > 0) {
        writer_.commit();
        published_authors_ = std::make_shared<const AuthorLookup>(authors_);
    }
    return added;
}

std::vector<SearchResult> Searcher::search(std::string_view keywords, UserId user,
                                           const ContextFeatures& context, std::size_t top_k,
                                           double alpha) {
    if (!store_.users().contains(user)) {
        throw UnknownUser("unknown user " + std::to_string(user.value));
    }
    auto snap = store_.snapshots().latest();
    if (!snap) throw Error("no model snapshot has been published");
    std::shared_ptr<const AuthorLookup> authors;
    {
        std::lock_guard lock(mu_);
        authors = published_authors_;
    }
    const auto index = writer_.snapshot();
    return keyword_search(*index, keywords, user, context, top_k, alpha, snap->state, *authors);
}

}  // namespace dimrank
