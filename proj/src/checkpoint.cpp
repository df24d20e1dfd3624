#include "dimrank/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <cstring>

#include "dimrank/io.hpp"

namespace dimrank {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'R', 'C', 'K', 'P', 'T', '\0', '\n'};

constexpr std::uint32_t tag(const char (&s)[5]) {
    return static_cast<std::uint32_t>(s[0]) | static_cast<std::uint32_t>(s[1]) << 8 |
           static_cast<std::uint32_t>(s[2]) << 16 | static_cast<std::uint32_t>(s[3]) << 24;
}

constexpr std::uint32_t kHyper = tag("HYPR");
constexpr std::uint32_t kCounters = tag("CNTR");
constexpr std::uint32_t kWeights = tag("WGHT");
constexpr std::uint32_t kUsers = tag("USER");
constexpr std::uint32_t kDocs = tag("DOCS");
constexpr std::uint32_t kLikes = tag("LIKE");

using Reader = ByteReader<CorruptCheckpoint>;

void put_section(ByteWriter& out, std::uint32_t t, ByteWriter&& body) {
    out.put(t);
    out.put(static_cast<std::uint64_t>(body.bytes().size()));
    out.put_bytes(body.bytes());
}

std::span<const std::byte> get_section(Reader& r, std::uint32_t expected) {
    if (r.get<std::uint32_t>() != expected) throw CorruptCheckpoint("unexpected checkpoint section");
    const auto len = r.get<std::uint64_t>();
    if (len > r.remaining()) throw CorruptCheckpoint("checkpoint section overruns file");
    return r.get_bytes(static_cast<std::size_t>(len));
}

ByteWriter encode_table(const EmbeddingTable& table) {
    ByteWriter w;
    std::vector<std::uint64_t> ids = table.ids();
    std::sort(ids.begin(), ids.end());
    w.put(static_cast<std::uint64_t>(ids.size()));
    w.put(static_cast<std::uint64_t>(table.dim()));
    for (auto id : ids) {
        w.put(id);
        w.put_array(*table.find(id));
    }
    return w;
}

EmbeddingTable decode_table(std::span<const std::byte> bytes, std::size_t dim) {
    Reader r(bytes);
    const auto count = r.get<std::uint64_t>();
    if (r.get<std::uint64_t>() != dim) throw DimensionMismatch("embedding table dimension mismatch");
    EmbeddingTable table(dim);
    std::vector<float> row(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto id = r.get<std::uint64_t>();
        r.get_array(std::span<float>(row));
        if (table.contains(id)) throw CorruptCheckpoint("duplicate embedding row");
        table.insert(id, row);
    }
    return table;
}

}  // namespace

std::vector<std::byte> serialize_checkpoint(const ModelCheckpoint& ckpt) {
    const ModelState& s = ckpt.state;
    const ModelDims& d = ckpt.hyper.dims;
    if (!(s.dims() == d)) throw DimensionMismatch("checkpoint weights do not match hyperparameters");

    ByteWriter out;
    out.put_array(std::span<const char>(kMagic));
    out.put(ckpt.format_version);

    ByteWriter hyper;
    for (auto v : {d.user_dim, d.doc_dim, d.context_dim, d.hidden}) hyper.put(static_cast<std::uint64_t>(v));
    hyper.put(ckpt.hyper.eta_w);
    hyper.put(ckpt.hyper.eta_emb);
    hyper.put(ckpt.hyper.l2_emb);
    put_section(out, kHyper, std::move(hyper));

    ByteWriter counters;
    for (auto v : {s.seed, s.step, s.training_cursor, s.quarantined}) counters.put(v);
    put_section(out, kCounters, std::move(counters));

    ByteWriter weights;
    weights.put_array(std::span<const float>(s.weights.w1));
    weights.put_array(std::span<const float>(s.weights.b1));
    weights.put_array(std::span<const float>(s.weights.w2));
    weights.put(s.weights.b2);
    put_section(out, kWeights, std::move(weights));

    put_section(out, kUsers, encode_table(s.users));
    put_section(out, kDocs, encode_table(s.docs));

    ByteWriter likes;
    likes.put(static_cast<std::uint64_t>(s.liked_history.size()));
    for (const auto& [user, posts] : s.liked_history) {
        likes.put(user.value);
        likes.put(static_cast<std::uint32_t>(posts.size()));
        for (PostId p : posts) likes.put(p.value);
    }
    put_section(out, kLikes, std::move(likes));

    out.put(crc32_of(out.bytes()));
    return out.take();
}

ModelCheckpoint deserialize_checkpoint(std::span<const std::byte> bytes,
                                       std::optional<ModelDims> expected) {
    Reader r(bytes);
    std::array<char, 8> magic{};
    r.get_array(std::span<char>(magic));
    if (magic != kMagic) throw CorruptCheckpoint("not a checkpoint file (bad magic)");
    ModelCheckpoint ckpt;
    ckpt.format_version = r.get<std::uint32_t>();
    if (ckpt.format_version != kCheckpointFormatVersion) {
        throw VersionMismatch("checkpoint format version " + std::to_string(ckpt.format_version) +
                              " is not supported (expected " +
                              std::to_string(kCheckpointFormatVersion) + ")");
    }
    if (bytes.size() < 4) throw CorruptCheckpoint("checkpoint too short");
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    if (crc32_of(bytes.first(bytes.size() - 4)) != stored_crc) {
        throw CorruptCheckpoint("checkpoint checksum mismatch (truncated or damaged)");
    }

    {
        Reader h(get_section(r, kHyper));
        ModelDims& d = ckpt.hyper.dims;
        d.user_dim = h.get<std::uint64_t>();
        d.doc_dim = h.get<std::uint64_t>();
        d.context_dim = h.get<std::uint64_t>();
        d.hidden = h.get<std::uint64_t>();
        ckpt.hyper.eta_w = h.get<double>();
        ckpt.hyper.eta_emb = h.get<double>();
        ckpt.hyper.l2_emb = h.get<double>();
        if (expected && !(*expected == d)) {
            throw DimensionMismatch(
                "checkpoint dimensions (n=" + std::to_string(d.user_dim) + ", m=" +
                std::to_string(d.doc_dim) + ", p=" + std::to_string(d.context_dim) + ", h=" +
                std::to_string(d.hidden) + ") do not match configuration (n=" +
                std::to_string(expected->user_dim) + ", m=" + std::to_string(expected->doc_dim) +
                ", p=" + std::to_string(expected->context_dim) + ", h=" +
                std::to_string(expected->hidden) + ")");
        }
    }
    ModelState& s = ckpt.state;
    {
        Reader c(get_section(r, kCounters));
        s.seed = c.get<std::uint64_t>();
        s.step = c.get<std::uint64_t>();
        s.training_cursor = c.get<std::uint64_t>();
        s.quarantined = c.get<std::uint64_t>();
    }
    {
        Reader w(get_section(r, kWeights));
        s.weights = ModelWeights(ckpt.hyper.dims);
        w.get_array(std::span<float>(s.weights.w1));
        w.get_array(std::span<float>(s.weights.b1));
        w.get_array(std::span<float>(s.weights.w2));
        s.weights.b2 = w.get<float>();
        if (w.remaining() != 0) throw CorruptCheckpoint("weight section has trailing bytes");
    }
    s.users = decode_table(get_section(r, kUsers), ckpt.hyper.dims.user_dim);
    s.docs = decode_table(get_section(r, kDocs), ckpt.hyper.dims.doc_dim);
    {
        Reader l(get_section(r, kLikes));
        const auto users = l.get<std::uint64_t>();
        for (std::uint64_t i = 0; i < users; ++i) {
            const UserId user{l.get<std::uint64_t>()};
            const auto n = l.get<std::uint32_t>();
            if (n > kLikedHistory) throw CorruptCheckpoint("liked history too long");
            auto& posts = s.liked_history[user];
            for (std::uint32_t k = 0; k < n; ++k) posts.push_back(PostId{l.get<std::uint64_t>()});
        }
    }
    if (r.remaining() != 4) throw CorruptCheckpoint("unexpected trailing data in checkpoint");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ckpt, bool sync) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, serialize_checkpoint(ckpt), sync);
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path, std::optional<ModelDims> expected) {
    return deserialize_checkpoint(read_file(path), expected);
}

}  // namespace dimrank
