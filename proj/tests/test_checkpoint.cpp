#include <cstring>
#include <fstream>

#include "doctest.h"

#include "dimrank/checkpoint.hpp"
#include "dimrank/io.hpp"
#include "dimrank/trainer.hpp"
#include "temp_dir.hpp"

using namespace dimrank;
using dimrank::testing::TempDir;

namespace {

// A state touched by a few hundred random SGD steps.
ModelCheckpoint trained_checkpoint(std::uint64_t seed, const ModelDims& dims = {}) {
    ModelCheckpoint ck;
    ck.state = ModelState::fresh(dims, seed);
    ck.hyper.dims = dims;
    Rng rng(seed);
    TrainerConfig cfg;
    for (std::uint64_t i = 0; i < 300; ++i) {
        Example e;
        e.example_id = i;
        e.user = UserId{rng.below(20)};
        e.post = PostId{rng.below(60)};
        e.timestamp = static_cast<std::int64_t>(rng.below(86400));
        e.label = Label::make(rng.bernoulli(0.5), rng.uniform(0.1, 1.0));
        sgd_step(e, UserId{e.post.value % 20}, ck.state, cfg);
        ck.state.training_cursor = i + 1;
    }
    return ck;
}

}  // namespace

TEST_CASE("serialization round trip is byte identical") {
    const auto ck = trained_checkpoint(1);
    const auto bytes = serialize_checkpoint(ck);
    const auto back = deserialize_checkpoint(bytes);
    CHECK(back == ck);
    CHECK(serialize_checkpoint(back) == bytes);
}

TEST_CASE("save load save gives identical files") {
    TempDir dir("ckpt");
    const auto ck = trained_checkpoint(2);
    save_checkpoint(dir / "a.ckpt", ck);
    const auto loaded = load_checkpoint(dir / "a.ckpt");
    save_checkpoint(dir / "b.ckpt", loaded);
    CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));
}

TEST_CASE("row insertion order does not affect the bytes") {
    const ModelDims dims{4, 4, 6, 3};
    ModelCheckpoint a, b;
    a.hyper.dims = b.hyper.dims = dims;
    a.state = b.state = ModelState::fresh(dims, 5);
    const std::vector<std::uint64_t> ids = {9, 2, 40, 7, 1};
    for (auto id : ids) get_or_init_user(a.state, UserId{id});
    for (auto it = ids.rbegin(); it != ids.rend(); ++it) get_or_init_user(b.state, UserId{*it});
    CHECK(a.state.users.ids() != b.state.users.ids());
    CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
}

TEST_CASE("every random checkpoint round trips") {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const ModelDims dims{1 + seed % 5, 2 + seed % 3, kContextDim, 1 + seed % 4};
        const auto ck = trained_checkpoint(seed, dims);
        const auto bytes = serialize_checkpoint(ck);
        CHECK(serialize_checkpoint(deserialize_checkpoint(bytes, dims)) == bytes);
    }
}

TEST_CASE("truncated checkpoint is corrupt") {
    const auto bytes = serialize_checkpoint(trained_checkpoint(3));
    for (std::size_t keep : {std::size_t{0}, std::size_t{5}, std::size_t{12}, bytes.size() / 2,
                             bytes.size() - 1}) {
        std::vector<std::byte> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(keep));
        CHECK_THROWS_AS(deserialize_checkpoint(cut), CorruptCheckpoint);
    }
}

TEST_CASE("flipped byte is corrupt") {
    auto bytes = serialize_checkpoint(trained_checkpoint(4));
    bytes[bytes.size() / 2] ^= std::byte{0x40};
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), CorruptCheckpoint);
}

TEST_CASE("bad magic is corrupt") {
    auto bytes = serialize_checkpoint(trained_checkpoint(4));
    bytes[0] = std::byte{'X'};
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), CorruptCheckpoint);
}

TEST_CASE("unknown format version") {
    auto bytes = serialize_checkpoint(trained_checkpoint(5));
    const std::uint32_t v = 2;
    std::memcpy(bytes.data() + 8, &v, 4);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), VersionMismatch);
}

TEST_CASE("dimension mismatch on load") {
    TempDir dir("ckpt");
    const auto ck = trained_checkpoint(6);
    save_checkpoint(dir / "x.ckpt", ck);
    ModelDims smaller;
    smaller.user_dim = 16;
    CHECK_THROWS_AS(load_checkpoint(dir / "x.ckpt", smaller), DimensionMismatch);
    CHECK_NOTHROW(load_checkpoint(dir / "x.ckpt", ModelDims{}));
}

TEST_CASE("missing file is an io error") {
    TempDir dir("ckpt");
    CHECK_THROWS_AS(load_checkpoint(dir / "nope.ckpt"), IoError);
}

TEST_CASE("the three load failures are distinct types") {
    // None derives from another, so callers can tell them apart.
    CorruptCheckpoint c("c");
    VersionMismatch v("v");
    DimensionMismatch d("d");
    CHECK(dynamic_cast<VersionMismatch*>(static_cast<Error*>(&c)) == nullptr);
    CHECK(dynamic_cast<DimensionMismatch*>(static_cast<Error*>(&v)) == nullptr);
    CHECK(dynamic_cast<CorruptCheckpoint*>(static_cast<Error*>(&d)) == nullptr);
}
