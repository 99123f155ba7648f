#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sad/checkpoint.hpp"
#include "sad/datagen.hpp"
#include "sad/error.hpp"
#include "sad/trainer.hpp"

using namespace sad;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sad_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Dataset small_dataset(std::string_view family, Method m) {
    DatagenConfig c;
    c.method = m;
    c.trust_horizon = family == "gaussian_bandit" ? 50 : 10;
    c.context_len = family == "gaussian_bandit" ? 12 : family_spec(family).horizon;
    c.dataset_size = 6;
    return generate_dataset(family, Split::train, c, 17);
}

}  // namespace

TEST(DatasetIo, RoundTripIsExact) {
    for (const char* fam : {"gaussian_bandit", "darkroom", "dense_grid"}) {
        for (Method m : {Method::SAD, Method::AD, Method::DPT_random, Method::DIT}) {
            const Dataset d = small_dataset(fam, m);
            const std::string text = dataset_to_string(d);
            const Dataset back = dataset_from_string(text);
            EXPECT_EQ(back, d) << fam << " " << to_string(m);
            EXPECT_EQ(dataset_to_string(back), text);
        }
    }
}

TEST(DatasetIo, FileRoundTrip) {
    const fs::path dir = fresh_dir("ds");
    const Dataset d = small_dataset("darkroom", Method::SAD);
    write_dataset(d, dir / "d.jsonl");
    EXPECT_EQ(read_dataset(dir / "d.jsonl"), d);
    EXPECT_THROW(read_dataset(dir / "absent.jsonl"), Error);
    fs::remove_all(dir);
}

TEST(DatasetIo, MalformedInput) {
    EXPECT_THROW(dataset_from_string("not json\n"), Error);
    EXPECT_THROW(dataset_from_string(""), Error);
}

TEST(Checkpoint, RoundTripIsExact) {
    const fs::path dir = fresh_dir("ckpt");
    const model::ModelConfig mc = model::make_model_config(family_spec("darkroom"), 49);
    const model::ModelParams<float> p = model::init_params<float>(mc, 5);
    CheckpointMeta meta;
    meta.config_hash = "0123456789abcdef";
    meta.family = "darkroom";
    meta.method = "SAD";
    meta.epochs = 3;
    meta.final_loss = 1.25;
    meta.params_checksum = params_checksum(p);
    save_checkpoint(p, dir, meta);
    EXPECT_TRUE(fs::exists(dir / "model.bin"));
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));

    CheckpointMeta got;
    const model::ModelParams<float> q = load_checkpoint<float>(dir, &got);
    EXPECT_EQ(params_checksum(q), meta.params_checksum);
    EXPECT_EQ(q.config.max_context, 49);
    EXPECT_EQ(q.config.state_scale, p.config.state_scale);
    EXPECT_EQ(q.config.token_dim(), p.config.token_dim());
    EXPECT_EQ(got.config_hash, meta.config_hash);
    EXPECT_EQ(got.family, "darkroom");
    EXPECT_EQ(got.epochs, 3);
    EXPECT_EQ(got.final_loss, 1.25);

    // float tensors widen exactly
    const model::ModelParams<double> w = load_checkpoint<double>(dir);
    EXPECT_EQ(static_cast<double>(p.at("head.w")[3]), w.at("head.w")[3]);
    fs::remove_all(dir);
}

TEST(Checkpoint, MissingArtifact) {
    const fs::path dir = fresh_dir("missing");
    try {
        load_checkpoint<float>(dir);
        FAIL() << "expected missing_artifact";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::missing_artifact);
    }
    fs::remove_all(dir);
}

TEST(Checkpoint, CorruptFileRejected) {
    const fs::path dir = fresh_dir("corrupt");
    const model::ModelConfig mc = model::make_model_config(family_spec("gaussian_bandit"), 10);
    save_checkpoint(model::init_params<float>(mc, 1), dir, CheckpointMeta{});
    std::ofstream(dir / "model.bin", std::ios::binary | std::ios::trunc) << "XXXXXXXX";
    EXPECT_THROW(load_checkpoint<float>(dir), Error);
    fs::remove_all(dir);
}
