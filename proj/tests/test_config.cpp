#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "imdd/config.hpp"

using namespace imdd;

TEST(Config, DefaultsRoundTrip) {
    const LinkRunConfig c;
    const std::string text = config_to_json(c);
    const auto r = config_from_json(text);
    EXPECT_EQ(config_to_json(r), text);
    EXPECT_TRUE(std::isinf(r.snr_db));
    EXPECT_EQ(r.equalizer.kind, EqualizerKind::cnn);
    EXPECT_EQ(r.equalizer.cnn.topology.layers.size(), 3u);
}

TEST(Config, NonDefaultRoundTrip) {
    LinkRunConfig c;
    c.snr_db = 13.25;
    c.tx.pulse = PulseShape::rrc;
    c.eam.mode = EamMode::tanh;
    c.clock.ppm = -50.0;
    c.clock.recovery.interpolator = Interpolator::windowed_sinc;
    c.equalizer.kind = EqualizerKind::ffe;
    c.equalizer.cnn.inference = CnnInference::streamed;
    c.training_source = TrainingSource::prbs15;
    c.master_seed = 77;
    const std::string text = config_to_json(c);
    const auto r = config_from_json(text);
    EXPECT_EQ(config_to_json(r), text);
    EXPECT_EQ(r.snr_db, 13.25);
    EXPECT_EQ(r.tx.pulse, PulseShape::rrc);
    EXPECT_EQ(r.clock.recovery.interpolator, Interpolator::windowed_sinc);
    EXPECT_EQ(r.training_source, TrainingSource::prbs15);
    EXPECT_EQ(r.master_seed, 77u);
}

TEST(Config, OmittedKeysKeepDefaults) {
    const auto r = config_from_json(R"({"version": 1, "noise": {"snr_db": 12}})");
    EXPECT_EQ(r.snr_db, 12.0);
    EXPECT_EQ(r.geometry.fiber_length_km, LinkRunConfig{}.geometry.fiber_length_km);
}

TEST(Config, RejectsUnknownKeysAndTypeMismatch) {
    EXPECT_THROW(config_from_json(R"({"version": 1, "bogus": 3})"), Error);
    EXPECT_THROW(config_from_json(R"({"version": 1, "geometry": {"fibre_length_km": 3}})"), Error);
    EXPECT_THROW(config_from_json(R"({"version": 1, "geometry": {"fiber_length_km": "far"}})"), Error);
    EXPECT_THROW(config_from_json(R"({"version": 1, "training": {"epochs": 2.5}})"), Error);
    EXPECT_THROW(config_from_json(R"({"noise": {"snr_db": 12}})"), Error);
    EXPECT_THROW(config_from_json(R"({"version": 2})"), Error);
    EXPECT_THROW(config_from_json("[1, 2]"), Error);
    EXPECT_THROW(config_from_json(R"({"version": 1, "tx": {"pulse": "gauss"}})"), Error);
}

TEST(Config, Overrides) {
    const auto r = config_from_json(R"({"version": 1})", {"geometry.fiber_length_km=10", "noise.snr_db=14.5",
                                                          "equalizer.kind=ffe", "clock.recover=false"});
    EXPECT_EQ(r.geometry.fiber_length_km, 10.0);
    EXPECT_EQ(r.snr_db, 14.5);
    EXPECT_EQ(r.equalizer.kind, EqualizerKind::ffe);
    EXPECT_FALSE(r.clock.recover);
    EXPECT_TRUE(std::isinf(apply_overrides(r, {"noise.snr_db=null"}).snr_db));
    EXPECT_THROW(apply_overrides(r, {"geometry.nope=1"}), Error);
    EXPECT_THROW(apply_overrides(r, {"training.epochs=many"}), Error);
    EXPECT_THROW(apply_overrides(r, {"=3"}), Error);
    EXPECT_THROW(apply_overrides(r, {"training.epochs"}), Error);
}

TEST(Config, ValidateRejectsBadValues) {
    EXPECT_THROW(apply_overrides(LinkRunConfig{}, {"training.epochs=0"}), Error);
    EXPECT_THROW(apply_overrides(LinkRunConfig{}, {"n_symbols_train=100"}), Error);
    EXPECT_THROW(apply_overrides(LinkRunConfig{}, {"tx.rrc_rolloff=1.5"}), Error);
    EXPECT_THROW(apply_overrides(LinkRunConfig{}, {"geometry.converter_rate_hz=90e9"}), Error);
    LinkRunConfig c;
    EXPECT_NO_THROW(c.validate());
    c.version = 3;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Config, ResolvedFfeMatchesCnnComplexity) {
    LinkRunConfig c;
    EXPECT_EQ(c.resolved_ffe().num_taps, 157);
    c.equalizer.ffe.num_taps = 21;
    EXPECT_EQ(c.resolved_ffe().num_taps, 21);
}

TEST(Config, LoadFromFile) {
    const auto path = std::filesystem::temp_directory_path() / "imdd_cfg_test.json";
    {
        std::ofstream f(path);
        f << R"({"version": 1, "master_seed": 9})";
    }
    EXPECT_EQ(load_config(path.string()).master_seed, 9u);
    EXPECT_EQ(load_config(path.string(), {"master_seed=4"}).master_seed, 4u);
    std::filesystem::remove(path);
    EXPECT_THROW(load_config(path.string()), Error);
}
