#include "doctest.h"
#include "helpers.hpp"
#include "qaspr/config.hpp"

using namespace qaspr;

TEST_CASE("defaults are valid and round-trip through JSON") {
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    auto back = RunConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(c.reasoner().L == 3);
    CHECK(c.reasoner().K == 150);
    CHECK(c.mask().p_tau == 0.5);
    CHECK(c.train().batch_size == 100);
    CHECK(c.eval().sample_masks);
}

TEST_CASE("unknown keys and wrong types are all reported") {
    nlohmann::json j{{"L", "three"}, {"colour", 1}, {"K", 10}};
    try {
        RunConfig::from_json(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.problems().size() == 2);
        CHECK(std::string(e.what()).find("colour") != std::string::npos);
        CHECK(std::string(e.what()).find("'L'") != std::string::npos);
    }
    CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::array()), ConfigError);
}

TEST_CASE("validation collects every problem") {
    RunConfig c;
    c.L = 0;
    c.p_e = 1.5;
    c.eval_mask = "sometimes";
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.problems().size() == 3);
    }
}

TEST_CASE("config files") {
    test::TempDir dir("cfg");
    auto p = dir.write("c.json", R"({"L": 7, "K": 300, "p_e": 0.3, "batch_size": 20})");
    auto c = load_run_config(p);
    CHECK(c.L == 7);
    CHECK(c.K == 300);
    CHECK(c.p_e == 0.3);
    CHECK(c.batch_size == 20);
    CHECK(c.d == 32);
    CHECK_THROWS_AS(load_run_config(dir.write("bad.json", "{ nope")), ConfigError);
    CHECK_THROWS_AS(load_run_config(dir.path / "missing.json"), ConfigError);
}

TEST_CASE("bundled presets load") {
    const std::filesystem::path presets = QASPR_SOURCE_DIR "/presets";
    int n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(presets)) {
        CAPTURE(entry.path().string());
        auto c = load_run_config(entry.path());
        CHECK_NOTHROW(c.validate());
        CHECK(c.p_tau == 0.5);
        ++n;
    }
    CHECK(n == 8);
    auto v1 = load_run_config(presets / "wn18rr_v1.json");
    CHECK(v1.L == 3);
    CHECK(v1.K == 150);
    CHECK(v1.p_e == 0.5);
    CHECK(v1.batch_size == 100);
}
