#include <doctest.h>

#include "nucleonet/config.hpp"
#include "nucleonet/error.hpp"

using namespace nucleo;

TEST_CASE("empty config keeps documented defaults") {
    RunConfig c = RunConfig::from_json("{}");
    CHECK(c.exp.seed == 12345);
    CHECK(c.exp.rounds == 5);
    CHECK(c.exp.cae_epochs == 30);
    CHECK(c.exp.cycle_epochs == 50);
    CHECK(c.exp.momentum == 0.975);
    CHECK(c.exp.cae_lr == 0.00001);
    CHECK(c.exp.w == 5.0);
    CHECK(c.exp.c == 20);
    CHECK(c.exp.m == 0.6);
    CHECK(c.exp.batch_size == 32);
    CHECK(c.exp.filter_div == 1);
    CHECK(c.variant == "wfm");
    CHECK(c.input_side == 32);
    CHECK(c.exp.split_fraction == doctest::Approx(400.0 / 2078.0).epsilon(1e-12));
}

TEST_CASE("per-variant learning rate resolution") {
    RunConfig c = RunConfig::from_json("{}");
    CHECK(c.exp.lr == 0.0);  // unset: resolved per variant
    CHECK(c.exp.lr_for(Variant::Default) == 0.0005);
    CHECK(c.exp.lr_for(Variant::W) == 0.0005);
    CHECK(c.exp.lr_for(Variant::WF) == 0.0001);
    CHECK(c.exp.lr_for(Variant::WFM) == 0.0001);
    RunConfig e = RunConfig::from_json(R"({"lr": 0.002})");
    CHECK(e.exp.lr_for(Variant::WFM) == 0.002);
}

TEST_CASE("explicit keys override defaults") {
    RunConfig c = RunConfig::from_json(
        R"({"seed": 7, "variant": "wf", "momentum": 0.5, "out": "runs", "w": 3})");
    CHECK(c.exp.seed == 7);
    CHECK(c.variant == "wf");
    CHECK(c.exp.momentum == 0.5);
    CHECK(c.out == "runs");
    CHECK(c.exp.w == 3.0);
    CHECK(c.exp.c == 20);  // untouched keys keep defaults
}

TEST_CASE("unknown keys are rejected by name") {
    CHECK_THROWS_WITH_AS(RunConfig::from_json(R"({"learning_rate": 0.1})"),
                         doctest::Contains("learning_rate"), UsageError);
}

TEST_CASE("malformed json and wrong value types are usage errors") {
    CHECK_THROWS_AS(RunConfig::from_json("{"), UsageError);
    CHECK_THROWS_AS(RunConfig::from_json("[1,2]"), UsageError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"seed": "twelve"})"), UsageError);
}

TEST_CASE("require names the missing key") {
    RunConfig c = RunConfig::from_json(R"({"out": "runs"})");
    CHECK(c.require("out") == "runs");
    CHECK_THROWS_WITH_AS(c.require("manifest"), doctest::Contains("manifest"), UsageError);
}

TEST_CASE("to_json round-trips through from_json") {
    RunConfig c = RunConfig::from_json(
        R"({"seed": 99, "lr": 0.003, "variant": "combo", "manifest": "m.csv",
            "features": "f.nfv", "cycle_epochs": 7, "injected_dim": 8})");
    RunConfig back = RunConfig::from_json(c.to_json());
    CHECK(back.exp.seed == 99);
    CHECK(back.exp.lr == 0.003);
    CHECK(back.variant == "combo");
    CHECK(back.manifest == "m.csv");
    CHECK(back.features == "f.nfv");
    CHECK(back.exp.cycle_epochs == 7);
    CHECK(back.exp.injected_dim == 8);
    CHECK(back.to_json() == c.to_json());
}

TEST_CASE("validate rejects out-of-range settings") {
    RunConfig c = RunConfig::from_json(R"({"momentum": 1.5})");
    CHECK_THROWS_AS(c.exp.validate(), UsageError);
    RunConfig f = RunConfig::from_json(R"({"split_fraction": 0.0})");
    CHECK_THROWS_AS(f.exp.validate(), UsageError);
    RunConfig m = RunConfig::from_json(R"({"m": -0.2})");
    CHECK_THROWS_AS(m.exp.validate(), UsageError);
}
