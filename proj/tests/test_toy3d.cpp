#include <cmath>
#include <filesystem>

#include "bottomup/toy3d.hpp"
#include "doctest.h"

using namespace bottomup;
using namespace bottomup::toy;

TEST_CASE("contact row follows the ground-plane projection") {
  // f * h / z = 40 pixels below a horizon at row 96.
  const CameraModel cam{80.0, 48.0, 96.0, 1.5};
  CHECK(contact_row(cam, 3.0) == doctest::Approx(56.0).epsilon(1e-15));
  CHECK(ground_depth(cam, 56.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::isinf(ground_depth(cam, 96.0)));
}

TEST_CASE("nearer objects sit lower in the image") {
  const auto cam = SceneConfig{}.camera();
  CHECK(contact_row(cam, 8.0) < contact_row(cam, 20.0));
  CHECK(contact_row(cam, 20.0) < cam.v0);
}

TEST_CASE("scenes are deterministic in the seed") {
  const SceneConfig cfg;
  const auto a = generate_scene(42, cfg), b = generate_scene(42, cfg), c = generate_scene(43, cfg);
  CHECK(a.features == b.features);
  CHECK(a.objects.size() == b.objects.size());
  CHECK_FALSE(a.features == c.features);
}

TEST_CASE("ambiguous pairs share depth and appearance but not size") {
  SceneConfig cfg;
  cfg.ambiguous_prob = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = generate_scene(seed, cfg);
    REQUIRE(f.objects.size() == 2);
    const auto& a = f.objects[0];
    const auto& b = f.objects[1];
    CHECK(a.object.z == b.object.z);
    CHECK(a.object.texture == b.object.texture);
    CHECK(a.object.yaw == b.object.yaw);
    CHECK(a.box.v == b.box.v);
    // Image height scales with physical height at equal depth.
    CHECK(a.box.h / b.box.h == doctest::Approx(a.object.h / b.object.h).epsilon(1e-12));
    const double small = std::min(a.object.h, b.object.h), large = std::max(a.object.h, b.object.h);
    CHECK(small <= cfg.small_h_max);
    CHECK(large >= cfg.large_h_min);
  }
}

TEST_CASE("object cells carry the object channels") {
  SceneConfig cfg;
  const auto f = generate_scene(5, cfg);
  for (const auto& t : f.objects) {
    if (t.truncated) continue;
    CHECK(f.features.at(t.row, t.col, channel::kObject) == 1.0);
    CHECK(f.features.at(t.row, t.col, channel::kClass + t.object.class_id) == 1.0);
  }
}

TEST_CASE("scene config validation") {
  SceneConfig cfg;
  cfg.depth_min = 50;
  CHECK_THROWS_AS(generate_scene(1, cfg), ContractError);
  cfg = SceneConfig{};
  cfg.height = 4;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = SceneConfig{};
  cfg.ambiguous_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("dataset files round-trip") {
  SceneConfig cfg;
  const auto data = make_dataset(cfg, 9, 6);
  const auto path = std::filesystem::temp_directory_path() / "bottomup_toy_roundtrip.jsonl";
  save_dataset(data, path);
  const auto back = load_dataset(path, cfg);
  REQUIRE(back.frames.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) CHECK(back.frames[k].features == data.frames[k].features);
  std::filesystem::remove(path);
}

TEST_CASE("variant names round-trip") {
  for (auto v : kAllVariants) CHECK(parse_variant(variant_name(v)) == v);
  CHECK_THROWS_AS(parse_variant("sideways"), ContractError);
}

TEST_CASE("depth code inverts") {
  const auto cam = SceneConfig{}.camera();
  for (double z : {7.5, 12.0, 39.0}) CHECK(decode_depth(cam, encode_depth(cam, z)) == doctest::Approx(z).epsilon(1e-12));
}

TEST_CASE("zero epochs return the initial model") {
  SceneConfig cfg;
  const auto data = make_dataset(cfg, 1, 3);
  const auto res = train(Variant::Yolobu, data, 0, 17);
  CHECK(res.loss_curve.empty());
  CHECK(res.model.params == init_model(Variant::Yolobu, cfg, {}, 17).params);
}

TEST_CASE("oracle outputs score perfectly") {
  SceneConfig cfg;
  const auto data = make_dataset(cfg, 2, 10);
  const auto rep = evaluate(oracle_outputs, data);
  REQUIRE(rep.depth_mae.has_value());
  CHECK(*rep.depth_mae < 1e-9);
  CHECK(*rep.dims_mae < 1e-9);
}

TEST_CASE("empty dataset has no error to report") {
  SceneConfig cfg;
  const auto data = make_dataset(cfg, 2, 0);
  const auto rep = evaluate(oracle_outputs, data);
  CHECK_FALSE(rep.depth_mae.has_value());
  CHECK_FALSE(rep.ap.has_value());
  CHECK(rep.objects == 0);
}

TEST_CASE("a short training run lowers the loss for every variant") {
  SceneConfig cfg;
  cfg.height = cfg.width = 16;
  const auto data = make_dataset(cfg, 3, 20);
  for (auto v : kAllVariants) {
    const auto res = train(v, data, 3, 1);
    REQUIRE(res.loss_curve.size() == 3);
    CHECK(res.loss_curve.back() < res.loss_curve.front());
    CHECK(res.model.params.total_values() > 0);
  }
}

TEST_CASE("training is reproducible") {
  SceneConfig cfg;
  cfg.height = cfg.width = 16;
  const auto data = make_dataset(cfg, 4, 10);
  const auto a = train(Variant::Yolobu, data, 2, 5), b = train(Variant::Yolobu, data, 2, 5);
  CHECK(a.model.params == b.model.params);
  CHECK(a.loss_curve == b.loss_curve);
}
