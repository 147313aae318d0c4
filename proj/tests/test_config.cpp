#include "uflow/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "uflow/train.hpp"

using namespace uflow;

TEST(Config, ParsesKeyValuePairs) {
  Config cfg = Config::from_string(
      "# comment\n"
      "loss.lambda = 0.53   # trailing comment\n"
      "train.batch_size=4\n"
      "\n"
      "loss.mask_oob = false\n"
      "loss.level_weights = 1, 0.5 ,0.25\n");
  EXPECT_DOUBLE_EQ(cfg.get_double("loss.lambda", 0), 0.53);
  EXPECT_EQ(cfg.get_int("train.batch_size", 0), 4);
  EXPECT_FALSE(cfg.get_bool("loss.mask_oob", true));
  auto w = cfg.get_double_list("loss.level_weights", {});
  ASSERT_EQ(w.size(), 3u);
  EXPECT_DOUBLE_EQ(w[1], 0.5);
  // defaults for absent keys
  EXPECT_DOUBLE_EQ(cfg.get_double("penalty.epsilon", 1e-3), 1e-3);
}

TEST(Config, RejectsMalformedLines) {
  EXPECT_THROW(Config::from_string("this is not a pair\n"), Error);
  EXPECT_THROW(Config::from_string("= value\n"), Error);
  Config cfg = Config::from_string("k = not_a_number\n");
  EXPECT_THROW(cfg.get_double("k", 0.0), Error);
  EXPECT_THROW(cfg.get_bool("k", false), Error);
}

TEST(Config, TypedViewsApplyDefaults) {
  Config cfg = Config::from_string("");
  LossConfig lc = loss_config_from(cfg);
  EXPECT_DOUBLE_EQ(lc.photo_params.alpha, 0.25);
  EXPECT_DOUBLE_EQ(lc.smooth_params.alpha, 0.37);
  EXPECT_DOUBLE_EQ(lc.photo_params.epsilon, 1e-3);
  EXPECT_DOUBLE_EQ(lc.lambda, 1.0);
  EXPECT_TRUE(lc.mask_out_of_bounds);
  EXPECT_TRUE(lc.normalize_by_pixel_count);

  TrainConfig tc = train_config_from(cfg);
  EXPECT_EQ(tc.batch_size, 4);
  EXPECT_DOUBLE_EQ(tc.adam.beta1, 0.9);
  EXPECT_DOUBLE_EQ(tc.adam.beta2, 0.999);
}

namespace {

std::string profile_dir() {
  // tests run from the build tree; profiles live in the source tree
  namespace fs = std::filesystem;
  fs::path p = fs::path(__FILE__).parent_path().parent_path() / "profiles";
  return p.string();
}

}  // namespace

// golden values for the shipped full-scale profiles
TEST(Profiles, ChairsGolden) {
  Config cfg = Config::load(profile_dir() + "/chairs.cfg");
  EXPECT_DOUBLE_EQ(cfg.get_double("penalty.alpha_photo", 0), 0.25);
  EXPECT_DOUBLE_EQ(cfg.get_double("penalty.alpha_smooth", 0), 0.37);
  EXPECT_DOUBLE_EQ(cfg.get_double("loss.lambda", 0), 1.0);
  EXPECT_DOUBLE_EQ(cfg.get_double("train.lr", 0), 1.6e-5);
  EXPECT_DOUBLE_EQ(cfg.get_double("train.beta1", 0), 0.9);
  EXPECT_DOUBLE_EQ(cfg.get_double("train.beta2", 0), 0.999);
  EXPECT_EQ(cfg.get_int("train.lr_halving_period", 0), 100000);
  EXPECT_EQ(cfg.get_int("train.batch_size", 0), 4);
  EXPECT_EQ(cfg.get_int("train.iterations", 0), 600000);
}

TEST(Profiles, KittiGolden) {
  Config cfg = Config::load(profile_dir() + "/kitti.cfg");
  EXPECT_DOUBLE_EQ(cfg.get_double("penalty.alpha_photo", 0), 0.38);
  EXPECT_DOUBLE_EQ(cfg.get_double("penalty.alpha_smooth", 0), 0.21);
  EXPECT_DOUBLE_EQ(cfg.get_double("loss.lambda", 0), 0.53);
  EXPECT_DOUBLE_EQ(cfg.get_double("train.lr", 0), 1.0e-5);
  EXPECT_DOUBLE_EQ(cfg.get_double("train.beta1", 0), 0.9);
  EXPECT_DOUBLE_EQ(cfg.get_double("train.beta2", 0), 0.999);
  EXPECT_EQ(cfg.get_int("train.lr_halving_period", 0), 100000);
  EXPECT_EQ(cfg.get_int("train.batch_size", 0), 4);
  EXPECT_EQ(cfg.get_int("train.iterations", 0), 400000);
}
