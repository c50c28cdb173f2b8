#include <sstream>

#include <gtest/gtest.h>

#include "shiftgauge/config.hpp"

using namespace shiftgauge;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test");
}

}  // namespace

TEST(Config, ParsesAllBlocks) {
  ExperimentConfig cfg = parse(R"(
# comment line
dataset.generator = moons
dataset.rotation_deg = 45
dataset.noise = 0.12
dataset.n = 800
dataset.seed = 9

model.input_dim = 2
model.widths = 4, 4, 4
model.num_classes = 2
model.division_index = 2
model.seeds = 1, 2, 3

train.alpha_max = 0.7
train.lr = 0.002
train.epochs_t1 = 25
train.epochs_t2 = 12
train.lambda_penalty = 40
train.epsilon_slack = 0.2
train.batch_size = 32
train.seed = 77
train.divergence_method = mmd_rbf
train.grl = false
train.val_fraction = 0.25

proxy.check_widths = 4, 4, 4
proxy.check_division = 1
proxy.second_level_divisions = 1, 3
proxy.candidate_divisions = 1, 2, 3

output.dir = results
output.emit_plots = true
)");
  EXPECT_EQ(cfg.generator, "moons");
  EXPECT_DOUBLE_EQ(cfg.rotation_deg, 45.0);
  EXPECT_EQ(cfg.n, 800);
  EXPECT_EQ(cfg.model.widths, (std::vector<int>{4, 4, 4}));
  EXPECT_EQ(cfg.model.division_index, 2);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(cfg.train.alpha_max, 0.7);
  EXPECT_EQ(cfg.train.epochs_t1, 25);
  EXPECT_EQ(cfg.train.divergence_method, DivergenceMethod::mmd_rbf);
  EXPECT_FALSE(cfg.train.grl);
  EXPECT_EQ(cfg.check_division, 1);
  EXPECT_EQ(cfg.candidate_divisions, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(cfg.out_dir, "results");
  EXPECT_TRUE(cfg.emit_plots);
  EXPECT_EQ(cfg.task_name(), "moons_rot45");
}

TEST(Config, UnknownKeyNamesTheKey) {
  try {
    parse("dataset.generator = toy2d\ntrain.warp_speed = 9\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.warp_speed"),
              std::string::npos);
  }
}

TEST(Config, MalformedLineReportsLineNumber) {
  try {
    parse("dataset.generator = toy2d\nthis is not a key value line\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
}

TEST(Config, InvalidDivisionsRejected) {
  EXPECT_THROW(parse("model.widths = 4, 4\nproxy.candidate_divisions = 3\n"),
               ConfigError);
  EXPECT_THROW(parse("model.widths = 4\nmodel.division_index = 2\n"),
               InputError);
}

TEST(Config, ToyDefaultsToUnstandardized) {
  ExperimentConfig toy = parse("dataset.generator = toy2d\n");
  EXPECT_FALSE(toy.train.standardize);
  ExperimentConfig toy_explicit =
      parse("dataset.generator = toy2d\ntrain.standardize = true\n");
  EXPECT_TRUE(toy_explicit.train.standardize);
  ExperimentConfig moons = parse("dataset.generator = moons\n");
  EXPECT_TRUE(moons.train.standardize);
}

TEST(Config, CheckSpecDerivesFromModelAndProxyBlocks) {
  ExperimentConfig cfg = parse(R"(
model.widths = 8, 8
model.division_index = 2
proxy.check_widths = 4, 4, 4
proxy.check_division = 3
)");
  MlpSpec check = cfg.check_spec();
  EXPECT_EQ(check.widths, (std::vector<int>{4, 4, 4}));
  EXPECT_EQ(check.division_index, 3);
  // Without proxy overrides the check class mirrors the model.
  ExperimentConfig plain = parse("model.widths = 8, 8\n");
  EXPECT_EQ(plain.check_spec().widths, (std::vector<int>{8, 8}));
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(parse("dataset.generator = cifar\n"), ConfigError);
  EXPECT_THROW(parse("train.lr = fast\n"), ConfigError);
  EXPECT_THROW(parse("train.grl = maybe\n"), ConfigError);
  EXPECT_THROW(parse("model.seeds = \n"), ConfigError);
}
