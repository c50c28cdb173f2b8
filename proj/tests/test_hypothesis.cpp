#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "shiftgauge/dataset.hpp"
#include "shiftgauge/hypothesis.hpp"

using namespace shiftgauge;

namespace {

Dataset points(std::vector<double> features, int d, std::vector<int> labels = {}) {
  Dataset ds;
  ds.d = d;
  ds.n = static_cast<int>(features.size()) / d;
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  ds.name = "points";
  return ds;
}

Dataset random_points(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> f(static_cast<std::size_t>(n) * d);
  for (auto& v : f) v = rng.normal();
  return points(std::move(f), d);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(MlpSpec, Validation) {
  MlpSpec ok{2, {4, 4}, 2, 1, 0.0};
  EXPECT_NO_THROW(ok.check());
  EXPECT_THROW((MlpSpec{2, {}, 2, 1, 0.0}).check(), InputError);
  EXPECT_THROW((MlpSpec{2, {4}, 2, 2, 0.0}).check(), InputError);
  EXPECT_THROW((MlpSpec{2, {4}, 2, 0, 0.0}).check(), InputError);
  EXPECT_THROW((MlpSpec{2, {4}, 1, 1, 0.0}).check(), InputError);
  EXPECT_THROW((MlpSpec{2, {4}, 2, 1, 1.0}).check(), InputError);
}

TEST(Predict, ZeroWeightsTieBreaksTowardClassZero) {
  MlpSpec spec{2, {3}, 2, 1, 0.0};
  Rng rng(1);
  Hypothesis h = Hypothesis::init(spec, rng);
  for (auto& p : h.parameters())
    for (auto& v : p.data()) v = 0.0;
  Dataset xs = random_points(50, 2, 9);
  std::vector<double> probs = h.predict_proba(xs);
  for (double p : probs) EXPECT_DOUBLE_EQ(p, 0.5);
  for (int label : h.predict(xs)) EXPECT_EQ(label, 0);
}

TEST(Predict, MatchesArgmaxOfProba) {
  MlpSpec spec{3, {8, 8}, 4, 1, 0.0};
  Rng rng(5);
  Hypothesis h = Hypothesis::init(spec, rng);
  Dataset xs = random_points(100, 3, 6);
  auto labels = h.predict(xs);
  auto probs = h.predict_proba(xs);
  for (int i = 0; i < xs.n; ++i) {
    int best = 0;
    for (int j = 1; j < 4; ++j)
      if (probs[i * 4 + j] > probs[i * 4 + best]) best = j;
    EXPECT_EQ(labels[i], best);
  }
}

TEST(Predict, HandSetLinearSeparator) {
  // One hidden unit passes x through; the output layer votes class 1 when
  // x > 0 via logit(1) = relu(x), logit(0) = relu(-x).
  MlpSpec spec{1, {2}, 2, 1, 0.0};
  Rng rng(2);
  Hypothesis h = Hypothesis::init(spec, rng);
  auto& enc = h.encoder_layers()[0];
  enc.w.data() = {1.0, -1.0};  // unit 0 = x, unit 1 = -x
  enc.b.data() = {0.0, 0.0};
  auto& out = h.predictor_layers()[0];
  out.w.data() = {0.0, 1.0,   // relu(x) -> class 1 logit
                  1.0, 0.0};  // relu(-x) -> class 0 logit
  out.b.data() = {0.0, 0.0};
  Dataset xs = points({-2.0, -0.5, 0.5, 2.0}, 1);
  EXPECT_EQ(h.predict(xs), (std::vector<int>{0, 0, 1, 1}));
}

TEST(Predict, WidthMismatchIsInputError) {
  MlpSpec spec{3, {4}, 2, 1, 0.0};
  Rng rng(3);
  Hypothesis h = Hypothesis::init(spec, rng);
  Dataset xs = random_points(5, 2, 4);
  EXPECT_THROW(h.predict(xs), InputError);
}

TEST(ZeroOneRisk, CountsExactly) {
  MlpSpec spec{1, {2}, 2, 1, 0.0};
  Rng rng(2);
  Hypothesis h = Hypothesis::init(spec, rng);
  auto& enc = h.encoder_layers()[0];
  enc.w.data() = {1.0, -1.0};
  enc.b.data() = {0.0, 0.0};
  auto& out = h.predictor_layers()[0];
  out.w.data() = {0.0, 1.0, 1.0, 0.0};
  out.b.data() = {0.0, 0.0};

  Dataset all_right = points({-1, -1, 1, 1, 1, -2, 2, 3}, 1,
                             {0, 0, 1, 1, 1, 0, 1, 1});
  EXPECT_DOUBLE_EQ(zero_one_risk(h, all_right), 0.0);

  // Flip 3 of 8 labels.
  Dataset three_wrong = all_right;
  three_wrong.labels[0] = 1;
  three_wrong.labels[2] = 0;
  three_wrong.labels[5] = 1;
  EXPECT_DOUBLE_EQ(zero_one_risk(h, three_wrong), 0.375);

  // Complementing all labels on a binary task complements the risk.
  Dataset complemented = all_right;
  for (int& y : complemented.labels) y = 1 - y;
  EXPECT_DOUBLE_EQ(zero_one_risk(h, complemented),
                   1.0 - zero_one_risk(h, all_right));
}

TEST(ZeroOneRisk, EmptySetIsInputError) {
  MlpSpec spec{1, {2}, 2, 1, 0.0};
  Rng rng(2);
  Hypothesis h = Hypothesis::init(spec, rng);
  Dataset empty;
  empty.d = 1;
  EXPECT_THROW(zero_one_risk(h, empty), InputError);
}

TEST(Disagreement, SelfIsZeroAndComplementIsOne) {
  MlpSpec spec{2, {4}, 2, 1, 0.0};
  Rng rng(8);
  Hypothesis h = Hypothesis::init(spec, rng);
  // Jitter biases: with zero biases a fully clamped hidden row yields exactly
  // tied logits, where "complement" is not well defined.
  for (auto& p : h.parameters())
    for (auto& v : p.data()) v += 0.05 * rng.normal();
  Dataset xs = random_points(64, 2, 12);
  EXPECT_DOUBLE_EQ(disagreement(h, h, xs), 0.0);

  // Swap the two output columns: argmax complements on binary outputs
  // whenever the logits differ (ties also flip by the tie rule, but random
  // logits are never exactly tied).
  Hypothesis flipped = h.deep_copy();
  auto& out = flipped.predictor_layers().back();
  Tensor& w = out.w;
  int in_dim = w.shape()[0];
  for (int r = 0; r < in_dim; ++r)
    std::swap(w.data()[r * 2], w.data()[r * 2 + 1]);
  std::swap(out.b.data()[0], out.b.data()[1]);
  EXPECT_DOUBLE_EQ(disagreement(h, flipped, xs), 1.0);
}

TEST(Disagreement, TwoThresholdsOnThreePoints) {
  // Hand-set 1-D threshold nets at t=0 and t=1 disagree only at x = 0.5.
  auto make_threshold = [](double t) {
    MlpSpec spec{1, {2}, 2, 1, 0.0};
    Rng rng(1);
    Hypothesis h = Hypothesis::init(spec, rng);
    auto& enc = h.encoder_layers()[0];
    enc.w.data() = {1.0, -1.0};
    enc.b.data() = {-t, t};
    auto& out = h.predictor_layers()[0];
    out.w.data() = {0.0, 1.0, 1.0, 0.0};
    out.b.data() = {0.0, 0.0};
    return h;
  };
  Hypothesis h0 = make_threshold(0.0);
  Hypothesis h1 = make_threshold(1.0);
  Dataset xs = points({-1.0, 0.5, 2.0}, 1);
  EXPECT_NEAR(disagreement(h0, h1, xs), 1.0 / 3.0, 1e-12);
}

TEST(Disagreement, ClassCountMismatchIsInputError) {
  Rng rng(1);
  Hypothesis a = Hypothesis::init(MlpSpec{2, {3}, 2, 1, 0.0}, rng);
  Hypothesis b = Hypothesis::init(MlpSpec{2, {3}, 3, 1, 0.0}, rng);
  Dataset xs = random_points(4, 2, 2);
  EXPECT_THROW(disagreement(a, b, xs), InputError);
}

TEST(Disagreement, TriangleInequalityOverSameSample) {
  Rng rng(77);
  Dataset xs = random_points(40, 2, 21);
  for (int trial = 0; trial < 25; ++trial) {
    Rng r1 = rng.split("a", trial), r2 = rng.split("b", trial),
        r3 = rng.split("c", trial);
    MlpSpec spec{2, {5}, 2, 1, 0.0};
    Hypothesis h1 = Hypothesis::init(spec, r1);
    Hypothesis h2 = Hypothesis::init(spec, r2);
    Hypothesis h3 = Hypothesis::init(spec, r3);
    double d13 = disagreement(h1, h3, xs);
    double d12 = disagreement(h1, h2, xs);
    double d23 = disagreement(h2, h3, xs);
    EXPECT_LE(d13, d12 + d23 + 1e-12);
  }
}

TEST(ZeroOneRisk, EqualsDisagreementWithOracleLabeler) {
  // An oracle-labeler that replays the dataset labels: risk(h, D) equals
  // the fraction of points where h differs from the replayed labels.
  MlpSpec spec{2, {4}, 2, 1, 0.0};
  Rng rng(31);
  Hypothesis h = Hypothesis::init(spec, rng);
  Rng lrng(32);
  Dataset xs = random_points(60, 2, 15);
  xs.labels.resize(60);
  for (auto& y : xs.labels) y = static_cast<int>(lrng.uniform_int(2));
  auto pred = h.predict(xs);
  int diff = 0;
  for (int i = 0; i < xs.n; ++i)
    if (pred[i] != xs.labels[i]) ++diff;
  EXPECT_DOUBLE_EQ(zero_one_risk(h, xs), diff / 60.0);
}

TEST(Division, RebindingKeepsPredictionsExactly) {
  MlpSpec spec{3, {6, 5, 4}, 3, 1, 0.0};
  Rng rng(41);
  Hypothesis h1 = Hypothesis::init(spec, rng);
  Dataset xs = random_points(80, 3, 51);
  auto base = h1.predict(xs);
  for (int division = 2; division <= 3; ++division) {
    Hypothesis hd = h1.with_division(division);
    EXPECT_EQ(hd.spec().division_index, division);
    EXPECT_EQ(hd.predict(xs), base) << "division " << division;
  }
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
  MlpSpec spec{4, {7, 3}, 3, 2, 0.1};
  Rng rng(13);
  Hypothesis h = Hypothesis::init(spec, rng);
  Dataset fit_me = random_points(50, 4, 77);
  fit_me.features[3] += 10.0;  // non-trivial scaler values
  h.set_scaler(FeatureScaler::fit(fit_me));

  std::string path = temp_path("sg_ckpt_roundtrip.bin");
  save_checkpoint(h, path);
  Hypothesis loaded = load_checkpoint(path);

  EXPECT_EQ(loaded.spec().division_index, 2);
  EXPECT_EQ(loaded.spec().widths, (std::vector<int>{7, 3}));
  EXPECT_DOUBLE_EQ(loaded.spec().dropout_rate, 0.1);

  Dataset xs = random_points(1000, 4, 99);
  EXPECT_EQ(h.predict(xs), loaded.predict(xs));
  // Bit-exact weights, not just equal predictions.
  for (std::size_t li = 0; li < h.encoder_layers().size(); ++li)
    EXPECT_EQ(h.encoder_layers()[li].w.data(),
              loaded.encoder_layers()[li].w.data());
  std::remove(path.c_str());
}

TEST(Checkpoint, SaveIsByteDeterministic) {
  MlpSpec spec{2, {4}, 2, 1, 0.0};
  Rng rng(3);
  Hypothesis h = Hypothesis::init(spec, rng);
  std::string p1 = temp_path("sg_ckpt_a.bin"), p2 = temp_path("sg_ckpt_b.bin");
  save_checkpoint(h, p1);
  save_checkpoint(h, p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  EXPECT_EQ(s1, s2);
  EXPECT_EQ(s1.substr(0, 8), "SHGAUGE1");
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST(Checkpoint, CorruptedHeaderIsFormatErrorNotCrash) {
  std::string path = temp_path("sg_ckpt_bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTMAGIC garbage";
  }
  EXPECT_THROW(load_checkpoint(path), FormatError);
  std::remove(path.c_str());
}

TEST(Checkpoint, Version2IsRejectedWithMessage) {
  MlpSpec spec{2, {4}, 2, 1, 0.0};
  Rng rng(3);
  Hypothesis h = Hypothesis::init(spec, rng);
  std::string path = temp_path("sg_ckpt_v2.bin");
  save_checkpoint(h, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    char v2[4] = {2, 0, 0, 0};
    f.write(v2, 4);
  }
  try {
    load_checkpoint(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("version"), std::string::npos);
    EXPECT_NE(msg.find("2"), std::string::npos);
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, TruncatedFileIsFormatError) {
  MlpSpec spec{2, {4}, 2, 1, 0.0};
  Rng rng(3);
  Hypothesis h = Hypothesis::init(spec, rng);
  std::string path = temp_path("sg_ckpt_trunc.bin");
  save_checkpoint(h, path);
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 16);
  EXPECT_THROW(load_checkpoint(path), FormatError);
  std::remove(path.c_str());
}

TEST(Confidence, BoundedByClassCount) {
  MlpSpec spec{2, {4}, 4, 1, 0.0};
  Rng rng(19);
  Hypothesis h = Hypothesis::init(spec, rng);
  Dataset xs = random_points(100, 2, 23);
  double q = h.mean_confidence(xs);
  EXPECT_GE(q, 0.25);
  EXPECT_LE(q, 1.0);
}
