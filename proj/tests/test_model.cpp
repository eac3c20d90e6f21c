#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "hfe/model.hpp"
#include "hfe/train.hpp"

using namespace hfe;
namespace fs = std::filesystem;

namespace {

ModelShape tiny_shape(std::size_t attrs = 2) {
  ModelShape s;
  s.features = 4;
  s.hidden = {8};
  s.embed = 4;
  s.attrs = attrs;
  return s;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hfe_test_model";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST(Forward, ZeroWeights) {
  const Model m(tiny_shape());
  const Matrix x = Matrix::Random(5, 4);
  const ForwardPass p = forward(m, x);
  EXPECT_TRUE((p.probs.array() == 0.5).all());
  for (const auto& e : p.embeddings) EXPECT_EQ(e.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, HandComputed) {
  // F=2, one hidden layer of width 2 with identity weights, M=1, D=2.
  ModelShape s;
  s.features = 2;
  s.hidden = {2};
  s.embed = 2;
  s.attrs = 1;
  Model m(s);
  const auto& L = m.layout;
  m.view(L.trunk()[0].weight) = Matrix::Identity(2, 2);
  Matrix we(2, 2);
  we << 1, 2, 0, -1;
  m.view(L.branches()[0].embed.weight) = we;
  m.view(L.branches()[0].embed.bias) << 0.5, 0.0;
  m.view(L.branches()[0].logit.weight) << 1.0, 1.0;
  m.view(L.branches()[0].logit.bias) << -1.0;
  Matrix x(2, 2);
  x << 1, 2, -1, 3;
  const ForwardPass p = forward(m, x);
  // Row 0: h = (1, 2); e = (1*1 + 2*2 + 0.5, -2) = (5.5, -2); logit 2.5.
  // Row 1: h = (0, 3); e = (6.5, -3); logit 2.5.
  EXPECT_DOUBLE_EQ(p.embeddings[0](0, 0), 5.5);
  EXPECT_DOUBLE_EQ(p.embeddings[0](0, 1), -2.0);
  EXPECT_DOUBLE_EQ(p.embeddings[0](1, 0), 6.5);
  EXPECT_DOUBLE_EQ(p.embeddings[0](1, 1), -3.0);
  EXPECT_DOUBLE_EQ(p.logits(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(p.logits(1, 0), 2.5);
  EXPECT_DOUBLE_EQ(p.probs(0, 0), 1.0 / (1.0 + std::exp(-2.5)));
}

TEST(Forward, Shapes) {
  Rng rng(1);
  const Model m = init_model(tiny_shape(3), rng);
  const ForwardPass p = forward(m, Matrix::Random(8, 4));
  ASSERT_EQ(p.embeddings.size(), 3u);
  for (const auto& e : p.embeddings) {
    EXPECT_EQ(e.rows(), 8);
    EXPECT_EQ(e.cols(), 4);
  }
  EXPECT_EQ(p.probs.rows(), 8);
  EXPECT_EQ(p.probs.cols(), 3);
  EXPECT_THROW(forward(m, Matrix::Random(8, 5)), usage_error);
}

TEST(InitModel, DeterministicAndBounded) {
  ModelShape s = tiny_shape();
  s.hidden = {16, 8};
  Rng a(5), b(5), c(6);
  const Model ma = init_model(s, a), mb = init_model(s, b), mc = init_model(s, c);
  EXPECT_EQ(ma.params, mb.params);
  EXPECT_NE(ma.params, mc.params);
  auto check = [&](const ParamLayout::Dense& d) {
    const double bound = std::sqrt(6.0 / static_cast<double>(d.weight.cols));
    EXPECT_LE(ma.view(d.weight).cwiseAbs().maxCoeff(), bound);
    EXPECT_EQ(ma.view(d.bias).cwiseAbs().maxCoeff(), 0.0);
  };
  for (const auto& d : ma.layout.trunk()) check(d);
  for (const auto& br : ma.layout.branches()) {
    check(br.embed);
    check(br.logit);
  }
}

TEST(Backward, EndToEndMatchesFiniteDifferences) {
  Rng rng(2);
  int checked = 0;
  for (int attempt = 0; attempt < 100 && checked < 10; ++attempt) {
    const auto r = gradcheck::check_end_to_end(rng);
    if (!r) continue;
    ++checked;
    EXPECT_LT(r->rel_error, 1e-3);
  }
  EXPECT_EQ(checked, 10);
}

TEST(Adam, SingleStepClosedForm) {
  // One parameter: after the first step m̂ = g and v̂ = g², so the update is
  // lr * (g / (|g| + eps) + wd * theta).
  ModelShape s;
  s.features = 1;
  s.hidden = {1};
  s.embed = 1;
  s.attrs = 1;
  TrainState st;
  st.model = Model(s);
  st.model.params.assign(st.model.params.size(), 0.0);
  st.model.params[0] = 0.7;
  st.m.assign(st.model.params.size(), 0.0);
  st.v.assign(st.model.params.size(), 0.0);
  AdamConfig opt;
  opt.learning_rate = 0.01;
  opt.weight_decay = 0.1;
  std::vector<double> g(st.model.params.size(), 0.0);
  g[0] = -0.25;
  adam_step(st, g, opt);
  EXPECT_NEAR(st.model.params[0], 0.7 - 0.01 * (-0.25 / (0.25 + 1e-8) + 0.1 * 0.7), 1e-15);
  EXPECT_EQ(st.step, 1);

  // Second step by hand.
  const double m1 = 0.1 * -0.25, v1 = 0.001 * 0.0625;
  const double g2 = 0.5, theta1 = st.model.params[0];
  const double m2 = 0.9 * m1 + 0.1 * g2, v2 = 0.999 * v1 + 0.001 * g2 * g2;
  const double mhat = m2 / (1 - 0.81), vhat = v2 / (1 - 0.999 * 0.999);
  g[0] = g2;
  adam_step(st, g, opt);
  EXPECT_NEAR(st.model.params[0], theta1 - 0.01 * (mhat / (std::sqrt(vhat) + 1e-8) + 0.1 * theta1), 1e-14);
}

TEST(Adam, ZeroGradientOnlyDecays) {
  TrainState st = TrainState::fresh(tiny_shape(), 3);
  const auto before = st.model.params;
  AdamConfig opt;
  adam_step(st, std::vector<double>(before.size(), 0.0), opt);
  for (std::size_t k = 0; k < before.size(); ++k)
    EXPECT_DOUBLE_EQ(st.model.params[k], before[k] - opt.learning_rate * opt.weight_decay * before[k]);
}

TEST(Adam, NonFiniteGradientAborts) {
  TrainState st = TrainState::fresh(tiny_shape(), 3);
  std::vector<double> g(st.model.params.size(), 0.0);
  g[3] = std::nan("");
  const auto before = st.model.params;
  EXPECT_THROW(adam_step(st, g, AdamConfig{}), numerical_error);
  EXPECT_EQ(st.model.params, before);
  EXPECT_EQ(st.step, 0);
}

TEST(Training, CeOnlyDescendsOnFixedBatch) {
  int decreasing = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Batch batch = gradcheck::random_batch(rng, 16, 2, 4);
    TrainState st = TrainState::fresh(tiny_shape(), seed);
    double prev = INFINITY;
    bool strict = true;
    for (int step = 0; step < 50; ++step) {
      const ForwardPass p = forward(st.model, batch);
      const BatchLoss l = evaluate_batch(p.embeddings, p.logits, batch, MarginSet{}, LossFlags::ce_only(), 0.0);
      if (!(l.report.ce < prev)) strict = false;
      prev = l.report.ce;
      backward_and_step(st, p, l.grads, AdamConfig{});
    }
    decreasing += strict;
  }
  EXPECT_GE(decreasing, 19);
}

TEST(Training, DeterministicTrajectory) {
  SynthSpec spec;
  spec.num_ids = 8;
  const auto data = generate_synthetic(spec).samples;
  HFEConfig cfg;
  cfg.num_ids = 4;
  cfg.total_iters = 100;
  const TrainState a = train(data, cfg, LossFlags::full(), 100);
  const TrainState b = train(data, cfg, LossFlags::full(), 100);
  EXPECT_EQ(a.model.params, b.model.params);
  EXPECT_EQ(a.m, b.m);
  EXPECT_EQ(a.v, b.v);
  EXPECT_EQ(a.rng, b.rng);
  EXPECT_EQ(a.step, 100);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  SynthSpec spec;
  spec.num_ids = 6;
  spec.feature_dim = 16;
  const auto data = generate_synthetic(spec).samples;
  HFEConfig cfg;
  cfg.num_ids = 3;
  cfg.total_iters = 10;
  const TrainState st = train(data, cfg, LossFlags::full(), 10);
  const fs::path p = temp_file("roundtrip.bin");
  save_checkpoint(st, p.string());
  const TrainState back = load_checkpoint(p.string());
  EXPECT_EQ(back.model.shape, st.model.shape);
  EXPECT_EQ(back.model.params, st.model.params);
  EXPECT_EQ(back.m, st.m);
  EXPECT_EQ(back.v, st.v);
  EXPECT_EQ(back.step, st.step);
  EXPECT_EQ(back.rng, st.rng);
  const Batch b = Batch::from(data);
  EXPECT_EQ(forward(back.model, b).probs, forward(st.model, b).probs);
  // Saving the reloaded state reproduces the file byte for byte.
  const fs::path p2 = temp_file("roundtrip2.bin");
  save_checkpoint(back, p2.string());
  EXPECT_EQ(slurp(p), slurp(p2));
}

TEST(Checkpoint, Errors) {
  const TrainState st = TrainState::fresh(tiny_shape(), 1);
  const fs::path p = temp_file("good.bin");
  save_checkpoint(st, p.string());
  const std::string bytes = slurp(p);

  auto write = [](const fs::path& path, const std::string& b) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << b;
  };
  auto message = [](const fs::path& path) -> std::string {
    try {
      load_checkpoint(path.string());
    } catch (const data_error& e) {
      return e.what();
    }
    return "";
  };

  std::string bad = bytes;
  bad[0] = 'X';
  write(temp_file("magic.bin"), bad);
  EXPECT_NE(message(temp_file("magic.bin")).find("magic"), std::string::npos);

  bad = bytes;
  bad[8] = 7;
  write(temp_file("version.bin"), bad);
  EXPECT_NE(message(temp_file("version.bin")).find("version"), std::string::npos);

  write(temp_file("short.bin"), bytes.substr(0, bytes.size() - 5));
  EXPECT_NE(message(temp_file("short.bin")).find("truncated"), std::string::npos);

  write(temp_file("long.bin"), bytes + "x");
  EXPECT_NE(message(temp_file("long.bin")).find("trailing"), std::string::npos);

  EXPECT_THROW(load_checkpoint(p.string(), tiny_shape(3)), data_error);
  EXPECT_NO_THROW(load_checkpoint(p.string(), tiny_shape(2)));
  EXPECT_THROW(load_checkpoint(temp_file("missing.bin").string()), usage_error);
}
