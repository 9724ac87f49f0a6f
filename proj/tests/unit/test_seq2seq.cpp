#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "octopath/error.hpp"
#include "octopath/seq2seq.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace octopath;

namespace {

ModelSpec tiny_spec(Head head = Head::Classification, int layers = 1) {
  ModelSpec s;
  s.grid = {3, 4, 0.2};
  s.hidden_dim = 8;
  s.embed_dim = 6;
  s.n_layers = layers;
  s.tau_i = 2;
  s.tau_o = 3;
  s.head = head;
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::InvalidArgument;
}

std::vector<const SampleSequence*> ptrs(const Dataset& ds) {
  std::vector<const SampleSequence*> out;
  for (const auto& s : ds.samples) out.push_back(&s);
  return out;
}

ModelParams random_params(const ModelSpec& spec, std::uint64_t seed, double scale = 0.5) {
  ModelParams p = init_params(spec, seed);
  fixture::randomize(p, seed + 1000, scale);
  return p;
}

}  // namespace

TEST(ModelInit, DeterministicAndValidated) {
  const ModelSpec s = tiny_spec();
  EXPECT_EQ(init_params(s, 5), init_params(s, 5));
  EXPECT_FALSE(init_params(s, 5) == init_params(s, 6));
  EXPECT_EQ(init_params(s, 5).tensors.size(), tensor_count(s));
  ModelSpec bad = s;
  bad.hidden_dim = 0;
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([&] { (void)init_params(bad, 1); }), ErrorCode::InvalidSpec);

  const ModelParams p = init_params(s, 9);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const auto& t = p.tensors[i];
    const std::string name = tensor_name(s, i);
    if (t.cols() == 1 && name.front() == 'b') {
      EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0) << name;
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      EXPECT_LE(t.cwiseAbs().maxCoeff(), limit) << name;
    }
  }
}

TEST(ZeroParams, UniformAndZero) {
  const ModelSpec s;  // default 40 x 40 grid
  const ModelParams p = zero_params(s);
  Rng rng(3);
  const auto sample = fixture::random_sample(s, rng);
  const auto r = forward(p, sample, true);
  ASSERT_EQ(r.distributions.size(), 10u);
  for (const auto& d : r.distributions) {
    EXPECT_NEAR(d.minCoeff(), 1.0 / 1600, 1e-15);
    EXPECT_NEAR(d.maxCoeff(), 1.0 / 1600, 1e-15);
  }
  EXPECT_NEAR(nll_loss(r, sample.labels), 7.3777589082278725, 1e-12);
  EXPECT_NEAR(nll_loss(r, sample.labels), std::log(1600.0), 1e-12);

  const Encoding e = encode(p, encoder_inputs(s, sample));
  EXPECT_EQ(e.context.cwiseAbs().maxCoeff(), 0.0);

  ModelSpec rs = s;
  rs.head = Head::Regression;
  for (const auto& q : forward_regression(zero_params(rs), sample)) EXPECT_EQ(q, (Vec2{0.0, 0.0}));
}

TEST(NllLoss, OneHotExtremes) {
  PredictionResult r;
  Eigen::VectorXd right = Eigen::VectorXd::Zero(12);
  right(4) = 1.0;
  r.distributions = {right, right};
  const std::vector<std::uint32_t> hit{4, 4};
  const std::vector<std::uint32_t> miss{3, 3};
  EXPECT_EQ(nll_loss(r, hit), 0.0);
  EXPECT_NEAR(nll_loss(r, miss), 27.631021115928547, 1e-9);
  EXPECT_NEAR(nll_loss(r, miss), 12.0 * std::log(10.0), 1e-9);
  EXPECT_EQ(mse_loss(std::vector<Vec2>{{1, 2}}, std::vector<Vec2>{{1, 2}}), 0.0);
}

TEST(Encoder, ZeroInputsStayAtFixedPoint) {
  const ModelSpec s = tiny_spec();
  const ModelParams p = zero_params(s);
  const Encoding e = encode(p, Tensor::Zero(s.input_dim(), 3));
  for (const auto& h : e.hidden) EXPECT_EQ(h.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Encoder, StatefulAndBounded) {
  const ModelSpec s = tiny_spec(Head::Classification, 2);
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    const ModelParams p = random_params(s, static_cast<std::uint64_t>(k), 2.0);
    Tensor one(s.input_dim(), 1);
    for (Eigen::Index i = 0; i < one.size(); ++i) one(i) = rng.uniform(-3, 3);
    Tensor two(s.input_dim(), 2);
    two << one, one;
    const Encoding a = encode(p, one);
    const Encoding b = encode(p, two);
    EXPECT_GT((a.context - b.context).cwiseAbs().maxCoeff(), 1e-9);
    for (const auto& h : b.hidden) EXPECT_LT(h.cwiseAbs().maxCoeff(), 1.0);
  }
  EXPECT_EQ(code_of([&] { (void)encode(zero_params(s), Tensor::Zero(s.input_dim() + 1, 2)); }), ErrorCode::ShapeError);
}

TEST(Decoder, DistributionsAndContext) {
  const ModelSpec s = tiny_spec();
  Rng rng(12);
  for (int k = 0; k < 50; ++k) {
    const ModelParams p = random_params(s, 100 + static_cast<std::uint64_t>(k), 1.5);
    Eigen::VectorXd c(s.hidden_dim);
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = rng.uniform(-1, 1);
    const auto y = static_cast<std::uint32_t>(rng.index(13));
    const auto out = decode_step(p, y, initial_decoder_state(s), c);
    EXPECT_NEAR(out.probabilities.sum(), 1.0, 1e-9);
    EXPECT_GE(out.probabilities.minCoeff(), 0.0);
    Eigen::VectorXd c2 = c;
    c2(0) += 0.5;
    const auto moved = decode_step(p, y, initial_decoder_state(s), c2);
    EXPECT_GT((moved.probabilities - out.probabilities).cwiseAbs().maxCoeff(), 1e-9);
  }
  const ModelParams p = zero_params(s);
  const auto u = decode_step(p, start_token(s), initial_decoder_state(s), Eigen::VectorXd::Zero(s.hidden_dim));
  EXPECT_NEAR(u.probabilities.maxCoeff(), 1.0 / 12, 1e-15);
  EXPECT_EQ(code_of([&] { (void)decode_step(p, 13, initial_decoder_state(s), Eigen::VectorXd::Zero(8)); }),
            ErrorCode::InvalidClass);
}

TEST(Gradients, MatchCentralDifferences) {
  for (auto head : {Head::Classification, Head::Regression}) {
    for (int layers : {1, 2}) {
      const ModelSpec s = tiny_spec(head, layers);
      const Dataset ds = fixture::random_dataset(s, 3, 21);
      const auto batch = ptrs(ds);
      for (std::uint64_t point = 0; point < 3; ++point) {
        const auto check = oracle::gradient_check(random_params(s, 40 + point), batch, 200, 7 + point);
        EXPECT_EQ(check.coords, 200);
        EXPECT_LT(check.max_rel_error, 1e-4) << "head " << static_cast<int>(head) << " layers " << layers;
      }
    }
  }
}

TEST(Gradients, FreeRunningRegressionMatchesFiniteDifferences) {
  for (int layers : {1, 2}) {
    ModelSpec s = tiny_spec();
    s.head = Head::Regression;
    s.n_layers = layers;
    const Dataset ds = fixture::random_dataset(s, 3, 23);
    const auto batch = ptrs(ds);
    for (std::uint64_t point = 0; point < 3; ++point) {
      const auto check = oracle::gradient_check(random_params(s, 60 + point), batch, 200, 9 + point, 1e-5, 1e-6, false);
      EXPECT_LT(check.max_rel_error, 1e-4) << "layers " << layers;
    }
  }
}

TEST(Gradients, DuplicateBatchAndUnusedInputs) {
  const ModelSpec s = tiny_spec();
  const Dataset ds = fixture::random_dataset(s, 1, 4);
  const ModelParams p = random_params(s, 2);
  Gradients one;
  Gradients two;
  const SampleSequence* single[] = {&ds.samples[0]};
  const SampleSequence* twice[] = {&ds.samples[0], &ds.samples[0]};
  const double l1 = loss_and_gradients(p, single, true, &one);
  const double l2 = loss_and_gradients(p, twice, true, &two);
  EXPECT_NEAR(l1, l2, 1e-12);
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_LE((one[i] - two[i]).cwiseAbs().maxCoeff(), 1e-12) << tensor_name(s, i);
  }

  SampleSequence blank = ds.samples[0];
  for (auto& w : blank.windows) std::fill(w.begin(), w.end(), std::int8_t{0});
  const SampleSequence* b[] = {&blank};
  Gradients g;
  (void)loss_and_gradients(p, b, true, &g);
  const int cells = s.grid.n_classes();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(g[i].leftCols(cells).cwiseAbs().maxCoeff(), 0.0) << tensor_name(s, i);
    EXPECT_GT(g[i].rightCols(2).cwiseAbs().maxCoeff(), 0.0) << tensor_name(s, i);
  }
}

TEST(Adam, FirstStepAndPurity) {
  const ModelSpec s = tiny_spec();
  const ModelParams p = random_params(s, 8);
  Gradients g;
  const Dataset ds = fixture::random_dataset(s, 2, 9);
  const auto batch = ptrs(ds);
  (void)loss_and_gradients(p, batch, true, &g);
  const AdamConfig cfg;
  ModelParams a = p;
  AdamState sa = adam_init(p);
  adam_step(a, g, sa, cfg);
  EXPECT_EQ(sa.step, 1u);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (Eigen::Index k = 0; k < g[i].size(); ++k) {
      const double gi = g[i].data()[k];
      const double delta = a.tensors[i].data()[k] - p.tensors[i].data()[k];
      const double mag = std::abs(delta);
      ASSERT_LE(mag, cfg.learning_rate * (1 + 1e-12));
      ASSERT_GE(mag, cfg.learning_rate * std::abs(gi) / (std::abs(gi) + cfg.epsilon) * (1 - 1e-9));
      if (gi != 0.0) ASSERT_EQ(delta < 0.0, gi > 0.0);
    }
  }
  ModelParams b = p;
  AdamState sb = adam_init(p);
  adam_step(b, g, sb, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa, sb);

  Gradients zero = g;
  for (auto& t : zero) t.setZero();
  ModelParams c = p;
  AdamState sc = adam_init(p);
  adam_step(c, zero, sc, cfg);
  EXPECT_EQ(c, p);
}

TEST(Forward, TeacherForcingAndArgmaxInvariance) {
  const ModelSpec s = tiny_spec();
  Rng rng(31);
  for (int k = 0; k < 30; ++k) {
    const ModelParams p = random_params(s, 300 + static_cast<std::uint64_t>(k), 1.0);
    SampleSequence sample = fixture::random_sample(s, rng);
    const auto free_run = forward(p, sample, false);
    for (std::size_t t = 0; t < free_run.classes.size(); ++t) {
      Eigen::Index arg = 0;
      free_run.distributions[t].maxCoeff(&arg);
      EXPECT_EQ(free_run.classes[t], static_cast<std::uint32_t>(arg));
    }
    sample.labels = free_run.classes;
    const auto forced = forward(p, sample, true);
    EXPECT_EQ(forced.classes, free_run.classes);
    for (std::size_t t = 0; t < forced.distributions.size(); ++t) {
      EXPECT_EQ(forced.distributions[t], free_run.distributions[t]);
    }

    ModelParams scaled = p;
    scaled.tensors[tensor_count(s) - 2] *= 2.5;
    scaled.tensors[tensor_count(s) - 1] *= 2.5;
    EXPECT_EQ(forward(scaled, sample, false).classes, free_run.classes);
  }
}

TEST(Beam, DominatesGreedy) {
  const ModelSpec s = tiny_spec();
  Rng rng(41);
  for (int k = 0; k < 30; ++k) {
    const ModelParams p = random_params(s, 500 + static_cast<std::uint64_t>(k), 1.5);
    const auto sample = fixture::random_sample(s, rng);
    const auto greedy = predict(p, sample);
    const auto b1 = predict(p, sample, {1});
    EXPECT_EQ(b1.classes, greedy.classes);
    double prev = -std::numeric_limits<double>::infinity();
    for (int w = 1; w <= 6; ++w) {
      const auto b = predict(p, sample, {w});
      EXPECT_GE(b.log_probability, greedy.log_probability - 1e-12);
      EXPECT_GE(b.log_probability, prev - 1e-12);
      prev = b.log_probability;
      double lp = 0.0;
      for (std::size_t t = 0; t < b.classes.size(); ++t) lp += std::log(b.distributions[t](b.classes[t]));
      EXPECT_NEAR(lp, b.log_probability, 1e-9);
    }
  }
}

TEST(Heads, MismatchIsRejected) {
  const ModelSpec cs = tiny_spec();
  const ModelSpec rs = tiny_spec(Head::Regression);
  Rng rng(3);
  const auto sample = fixture::random_sample(cs, rng);
  EXPECT_EQ(code_of([&] { (void)forward_regression(zero_params(cs), sample); }), ErrorCode::HeadMismatch);
  EXPECT_EQ(code_of([&] { (void)forward(zero_params(rs), sample, false); }), ErrorCode::HeadMismatch);
  SampleSequence short_sample = sample;
  short_sample.windows.pop_back();
  EXPECT_EQ(code_of([&] { (void)forward(zero_params(cs), short_sample, false); }), ErrorCode::ShapeError);
}

TEST(Checkpoint, RoundtripAndCorruption) {
  const ModelSpec s = tiny_spec();
  const ModelParams p = random_params(s, 77);
  AdamState st = adam_init(p);
  Gradients g;
  const Dataset ds = fixture::random_dataset(s, 2, 1);
  const auto batch = ptrs(ds);
  (void)loss_and_gradients(p, batch, true, &g);
  ModelParams q = p;
  adam_step(q, g, st, AdamConfig{});

  const auto bytes = serialize_checkpoint(q, &st);
  const Checkpoint ck = deserialize_checkpoint(bytes);
  EXPECT_EQ(ck.params, q);
  EXPECT_TRUE(ck.has_optimizer);
  EXPECT_EQ(ck.optimizer, st);
  EXPECT_EQ(serialize_checkpoint(ck.params, &ck.optimizer), bytes);
  const auto r1 = forward(q, ds.samples[0], false);
  const auto r2 = forward(ck.params, ds.samples[0], false);
  for (std::size_t t = 0; t < r1.distributions.size(); ++t) EXPECT_EQ(r1.distributions[t], r2.distributions[t]);
  EXPECT_FALSE(deserialize_checkpoint(serialize_checkpoint(q)).has_optimizer);

  auto bad_version = bytes;
  bad_version[4] ^= 0x7f;
  EXPECT_EQ(code_of([&] { (void)deserialize_checkpoint(bad_version); }), ErrorCode::FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of([&] { (void)deserialize_checkpoint(bad_magic); }), ErrorCode::FormatError);
  auto cut = bytes;
  cut.resize(cut.size() - 8);
  EXPECT_EQ(code_of([&] { (void)deserialize_checkpoint(cut); }), ErrorCode::FormatError);

  const std::string path = testing::TempDir() + "/tiny.opm";
  save_checkpoint(path, q, &st);
  EXPECT_EQ(load_checkpoint(path).params, q);
  EXPECT_EQ(code_of([&] { (void)load_checkpoint(path + ".missing"); }), ErrorCode::IoError);
}

TEST(Checkpoint, DefaultSpecUnderTenMegabytes) {
  const ModelSpec s;
  const auto bytes = serialize_checkpoint(init_params(s, 1));
  EXPECT_LT(bytes.size(), 10u * 1000u * 1000u);
  EXPECT_GT(bytes.size(), init_params(s, 1).parameter_count() * 8);
}

TEST(Train, CurveDeterminismAndErrors) {
  const ModelSpec s = tiny_spec();
  Dataset ds = fixture::random_dataset(s, 12, 5);
  for (std::size_t k = 0; k < ds.samples.size(); ++k) {
    ds.samples[k].split = k < 8 ? Split::Train : (k < 10 ? Split::Validation : Split::Test);
  }
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.batch_size = 3;
  cfg.seed = 19;
  const TrainResult a = train(ds, s, cfg);
  const TrainResult b = train(ds, s, cfg);
  ASSERT_EQ(a.curve.size(), 7u);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.optimizer, b.optimizer);
  const auto val = ds.subset(Split::Validation);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : a.curve) best = std::min(best, c.val_loss);
  EXPECT_DOUBLE_EQ(evaluate_loss(a.params, val), best);
  EXPECT_EQ(a.curve[static_cast<std::size_t>(a.best_epoch - 1)].val_loss, best);

  Dataset empty = ds;
  for (auto& smp : empty.samples) smp.split = Split::Test;
  EXPECT_EQ(code_of([&] { (void)train(empty, s, cfg); }), ErrorCode::EmptyDataset);
  TrainConfig bad = cfg;
  bad.adam.learning_rate = 0.0;
  EXPECT_THROW((void)train(ds, s, bad), Error);
}

TEST(Train, MemorizesSmallSet) {
  ModelSpec s = tiny_spec();
  s.hidden_dim = 32;
  s.embed_dim = 16;
  const Dataset ds = fixture::random_dataset(s, 10, 6);
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.batch_size = 10;
  cfg.adam.learning_rate = 0.01;
  cfg.target_train_loss = 0.01;
  const TrainResult r = train(ds, s, cfg);
  ASSERT_LT(r.curve.back().train_loss, 0.01);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : r.curve) best = std::min(best, c.train_loss);
  EXPECT_DOUBLE_EQ(evaluate_loss(r.params, ptrs(ds)), best);
  for (const auto& smp : ds.samples) EXPECT_EQ(predict(r.params, smp).classes, smp.labels);
}
