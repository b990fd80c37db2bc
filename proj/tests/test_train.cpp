#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "modlab/errors.hpp"
#include "modlab/model/decoder.hpp"
#include "modlab/train/divergence.hpp"
#include "modlab/train/packing.hpp"
#include "modlab/train/recipe.hpp"
#include "modlab/train/run.hpp"
#include "modlab/train/run_config.hpp"
#include "support.hpp"

using namespace modlab;
using namespace modlab::train;
using modlab::model::MethodSpec;
using modlab::model::MethodTag;
using modlab::model::ModelConfig;

// ---- schedule and optimizer ---------------------------------------------------

TEST(Schedule, PublishedRecipePoints) {
  const RecipeConfig r;
  EXPECT_EQ(lr_at_step(0, r), 0.0);
  EXPECT_DOUBLE_EQ(lr_at_step(2000, r), 3e-4);
  EXPECT_DOUBLE_EQ(lr_at_step(44000, r), 3e-5);
  EXPECT_DOUBLE_EQ(lr_at_step(1000, r), 1.5e-4);
  // Cosine midpoint sits halfway between peak and floor.
  EXPECT_DOUBLE_EQ(lr_at_step(23000, r), 0.5 * (3e-4 + 3e-5));
  EXPECT_THROW(lr_at_step(-1, r), ContractError);
  EXPECT_THROW(lr_at_step(44001, r), ContractError);
}

TEST(Schedule, MonotoneAfterWarmup) {
  const RecipeConfig r;
  for (long s = 2000; s < 44000; s += 97) EXPECT_GE(lr_at_step(s, r), lr_at_step(s + 97 > 44000 ? 44000 : s + 97, r));
  for (long s = 0; s < 2000; s += 50) EXPECT_LT(lr_at_step(s, r), lr_at_step(s + 50, r));
}

TEST(Recipe, Validation) {
  RecipeConfig r;
  r.warmup_steps = r.total_steps;
  EXPECT_THROW(r.validate(), ConfigError);
  r = RecipeConfig{};
  r.clip_norm = 0.0;
  EXPECT_THROW(r.validate(), ConfigError);
  EXPECT_NO_THROW(RecipeConfig{}.validate());
  EXPECT_NO_THROW(RecipeConfig::toy().validate());
}

TEST(Clip, HalvesANormTwoGradient) {
  Tensor a = Tensor::variable({2}, {0, 0});
  Tensor b = Tensor::variable({2}, {0, 0});
  a.mutable_grad()[0] = 1.2;
  a.mutable_grad()[1] = -1.6;  // |a| = 2
  const Tensor both[] = {a, b};
  EXPECT_DOUBLE_EQ(clip_grad(both, 1.0), 2.0);
  EXPECT_EQ(a.grad()[0], 0.6);
  EXPECT_EQ(a.grad()[1], -0.8);
  EXPECT_DOUBLE_EQ(global_grad_norm(both), 1.0);
  // Below the threshold nothing moves.
  EXPECT_DOUBLE_EQ(clip_grad(both, 5.0), 1.0);
  EXPECT_EQ(a.grad()[0], 0.6);
}

TEST(Clip, PostClipNormIsMinOfPreAndMax) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor> ts;
    for (int k = 0; k < 3; ++k) {
      Tensor t = Tensor::variable({5}, std::vector<double>(5, 0.0));
      for (double& g : t.mutable_grad()) g = n(rng) * (trial % 7);
      ts.push_back(t);
    }
    // Recomputed by hand rather than through global_grad_norm.
    auto norm = [&] {
      double ss = 0.0;
      for (const auto& t : ts) {
        for (double g : t.grad()) ss += g * g;
      }
      return std::sqrt(ss);
    };
    const double pre = norm(), max = 0.5 + trial % 3;
    EXPECT_NEAR(clip_grad(ts, max), pre, 1e-12);
    EXPECT_NEAR(norm(), std::min(pre, max), 1e-12);
  }
}

TEST(AdamW, DecayOnlyWhereFlagged) {
  ParameterSet p;
  p.add("w", {3}, InitSpec::constant(2.0), true);
  p.add("g", {3}, InitSpec::constant(2.0), false);
  p.initialize(0);
  p.zero_grad();
  RecipeConfig r;
  AdamState st;
  const double lr = 0.01;
  adamw_step(p, st, lr, r);
  // Zero gradients: the Adam move is 0, leaving only the decay factor.
  for (double v : p.at("w").tensor.values()) EXPECT_DOUBLE_EQ(v, 2.0 * (1.0 - lr * r.weight_decay));
  for (double v : p.at("g").tensor.values()) EXPECT_EQ(v, 2.0);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  ParameterSet p;
  p.add("g", {2}, InitSpec::constant(1.0), false);
  p.initialize(0);
  p.at("g").tensor.mutable_grad()[0] = 0.5;
  p.at("g").tensor.mutable_grad()[1] = -3.0;
  RecipeConfig r;
  AdamState st;
  adamw_step(p, st, 1e-3, r);
  // Bias-corrected m/sqrt(v) is sign(g) on the first step.
  EXPECT_NEAR(p.at("g").tensor.values()[0], 1.0 - 1e-3, 1e-10);
  EXPECT_NEAR(p.at("g").tensor.values()[1], 1.0 + 1e-3, 1e-10);
}

TEST(AdamW, NonFiniteGradientLeavesStateUntouched) {
  ParameterSet p;
  p.add("w", {2}, InitSpec::constant(1.0));
  p.initialize(0);
  p.at("w").tensor.mutable_grad()[1] = std::nan("");
  AdamState st;
  EXPECT_THROW(adamw_step(p, st, 1e-3, RecipeConfig{}), DivergenceError);
  EXPECT_EQ(st.t, 0);
  EXPECT_EQ(p.at("w").tensor.values()[0], 1.0);
}

// ---- packing -------------------------------------------------------------------

TEST(Packing, CountsAndDiscardFraction) {
  std::vector<Document> docs{{1, 2, 3}, {4, 5}, {6, 7, 8, 9}};
  // 3 + 2 + 4 tokens plus 3 separators = 12; blocks of 5 keep 10.
  const auto p = pack_corpus(docs, 5, {.separator = 0, .shuffle_seed = 1});
  EXPECT_EQ(p.report.raw_tokens, 9u);
  EXPECT_EQ(p.report.separator_tokens, 3u);
  EXPECT_EQ(p.report.n_sequences, 2u);
  EXPECT_EQ(p.report.n_tokens, 10u);
  EXPECT_EQ(p.report.discarded_tokens, 2u);
  EXPECT_DOUBLE_EQ(p.report.discard_fraction, 2.0 / 12.0);
  std::multiset<int> seen;
  for (const auto& s : p.sequences) {
    EXPECT_EQ(s.size(), 5u);
    seen.insert(s.begin(), s.end());
  }
  EXPECT_EQ(seen.count(0), 2u);  // the third separator was in the dropped tail
}

TEST(Packing, StreamOrderPreservedUpToBlockShuffle) {
  std::vector<Document> docs;
  for (int d = 0; d < 20; ++d) docs.push_back(Document(7, d + 1));
  const auto a = pack_corpus(docs, 8, {.separator = 0, .shuffle_seed = 3});
  const auto b = pack_corpus(docs, 8, {.separator = 0, .shuffle_seed = 3});
  EXPECT_EQ(a.sequences, b.sequences);
  auto sorted = a.sequences;
  std::sort(sorted.begin(), sorted.end());
  auto unshuffled = pack_corpus(docs, 8, {.separator = 0, .shuffle_seed = 4}).sequences;
  std::sort(unshuffled.begin(), unshuffled.end());
  EXPECT_EQ(sorted, unshuffled);
}

TEST(Packing, ReportRoundTripAndErrors) {
  const auto p = pack_corpus(synthetic_corpus(), 32);
  EXPECT_EQ(PackingReport::from_json(p.report.to_json()), p.report);
  EXPECT_LT(p.report.discard_fraction, 1.0);
  EXPECT_THROW(pack_corpus({{1, 2}}, 1), ContractError);
}

TEST(Packing, EdgeCases) {
  const auto empty = pack_corpus({}, 32);
  EXPECT_TRUE(empty.sequences.empty());
  EXPECT_EQ(empty.report.n_tokens + empty.report.discarded_tokens, 0u);
  EXPECT_EQ(empty.report.discard_fraction, 0.0);
  const auto exact = pack_corpus({Document(31, 7)}, 32);
  EXPECT_EQ(exact.sequences.size(), 1u);
  EXPECT_EQ(exact.report.discarded_tokens, 0u);
  // 2050 tokens with separators at 1024: two blocks, two tokens left over.
  const auto big = pack_corpus({Document(1024, 1), Document(1024, 2)}, 1024);
  EXPECT_EQ(big.sequences.size(), 2u);
  EXPECT_EQ(big.report.discarded_tokens, 2u);
  EXPECT_NEAR(big.report.discard_fraction, 9.76e-4, 1e-6);
}

TEST(Packing, ConservesTokens) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Document> docs(1 + rng() % 20);
    for (auto& d : docs) d.assign(rng() % 40, 3);
    const std::size_t seq_len = 2 + rng() % 30;
    const auto r = pack_corpus(docs, seq_len).report;
    EXPECT_EQ(r.n_tokens + r.discarded_tokens, r.raw_tokens + r.separator_tokens);
    EXPECT_LT(r.discarded_tokens, seq_len);
  }
}

// ---- divergence signatures ---------------------------------------------------------

TEST(Signature, ClassificationRules) {
  const std::vector<double> flat(20, 1.0);
  auto with_tail = [&](std::vector<double> tail, bool nan) {
    auto w = flat;
    w.insert(w.end(), tail.begin(), tail.end());
    if (nan) w.push_back(std::nan(""));
    return w;
  };
  EXPECT_EQ(classify_signature(with_tail({6.0}, true)), Signature::single_step_spike);
  EXPECT_EQ(classify_signature(with_tail({1.1}, true)), Signature::direct_collapse);
  EXPECT_EQ(classify_signature(with_tail({2, 4, 8, 16, 32}, true)), Signature::monotone_rise);
  EXPECT_EQ(classify_signature(with_tail(std::vector<double>(10, 50.0), false)), Signature::sustained_inflation);
  EXPECT_EQ(classify_signature(with_tail({2.5}, true)), Signature::none);
  EXPECT_EQ(classify_signature(flat), Signature::none);
  const std::vector<double> short_window{1.0, std::nan("")};
  EXPECT_THROW(classify_signature(short_window), ContractError);
}

TEST(Signature, NamesRoundTrip) {
  for (auto s : {Signature::none, Signature::single_step_spike, Signature::direct_collapse, Signature::monotone_rise,
                 Signature::sustained_inflation}) {
    EXPECT_EQ(parse_signature(to_string(s)), s);
  }
  EXPECT_FALSE(parse_signature("bogus").has_value());
}

TEST(Signature, RingBufferKeepsLatest) {
  DivergenceSignal sig(4);
  for (long s = 1; s <= 10; ++s) sig.record(s, static_cast<double>(s));
  EXPECT_EQ(sig.values(), (std::vector<double>{7, 8, 9, 10}));
}

// ---- records and runs -----------------------------------------------------------------

TEST(RunRecord, JsonlRoundTripIsLossless) {
  RunRecord r;
  r.method = "softpick";
  r.seed = 43;
  r.steps = {{1, 5.5451774444795623, 0.123456789012345678, 1.5e-4}, {2, 5.1, 3.0, 3e-4}};
  r.initial_val_loss = 5.545;
  r.final_val_loss = 2.0000000000000004;
  r.diverged = true;
  r.nan_step = 3;
  r.signature = Signature::monotone_rise;
  EXPECT_EQ(RunRecord::from_jsonl(r.to_jsonl()), r);
  RunRecord empty;
  EXPECT_EQ(RunRecord::from_jsonl(empty.to_jsonl()), empty);
  EXPECT_THROW(RunRecord::from_jsonl("{not json"), ContractError);
}

TEST(Run, ShortRunIsBitDeterministic) {
  const auto data = fixture::toy_data();
  const auto recipe = fixture::toy_recipe(12);
  const auto spec = MethodSpec::from_tag(MethodTag::softpick);
  const auto a = train_run(ModelConfig::toy(), spec, recipe, data);
  const auto b = train_run(ModelConfig::toy(), spec, recipe, data);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.to_jsonl(), b.to_jsonl());
  TrainOptions other;
  other.seed = 7;
  EXPECT_NE(train_run(ModelConfig::toy(), spec, recipe, data, other).steps, a.steps);
}

TEST(Run, LossDropsOnToyCorpus) {
  const auto data = fixture::toy_data();
  const auto r = train_run(ModelConfig::toy(), MethodSpec{}, fixture::toy_recipe(80), data);
  ASSERT_FALSE(r.diverged);
  ASSERT_TRUE(r.initial_val_loss && r.final_val_loss);
  EXPECT_LT(*r.final_val_loss, *r.initial_val_loss - 1.0);
  EXPECT_TRUE(fixture::loss_trend_decreasing(r));
  EXPECT_EQ(r.steps.size(), 80u);
}

TEST(Run, BatchMustTileSequenceLength) {
  const auto data = fixture::toy_data();
  auto recipe = fixture::toy_recipe(4);
  recipe.tokens_per_step = 100;
  EXPECT_THROW(train_run(ModelConfig::toy(), MethodSpec{}, recipe, data), ConfigError);
}

class FaultedRun : public ::testing::TestWithParam<std::pair<fixture::Trajectory, Signature>> {};

TEST_P(FaultedRun, ClassifiesInjectedTrajectory) {
  const auto [traj, expected] = GetParam();
  const auto data = fixture::toy_data();
  const auto r = fixture::faulted_run(traj, 60, data);
  EXPECT_TRUE(r.diverged);
  EXPECT_EQ(r.nan_step, 60);
  EXPECT_EQ(r.steps.size(), 59u);
  EXPECT_EQ(r.signature, expected) << to_string(r.signature);
  EXPECT_EQ(RunRecord::from_jsonl(r.to_jsonl()), r);
}

INSTANTIATE_TEST_SUITE_P(Signatures, FaultedRun,
                         ::testing::Values(std::pair{fixture::Trajectory::spike, Signature::single_step_spike},
                                           std::pair{fixture::Trajectory::collapse, Signature::direct_collapse},
                                           std::pair{fixture::Trajectory::rise, Signature::monotone_rise}));

// ---- run configs ---------------------------------------------------------------------

TEST(RunConfig, ParsesSectionsAndPresets) {
  const auto rc = parse_run_config(
      "seed = 7\nscale = toy\n[model]\npreset = toy\nn_layers = 3\n[method]\ntag = sigmoid_attn\n"
      "sigmoid_bias_init = -4\n[recipe]\npreset = toy\ntotal_steps = 50\n[data]\nkind = synthetic\nseq_len = 16\n");
  EXPECT_EQ(rc.seed, 7u);
  EXPECT_EQ(rc.model.n_layers, 3u);
  EXPECT_EQ(rc.method.tag, MethodTag::sigmoid_attn);
  EXPECT_EQ(rc.method.params.sigmoid_bias_init, -4.0);
  EXPECT_EQ(rc.recipe.total_steps, 50);
  EXPECT_EQ(rc.recipe.lr_peak, RecipeConfig::toy().lr_peak);
  EXPECT_EQ(rc.data.seq_len, 16u);
}

TEST(RunConfig, RejectsBadInput) {
  EXPECT_THROW(parse_run_config("[modle]\nn_layers = 2\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[model]\nlayers = 2\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[method]\ntag = nonesuch\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[model]\nn_layers = two\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[recipe]\nwarmup_steps = 500\ntotal_steps = 100\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[data]\nkind = text\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[model\n"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/run.ini"), ConfigError);
}

TEST(RunConfig, ShippedToyConfigLoads) {
  const auto rc = load_run_config(std::string(MODLAB_SOURCE_DIR) + "/tools/configs/toy_softpick.ini");
  EXPECT_EQ(rc.method.tag, MethodTag::softpick);
  PackingReport rep;
  const auto data = prepare_data(rc.data, &rep);
  EXPECT_EQ(data.validation.size(), 8u);
  EXPECT_EQ(data.train.size() + 8u, rep.n_sequences);
}
