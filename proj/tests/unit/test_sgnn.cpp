#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "ncpd/error.hpp"
#include "ncpd/sgnn.hpp"
#include "ncpd/synthetic.hpp"

using namespace ncpd;

namespace {

SgnnConfig small_config() {
  SgnnConfig c;
  c.hidden_units = 4;
  c.sortk = 5;
  c.fc_units = {5, 3};
  c.dropout = 0.0;
  c.epochs = 3;
  c.batch_size = 4;
  return c;
}

std::vector<Graph> random_graphs(std::size_t count, std::size_t n, Rng& rng) {
  std::vector<Graph> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(sample_sbm(SbmSpec::planted(equal_blocks(n, 2), 0.6, 0.15), rng));
  return out;
}

std::vector<std::size_t> random_perm(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// Central differences over every learnable entry.
void check_gradient(const SgnnConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const auto graphs = random_graphs(6, 8, rng);
  const auto prepared = prepare_graphs(graphs, config.encoding);
  const std::vector<PairExample> batch{{1, 2, 1}, {3, 4, 0}, {5, 6, 1}, {1, 6, 0}, {2, 5, 1}};
  auto params = SgnnParams::initialize(config, prepared.front().features.cols(), rng);
  // Random scales and shifts so batch normalisation is not at its identity;
  // nonzero biases keep all-zero rows away from the ReLU kink.
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& layer : params.gcn)
    for (auto& b : layer.bias) b = 0.2 * (u(rng) - 1.0);
  for (auto& layer : params.fc) {
    for (auto& g : layer.gamma) g = u(rng);
    for (auto& b : layer.beta) b = u(rng) - 0.5;
  }
  params.readout_bias = 0.3;
  const auto analytic = loss_and_grad(params, config, prepared, batch, nullptr);
  const auto names = params.learnable_names();
  auto spans = params.learnable();
  const auto gspans = analytic.grad.learnable();
  const double h = 1e-6;
  std::size_t checked = 0;
  for (std::size_t t = 0; t < spans.size(); ++t) {
    for (std::size_t i = 0; i < spans[t].size(); ++i) {
      const double orig = spans[t][i];
      spans[t][i] = orig + h;
      const double up = loss_and_grad(params, config, prepared, batch, nullptr).loss;
      spans[t][i] = orig - h;
      const double down = loss_and_grad(params, config, prepared, batch, nullptr).loss;
      spans[t][i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double g = gspans[t][i];
      const double scale = std::max({std::abs(fd), std::abs(g), 1e-3});
      EXPECT_LE(std::abs(fd - g) / scale, 1e-4) << names[t] << "[" << i << "] fd=" << fd << " analytic=" << g;
      ++checked;
    }
  }
  EXPECT_GT(checked, 60u);
}

}  // namespace

TEST(Pooling, ParseAndSortK) {
  EXPECT_EQ(parse_pooling("sort-k"), Pooling::SortK);
  EXPECT_EQ(parse_pooling(to_string(Pooling::Average)), Pooling::Average);
  EXPECT_THROW(parse_pooling("min"), ConfigError);
  const std::vector<double> f{0.2, 0.9, 0.5, 0.9};
  const auto p = pool_distances(f, Pooling::SortK, 3);
  EXPECT_EQ(p.values, (std::vector<double>{0.9, 0.9, 0.5}));
  EXPECT_EQ(p.source, (std::vector<std::size_t>{1, 3, 2}));
  const auto padded = pool_distances(f, Pooling::SortK, 6);
  EXPECT_EQ(padded.values, (std::vector<double>{0.9, 0.9, 0.5, 0.2, 0.0, 0.0}));
  EXPECT_EQ(pool_distances(f, Pooling::Max, 3).values, std::vector<double>{0.9});
  EXPECT_NEAR(pool_distances(f, Pooling::Average, 3).values[0], 0.625, 1e-15);
}

TEST(Config, ValidatesAndDescribes) {
  SgnnConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.pooled_width(), 40u);
  c.pooling = Pooling::Max;
  EXPECT_EQ(c.pooled_width(), 1u);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  SgnnConfig d;
  d.batch_size = 0;
  EXPECT_THROW(d.validate(), ConfigError);
  EXPECT_FALSE(SgnnConfig{}.describe().empty());
}

TEST(Params, InitialisationShapes) {
  Rng rng(1);
  const auto c = small_config();
  const auto p = SgnnParams::initialize(c, 3, rng);
  ASSERT_EQ(p.gcn.size(), 2u);
  EXPECT_EQ(p.gcn[0].weight.rows(), 3u);
  EXPECT_EQ(p.gcn[1].weight.cols(), 4u);
  EXPECT_EQ(p.fc[0].weight.rows(), 5u);
  EXPECT_EQ(p.fc[1].weight.cols(), 3u);
  EXPECT_EQ(p.fc[0].running_var, std::vector<double>(5, 1.0));
  EXPECT_EQ(p.learnable().size(), p.learnable_names().size());
  const double limit = std::sqrt(6.0 / 7.0);
  for (double v : p.gcn[0].weight.data()) EXPECT_LE(std::abs(v), limit);
  EXPECT_TRUE(p.all_finite());
}

TEST(Gradient, MatchesFiniteDifferencesSortK) { check_gradient(small_config(), 11); }

TEST(Gradient, MatchesFiniteDifferencesWithPadding) {
  auto c = small_config();
  c.sortk = 12;  // more slots than nodes
  check_gradient(c, 12);
}

TEST(Gradient, MatchesFiniteDifferencesMaxAndAverage) {
  auto c = small_config();
  c.pooling = Pooling::Max;
  check_gradient(c, 13);
  c.pooling = Pooling::Average;
  check_gradient(c, 14);
}

TEST(Gradient, MatchesFiniteDifferencesRandomWalkThreeLayers) {
  auto c = small_config();
  c.encoding = EncodingKind::random_walk(3);
  c.gcn_layers = 3;
  check_gradient(c, 15);
}

TEST(Model, PermutationInvariantScores) {
  Rng rng(2);
  for (auto enc : {EncodingKind::degree(), EncodingKind::random_walk(4), EncodingKind::laplacian(3)}) {
    auto c = small_config();
    c.encoding = enc;
    const auto graphs = random_graphs(8, 12, rng);
    SgnnModel model{c, SgnnParams::initialize(c, enc.type == EncodingKind::Type::Degree ? 1 : enc.k, rng), 0};
    for (int trial = 0; trial < 4; ++trial) {
      const auto& g1 = graphs[2 * trial];
      const auto& g2 = graphs[2 * trial + 1];
      if (enc.type == EncodingKind::Type::Laplacian) {
        // Eigenvectors of repeated eigenvalues are not determined up to sign.
        bool distinct = true;
        for (const Graph* g : {&g1, &g2}) {
          const auto d = g->degrees();
          Matrix lap(12, 12);
          for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t j = 0; j < 12; ++j)
              lap(i, j) = (i == j ? 1.0 : 0.0) - g->adjacency()(i, j) / std::sqrt(std::max(d[i], 1.0) * std::max(d[j], 1.0));
          const auto ev = sym_eig(lap).eigenvalues;
          for (std::size_t i = 8; i + 1 < 12; ++i) distinct = distinct && ev[i] - ev[i + 1] > 1e-6;
        }
        if (!distinct || !is_connected(g1) || !is_connected(g2)) continue;
      }
      const auto sigma = random_perm(12, rng);
      const double s = model.score(prepare_graph(g1, enc), prepare_graph(g2, enc));
      const double sp = model.score(prepare_graph(permute(g1, sigma), enc), prepare_graph(permute(g2, sigma), enc));
      EXPECT_NEAR(s, sp, 1e-9) << enc.to_string();
      EXPECT_GT(s, 0.0);
      EXPECT_LT(s, 1.0);
    }
  }
}

TEST(Model, SymmetricAndSelfSimilarityIsConstant) {
  Rng rng(3);
  const auto c = small_config();
  const auto graphs = random_graphs(5, 10, rng);
  const auto prepared = prepare_graphs(graphs, c.encoding);
  SgnnModel model{c, SgnnParams::initialize(c, 1, rng), 0};
  model.params.fc[0].running_mean = {0.1, -0.2, 0.3, 0.0, 0.05};
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      EXPECT_EQ(model.score(prepared[i], prepared[j]), model.score(prepared[j], prepared[i]));
  // Identical inputs give f = 0 regardless of the graph.
  const double self = model.score(prepared[0], prepared[0]);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_EQ(model.score(prepared[i], prepared[i]), self);
}

TEST(Model, AttributesReplaceEncoding) {
  Rng rng(4);
  const auto g = random_graphs(1, 6, rng).front();
  Matrix attrs(6, 2, 0.5);
  const Graph ga(g.adjacency(), attrs);
  EXPECT_EQ(prepare_graph(ga, EncodingKind::degree()).features.cols(), 2u);
  EXPECT_EQ(prepare_graph(g, EncodingKind::random_walk(3)).features.cols(), 3u);
}

TEST(Loss, CrossEntropyClipped) {
  EXPECT_NEAR(cross_entropy(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(0.0, 1), -std::log(1e-7), 1e-9);
  EXPECT_TRUE(std::isfinite(cross_entropy(1.0, 0)));
  EXPECT_EQ(predict_label(0.5), 0);
  EXPECT_EQ(predict_label(0.5000001), 1);
}

TEST(Loss, DropoutNeedsRandomSource) {
  Rng rng(5);
  auto c = small_config();
  c.dropout = 0.2;
  const auto prepared = prepare_graphs(random_graphs(2, 6, rng), c.encoding);
  const auto params = SgnnParams::initialize(c, 1, rng);
  const std::vector<PairExample> batch{{1, 2, 0}, {1, 1, 1}};
  EXPECT_THROW(loss_and_grad(params, c, prepared, batch, nullptr), ConfigError);
  EXPECT_NO_THROW(loss_and_grad(params, c, prepared, batch, &rng));
  const std::vector<PairExample> bad{{1, 3, 0}, {1, 2, 1}};
  EXPECT_THROW(loss_and_grad(params, c, prepared, bad, &rng), ParameterError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Rng rng(6);
  const auto c = small_config();
  auto p = SgnnParams::initialize(c, 1, rng);
  const auto before = p;
  auto g = p.zeros_like();
  for (auto s : g.learnable())
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = (i % 2 == 0) ? 0.3 : -2.0;
  auto state = AdamState::for_params(p);
  adam_step(p, g, state, 0.01, 0.0);
  EXPECT_EQ(state.step, 1u);
  const auto a = p.learnable();
  const auto b = before.learnable();
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i)
      EXPECT_NEAR(a[t][i] - b[t][i], (i % 2 == 0) ? -0.01 : 0.01, 1e-9);
}

TEST(Adam, DecoupledWeightDecayWithZeroGradient) {
  Rng rng(7);
  const auto c = small_config();
  auto p = SgnnParams::initialize(c, 1, rng);
  const auto before = p;
  auto state = AdamState::for_params(p);
  adam_step(p, p.zeros_like(), state, 0.1, 0.5);
  const auto a = p.learnable();
  const auto b = before.learnable();
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i) EXPECT_NEAR(a[t][i], 0.95 * b[t][i], 1e-15);
}

namespace {

struct Task {
  std::vector<PreparedGraph> graphs;
  PairDataset train;
  PairDataset validation;
  PairDataset test;
};

Task merge_task(std::uint64_t seed, std::size_t n_pairs = 60) {
  Rng rng(seed);
  auto pool = generate_pair_dataset({Scenario::Merge, 0.8, 40}, n_pairs, rng);
  return {prepare_graphs(pool.graphs, EncodingKind::degree()), pool.train, pool.validation, pool.test};
}

}  // namespace

TEST(Train, ZeroEpochsReturnsInitialisation) {
  const auto task = merge_task(8);
  auto c = small_config();
  c.epochs = 0;
  const auto r = train(c, task.graphs, task.train, task.validation, 99);
  Rng rng(99);
  const auto init = SgnnParams::initialize(c, 1, rng);
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_EQ(r.model.params.gcn[0].weight.data()[0], init.gcn[0].weight.data()[0]);
}

TEST(Train, DeterministicForFixedSeed) {
  const auto task = merge_task(9);
  auto c = small_config();
  c.dropout = 0.1;
  const auto a = train(c, task.graphs, task.train, task.validation, 5);
  const auto b = train(c, task.graphs, task.train, task.validation, 5);
  ASSERT_EQ(a.history.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
  EXPECT_TRUE(std::ranges::equal(a.model.params.fc[1].weight.data(), b.model.params.fc[1].weight.data()));
}

TEST(Train, LearnsAnEasyMerge) {
  const auto task = merge_task(10, 100);
  SgnnConfig c;
  c.hidden_units = 16;
  c.sortk = 20;
  c.fc_units = {16, 8};
  c.epochs = 30;
  c.learning_rate = 1e-2;
  const auto r = train(c, task.graphs, task.train, task.validation, 1);
  EXPECT_GE(r.best_f1, 0.9);
  const auto scores = score_pairs(r.model, task.graphs, task.test.pairs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += predict_label(scores[i]) == task.test.pairs[i].label;
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(scores.size()), 0.9);
  // Best epoch is the first attaining the best F1.
  for (const auto& rec : r.history) {
    if (rec.epoch < r.best_epoch) EXPECT_LT(rec.validation_f1, r.best_f1);
    EXPECT_LE(rec.validation_f1, r.best_f1);
  }
}

TEST(Grid, ExpandsCartesianProduct) {
  const auto configs = SgnnGrid::default_synthetic().expand(SgnnConfig{});
  EXPECT_EQ(configs.size(), 2u * 3 * 3 * 3);
  EXPECT_EQ(SgnnGrid::default_financial().expand(SgnnConfig{}).size(), 4u * 3 * 3 * 3 * 2);
  SgnnGrid empty;
  ASSERT_EQ(empty.expand(SgnnConfig{}).size(), 1u);
  EXPECT_EQ(empty.expand(SgnnConfig{}).front(), SgnnConfig{});
}

TEST(Grid, PicksBestValidationF1FirstOnTies) {
  const auto task = merge_task(11);
  auto c = small_config();
  c.epochs = 0;
  const std::vector<SgnnConfig> same{c, c};
  const auto tie = grid_search(same, task.graphs, task.train, task.validation, 3);
  ASSERT_EQ(tie.evaluated.size(), 2u);
  EXPECT_EQ(tie.evaluated[0].second, tie.evaluated[1].second);

  auto trained = c;
  trained.epochs = 15;
  trained.learning_rate = 1e-2;
  const std::vector<SgnnConfig> mixed{c, trained};
  const auto r = grid_search(mixed, task.graphs, task.train, task.validation, 3);
  double best = -1.0;
  for (const auto& [cfg, f1] : r.evaluated) best = std::max(best, f1);
  EXPECT_EQ(r.best.best_f1, best);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto task = merge_task(12);
  const auto r = train(small_config(), task.graphs, task.train, task.validation, 7);
  const auto path = (std::filesystem::temp_directory_path() / "ncpd_ckpt_test.json").string();
  save_checkpoint(path, r.model, &r.optimizer, "deadbeef");
  AdamState opt;
  const auto loaded = load_checkpoint(path, &opt);
  EXPECT_EQ(loaded.config, r.model.config);
  EXPECT_EQ(loaded.seed, 7u);
  EXPECT_EQ(opt.step, r.optimizer.step);
  EXPECT_EQ(opt.first_moment, r.optimizer.first_moment);
  const auto a = score_pairs(r.model, task.graphs, task.test.pairs);
  const auto b = score_pairs(loaded, task.graphs, task.test.pairs);
  EXPECT_EQ(a, b);
  EXPECT_EQ(loaded.params.fc[0].running_var, r.model.params.fc[0].running_var);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignFiles) {
  const auto path = (std::filesystem::temp_directory_path() / "ncpd_not_ckpt.json").string();
  {
    std::ofstream out(path);
    out << "{\"format\": \"other\", \"version\": 1}";
  }
  EXPECT_THROW(load_checkpoint(path), ParseError);
  {
    std::ofstream out(path);
    out << "not json";
  }
  EXPECT_THROW(load_checkpoint(path), ParseError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
  EXPECT_THROW(config_from_json("{"), ConfigError);
  const SgnnConfig c = small_config();
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
}
