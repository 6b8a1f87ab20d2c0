// SPDX-License-Identifier: Apache-2.0
#include "lid/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "lid/error.hpp"
#include "lid/rng.hpp"

namespace lid {

namespace {

// Purpose tags for derived random streams.
constexpr std::uint64_t kEncoderStream = 1;
constexpr std::uint64_t kShuffleStream = 100;
constexpr std::uint64_t kClassInitStream = 200;
constexpr std::uint64_t kReplayStream = 300;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng rng = make_rng(seed, stream);
  return rng();
}

std::vector<std::size_t> argmax_rows(const Tensor& scores, const ClassEmbeddings& theta) {
  std::vector<std::size_t> out(scores.rows(), 0);
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.cols(); ++j) {
      const double a = scores.at(r, j);
      const double b = scores.at(r, best);
      if (a > b || (a == b && theta.class_at(j) < theta.class_at(best))) best = j;
    }
    out[r] = best;
  }
  return out;
}

}  // namespace

void HyperParams::validate() const {
  weights.validate();
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (d_emb == 0 || d == 0) throw ConfigError("encoder dimensions must be >= 1");
  if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
}

std::vector<std::vector<int>> ModelState::tokenize(const std::vector<Sample>& samples) const {
  std::vector<std::vector<int>> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(vocab.tokenize(s.text));
  return out;
}

Tensor ModelState::features(const std::vector<Sample>& samples) const {
  return encode_batch(tokenize(samples), encoder);
}

Tensor ModelState::scores(const Tensor& features, Head head, double tau) const {
  Graph g;
  const NodeId s = add_scores(g, g.constant(features, "features"), g.constant(theta.matrix(), "theta"),
                              head, tau);
  g.forward(g.sum(s));
  return g.value(s);
}

void init_new_classes(ModelState& model, const std::vector<Sample>& step_train,
                      const std::vector<ClassId>& new_classes, std::uint64_t seed) {
  std::set<ClassId> unique(new_classes.begin(), new_classes.end());
  if (unique.size() != new_classes.size()) throw DomainError("duplicate class id among new classes");
  for (ClassId c : new_classes) {
    if (model.theta.contains(c)) throw DomainError("class " + std::to_string(c) + " is already known");
  }
  const std::size_t d = model.encoder.feature_dim();
  for (ClassId c : new_classes) {
    std::vector<Sample> own;
    for (const Sample& s : step_train) {
      if (s.label == c) own.push_back(s);
    }
    std::vector<double> row;
    double norm = 0.0;
    if (!own.empty()) {
      row = class_prototype(model.features(own));
      for (double v : row) norm += v * v;
      norm = std::sqrt(norm);
    }
    if (!(norm >= kNormFloor)) {
      Rng rng = make_rng(seed, static_cast<std::uint64_t>(c));
      row.assign(d, 0.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      norm = 0.0;
      for (double& v : row) {
        v = gauss(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
    }
    for (double& v : row) v /= norm;
    model.theta.append(c, row);
  }
}

std::vector<ClassId> predict(const ModelState& model, const std::vector<Sample>& samples, Head head,
                             double tau) {
  if (samples.empty()) return {};
  if (model.theta.size() == 0) throw StateError("model has no classes");
  const Tensor scores = model.scores(model.features(samples), head, tau);
  std::vector<ClassId> out;
  for (std::size_t row : argmax_rows(scores, model.theta)) out.push_back(model.theta.class_at(row));
  return out;
}

EvalResult evaluate(const ModelState& model, const std::vector<Sample>& samples, Head head, double tau) {
  for (const Sample& s : samples) {
    if (!model.theta.contains(s.label)) {
      throw DomainError("evaluation sample labelled with unknown class " + std::to_string(s.label));
    }
  }
  EvalResult r;
  r.total = samples.size();
  if (samples.empty()) return r;
  const auto pred = predict(model, samples, head, tau);
  std::map<ClassId, std::pair<std::size_t, std::size_t>> counts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& [ok, n] = counts[samples[i].label];
    ++n;
    if (pred[i] == samples[i].label) {
      ++ok;
      ++r.correct;
    }
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  for (const auto& [c, on] : counts) {
    r.per_class[c] = static_cast<double>(on.first) / static_cast<double>(on.second);
  }
  return r;
}

namespace {

struct Momentum {
  Tensor embedding, w1, b1, w2, b2, theta;
};

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

void sgd_update(Tensor& param, Tensor& velocity, const Tensor& grad, double lr, double momentum,
                double scale, const std::vector<bool>* frozen_rows = nullptr) {
  if (velocity.size() != param.size()) velocity = zeros_like(param);
  const std::size_t cols = param.cols();
  for (std::size_t i = 0; i < param.size(); ++i) {
    if (frozen_rows != nullptr && (*frozen_rows)[i / cols]) continue;
    velocity[i] = momentum * velocity[i] + scale * grad[i];
    param[i] -= lr * velocity[i];
  }
}

// Cosine scores ignore row length, so this changes no prediction; it keeps
// step sizes comparable to the unit-norm frozen rows.
void project_to_sphere(Tensor& theta, const std::vector<bool>& frozen) {
  for (std::size_t r = 0; r < theta.rows(); ++r) {
    if (frozen[r]) continue;
    auto row = theta.row_span(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm >= kNormFloor)) throw DomainError("class embedding collapsed to zero norm");
    for (double& v : row) v /= norm;
  }
}

Tensor gather(const Tensor& t, const std::vector<std::size_t>& rows) {
  Tensor out = Tensor::matrix(rows.size(), t.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto src = t.row_span(rows[k]);
    std::copy(src.begin(), src.end(), out.row_span(k).begin());
  }
  return out;
}

}  // namespace

StepResult run_step(LearnerState& state, const Step& step, const Strategy& strategy,
                    const HyperParams& hp, std::uint64_t seed, std::optional<ModelState>* snapshot_out) {
  hp.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (step.classes.empty()) throw ConfigError("step has no classes");
  for (ClassId c : step.classes) {
    if (state.model.theta.contains(c)) {
      throw ConfigError("step class " + std::to_string(c) + " overlaps with already observed classes");
    }
  }
  ModelState& model = state.model;
  ++state.step;
  const std::size_t step_no = state.step;

  // (1) frozen copy of the previous model
  std::optional<ModelState> snapshot;
  if (step_no > 1 && strategy.uses_snapshot() && model.theta.size() > 0) snapshot = model;

  // vocabulary grows append-only from this step's training text
  const std::uint64_t encoder_seed = derive_seed(seed, kEncoderStream);
  if (!state.initialised) {
    model.vocab.extend(step.train, hp.min_freq);
    model.encoder = EncoderParams::init(model.vocab.size(), hp.d_emb, hp.d, encoder_seed);
    model.theta = ClassEmbeddings(hp.d);
    state.initialised = true;
  } else {
    model.vocab.extend(step.train, hp.min_freq);
    model.encoder.grow_vocab(model.vocab.size(), encoder_seed);
  }

  // (2) new class rows
  const std::size_t old_rows = model.theta.size();
  std::vector<ClassId> new_classes = step.classes;
  std::sort(new_classes.begin(), new_classes.end());
  init_new_classes(model, step.train, new_classes, derive_seed(seed, kClassInitStream + step_no));
  for (std::size_t r = 0; r < model.theta.size(); ++r) {
    model.theta.set_frozen(r, strategy.freeze_old_embeddings && r < old_rows);
  }
  std::vector<std::size_t> new_rows;
  for (ClassId c : new_classes) new_rows.push_back(model.theta.row_of(c));
  model.step = step_no;

  state.seen_train.insert(state.seen_train.end(), step.train.begin(), step.train.end());
  state.seen_valid.insert(state.seen_valid.end(), step.valid.begin(), step.valid.end());
  state.seen_test.insert(state.seen_test.end(), step.test.begin(), step.test.end());

  // (3) training pool
  std::vector<Sample> pool;
  if (strategy.upper_bound_mode) {
    pool = state.seen_train;
  } else {
    pool = step.train;
    if (strategy.use_memory) {
      const auto replay = state.memory.contents();
      pool.insert(pool.end(), replay.begin(), replay.end());
    }
  }
  if (pool.empty()) throw ConfigError("empty training pool at step " + std::to_string(step_no));
  for (const Sample& s : pool) {
    if (!model.theta.contains(s.label)) throw DomainError("training sample with unknown class");
  }
  const auto pool_tokens = model.tokenize(pool);
  std::vector<std::size_t> pool_targets;
  for (const Sample& s : pool) pool_targets.push_back(model.theta.row_of(s.label));

  std::optional<Tensor> teacher_features, teacher_scores;
  if (snapshot && old_rows > 0) {
    teacher_features = encode_batch(pool_tokens, snapshot->encoder);
    teacher_scores = snapshot->scores(*teacher_features, strategy.head, hp.weights.tau);
  }

  LossToggles toggles;
  toggles.head = strategy.head;
  toggles.pkd = strategy.use_pkd;
  toggles.fkd = strategy.use_fkd;
  toggles.icml = strategy.use_icml;
  toggles.icml_new_new = hp.icml_new_new;

  StepResult result;
  result.step = step_no;
  result.train_pool = pool.size();

  // (4) mini-batch SGD with momentum; fresh buffers each step
  Momentum vel;
  Rng shuffle_rng = make_rng(seed, kShuffleStream + step_no);
  std::vector<std::size_t> order(pool.size());
  std::vector<bool> frozen(model.theta.size());
  for (std::size_t r = 0; r < frozen.size(); ++r) frozen[r] = model.theta.frozen(r);

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += hp.batch_size) {
      const std::size_t last = std::min(order.size(), first + hp.batch_size);
      std::vector<std::size_t> idx(order.begin() + first, order.begin() + last);
      std::vector<std::vector<int>> bags;
      LossInputs in;
      for (std::size_t i : idx) {
        bags.push_back(pool_tokens[i]);
        in.target_rows.push_back(pool_targets[i]);
      }
      Graph g;
      const EncoderNodes enc = build_encoder(g, model.encoder, std::move(bags), true);
      const NodeId theta = g.parameter(model.theta.matrix(), "theta");
      in.features = enc.features;
      in.theta = theta;
      in.old_rows = old_rows;
      in.new_rows = new_rows;
      Tensor tf, ts;
      if (teacher_features) {
        tf = gather(*teacher_features, idx);
        ts = gather(*teacher_scores, idx);
        in.teacher_features = &tf;
        in.teacher_scores = &ts;
      }
      const LossNodes loss = add_total_loss(g, in, hp.weights, toggles);
      loss_sum += g.forward(loss.total);
      ++batches;
      auto grads = g.backward(loss.total);

      double scale = 1.0;
      if (hp.grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto& [node, grad] : grads) {
          const std::size_t cols = grad.cols();
          for (std::size_t i = 0; i < grad.size(); ++i) {
            if (node == theta && frozen[i / cols]) continue;
            sq += grad[i] * grad[i];
          }
        }
        const double norm = std::sqrt(sq);
        if (norm > hp.grad_clip) scale = hp.grad_clip / norm;
      }
      auto& p = model.encoder;
      sgd_update(p.embedding, vel.embedding, grads.at(enc.embedding), hp.lr, hp.momentum, scale);
      sgd_update(p.w1, vel.w1, grads.at(enc.w1), hp.lr, hp.momentum, scale);
      sgd_update(p.b1, vel.b1, grads.at(enc.b1), hp.lr, hp.momentum, scale);
      sgd_update(p.w2, vel.w2, grads.at(enc.w2), hp.lr, hp.momentum, scale);
      sgd_update(p.b2, vel.b2, grads.at(enc.b2), hp.lr, hp.momentum, scale);
      sgd_update(model.theta.matrix(), vel.theta, grads.at(theta), hp.lr, hp.momentum, scale, &frozen);
      if (hp.sphere_embeddings && strategy.head == Head::Cosine) {
        project_to_sphere(model.theta.matrix(), frozen);
      }
    }
    result.loss_curve.push_back(loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1)));
    if (!state.seen_valid.empty()) {
      result.valid_curve.push_back(evaluate(model, state.seen_valid, strategy.head, hp.weights.tau).accuracy);
    }
  }

  // (5) memory update, exemplars chosen under the encoder just trained
  if (strategy.use_memory && !strategy.upper_bound_mode) {
    if (state.memory.budget() != hp.memory_budget) {
      if (!state.memory.classes().empty()) throw StateError("memory budget changed mid-run");
      state.memory = ReplayMemory(hp.memory_budget);
    }
    state.memory.shrink(model.theta.size());
    for (ClassId c : new_classes) {
      std::vector<Sample> own;
      for (const Sample& s : step.train) {
        if (s.label == c) own.push_back(s);
      }
      std::vector<Sample> ordered;
      if (strategy.memory_selection == Selection::Prototype) {
        if (!own.empty()) ordered = select_exemplars(own, model.features(own), own.size(), hp.memory_distance);
      } else {
        ordered = random_select(own, own.size(), derive_seed(seed, kReplayStream + static_cast<std::uint64_t>(c)));
      }
      state.memory.insert(c, std::move(ordered));
    }
  }

  // (6) cumulative evaluation over all observed classes
  const EvalResult eval = evaluate(model, state.seen_test, strategy.head, hp.weights.tau);
  result.acc = eval.accuracy;
  result.per_class = eval.per_class;
  result.classes_seen = model.theta.size();
  result.memory_size = state.memory.total_size();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (snapshot_out != nullptr) *snapshot_out = std::move(snapshot);
  return result;
}

std::vector<double> RunReport::accs() const {
  std::vector<double> out;
  for (const auto& s : steps) out.push_back(s.acc);
  return out;
}

void finalize_metrics(RunReport& report) {
  if (report.steps.empty()) throw DomainError("report has no steps");
  double sum = 0.0;
  for (const auto& s : report.steps) sum += s.acc;
  report.average_acc = sum / static_cast<double>(report.steps.size());
  report.whole_acc = report.steps.back().acc;
}

RunReport run_benchmark(const BenchmarkSchedule& schedule, const Strategy& strategy,
                        const HyperParams& hp, std::uint64_t seed, const StepObserver& observer) {
  if (schedule.steps.empty()) throw ConfigError("schedule has no steps");
  hp.validate();
  RunReport report;
  report.strategy = strategy;
  report.hyperparams = hp;
  report.seed = seed;
  report.class_names = schedule.class_names;
  LearnerState state;
  state.memory = ReplayMemory(hp.memory_budget);
  for (const Step& step : schedule.steps) {
    std::optional<ModelState> snapshot;
    report.steps.push_back(run_step(state, step, strategy, hp, seed, &snapshot));
    if (observer) observer(report.steps.back(), state, snapshot);
  }
  finalize_metrics(report);
  return report;
}

}  // namespace lid
