// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "lid/cli.hpp"
#include "lid/encoder.hpp"
#include "lid/engine.hpp"
#include "lid/graph.hpp"
#include "lid/losses.hpp"
#include "lid/memory.hpp"
#include "lid/report.hpp"
#include "oracle.hpp"

using namespace lid;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Collects failure notes for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

int g_failed = 0;

void report(int id, const std::string& title, const Check& c, const std::string& detail) {
  const bool ok = c.failures.empty();
  if (!ok) ++g_failed;
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " [" << detail << "]";
  for (const auto& f : c.failures) std::cout << "\n    " << f;
  std::cout << std::endl;
}

template <typename F>
void run_criterion(int id, const std::string& title, F&& body) {
  Check c;
  std::string detail;
  try {
    detail = body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  report(id, title, c, detail);
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

struct Composite {
  Graph g;
  LossNodes nodes;
  Tensor tf, ts;
};

// Teacher outputs from a separate snapshot encoder; old rows are theta[0, 2).
void build_composite(Composite& cp, NodeId features, const Tensor& theta, const Tensor& teacher_features,
                     const LossWeights& w) {
  cp.tf = teacher_features;
  Tensor old_theta = Tensor::matrix(2, theta.cols());
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < theta.cols(); ++j) old_theta.at(r, j) = theta.at(r, j);
  }
  {
    Graph tg;
    const NodeId s = add_scores(tg, tg.constant(cp.tf), tg.constant(old_theta), Head::Cosine, w.tau);
    tg.forward(tg.sum(s));
    cp.ts = tg.value(s);
  }
  LossInputs in;
  in.features = features;
  in.theta = cp.g.parameter(theta, "theta");
  in.target_rows = {0, 1, 2, 3};
  in.old_rows = 2;
  in.new_rows = {2, 3};
  in.teacher_features = &cp.tf;
  in.teacher_scores = &cp.ts;
  cp.nodes = add_total_loss(cp.g, in, w, LossToggles{});
  cp.g.forward(cp.nodes.total);
}

std::string gradient_check(Check& c) {
  const auto t0 = Clock::now();
  const std::size_t vocab = 12, d_emb = 6, d = 8;
  std::mt19937_64 rng(2024);
  const EncoderParams student = EncoderParams::init(vocab, d_emb, d, 11);
  const EncoderParams teacher = EncoderParams::init(vocab, d_emb, d, 12);
  const std::vector<std::vector<int>> bags{{1, 2, 3}, {4, 5}, {6, 7, 8, 1}, {9, 10, 11}};
  const Tensor theta = Tensor::from_rows(oracle::random_mat(rng, 4, d));
  const Tensor tf = encode_batch(bags, teacher);

  // Toy model: batch-4 features and the four class rows are the parameters,
  // reference loss weights.
  Composite toy;
  build_composite(toy, toy.g.parameter(encode_batch(bags, student), "features"), theta, tf, LossWeights{});
  c.expect(toy.nodes.kd && toy.nodes.fkd && toy.nodes.icml, "composite is missing a term");
  const double eps = 1e-5;
  const double err = finite_diff_check(toy.g, toy.nodes.total, eps);
  // resolution of a central difference on a loss of this magnitude
  const double loss = toy.g.value(toy.nodes.total)[0];
  const double floor = std::abs(loss) * std::numeric_limits<double>::epsilon() / (2 * eps);

  // The same loss through the encoder, at the weights the trainer uses.
  Composite full;
  const EncoderNodes enc = build_encoder(full.g, student, bags, true);
  build_composite(full, enc.features, theta, tf, HyperParams{}.weights);
  const double err_full = finite_diff_check(full.g, full.nodes.total, eps);

  const double secs = seconds_since(t0);
  c.expect(err < 1e-4, "toy model max relative error " + fmt(err) + " >= 1e-4");
  c.expect(err_full < 1e-4, "encoder chain max relative error " + fmt(err_full) + " >= 1e-4");
  c.expect(secs < 5.0, "runtime " + fmt(secs) + " s >= 5 s");
  return "max rel err " + fmt(err, 3) + " at loss " + fmt(loss, 5) + ", difference floor " + fmt(floor, 2) +
         "; through encoder " + fmt(err_full, 3) + "; " + fmt(secs, 3) + " s";
}

// ---------------------------------------------------------------------------

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::string scale_invariance(Check& c) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> dim(2, 16), classes(2, 10);
  std::uniform_real_distribution<double> log_scale(std::log(1e-3), std::log(1e3));
  const double tau = LossWeights{}.tau;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = dim(rng), k = classes(rng);
    std::vector<double> f = oracle::random_vec(rng, d);
    const Tensor theta = Tensor::from_rows(oracle::random_mat(rng, k, d));
    const double s = std::exp(log_scale(rng));
    const std::size_t row = rng() % k;
    const auto base = cosine_probs(f, theta, tau);

    std::vector<double> fs(f);
    for (double& x : fs) x *= s;
    Tensor ts = theta;
    for (std::size_t j = 0; j < d; ++j) ts.at(row, j) *= s;
    const auto by_f = cosine_probs(fs, theta, tau);
    const auto by_row = cosine_probs(f, ts, tau);
    for (std::size_t i = 0; i < k; ++i) {
      worst = std::max({worst, std::abs(by_f[i] - base[i]), std::abs(by_row[i] - base[i])});
    }
  }
  c.expect(worst <= 1e-6, "max probability change " + fmt(worst) + " > 1e-6");

  // Dot-head counterexample: doubling the second class row flips the decision.
  const std::vector<double> f{1.0, 1.0};
  Tensor theta = Tensor::from_rows({{0.6, 0.0}, {0.0, 0.5}});
  const std::size_t before = argmax(dot_scores(f, theta));
  const std::size_t cos_before = argmax(cosine_probs(f, theta, tau));
  theta.at(1, 1) *= 2.0;
  const std::size_t after = argmax(dot_scores(f, theta));
  const std::size_t cos_after = argmax(cosine_probs(f, theta, tau));
  c.expect(before != after, "dot-head argmax did not flip");
  c.expect(cos_before == cos_after, "cosine-head argmax changed");
  return "1000 triples, max change " + fmt(worst, 3) + "; dot argmax " + std::to_string(before) + " -> " +
         std::to_string(after);
}

// ---------------------------------------------------------------------------

std::string loss_oracles(Check& c) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> dim(2, 12), classes(1, 8);
  std::uniform_real_distribution<double> temp(0.5, 4.0), alpha(-0.5, 0.5);
  double kd_err = 0, fkd_err = 0, icml_err = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = classes(rng) + 1;
    const auto a = oracle::random_vec(rng, k, -20, 20), b = oracle::random_vec(rng, k, -20, 20);
    const double t = temp(rng);
    kd_err = std::max(kd_err, std::abs(kd_loss(a, b, t) - static_cast<double>(oracle::kd(a, b, t))));

    const std::size_t d = dim(rng);
    const auto f = oracle::random_vec(rng, d), g = oracle::random_vec(rng, d);
    fkd_err = std::max(fkd_err, std::abs(fkd_loss(f, g) - static_cast<double>(oracle::fkd(f, g))));

    const auto tn = oracle::random_mat(rng, classes(rng), d), to = oracle::random_mat(rng, classes(rng), d);
    const double al = alpha(rng);
    icml_err = std::max(icml_err, std::abs(icml_loss(Tensor::from_rows(tn), Tensor::from_rows(to), al) -
                                           static_cast<double>(oracle::icml(tn, to, al))));
  }
  c.expect(kd_err <= 1e-10, "kd max error " + fmt(kd_err));
  c.expect(fkd_err <= 1e-10, "fkd max error " + fmt(fkd_err));
  c.expect(icml_err <= 1e-10, "icml max error " + fmt(icml_err));

  auto spot = [&](double got, double want, const std::string& what) {
    c.expect(std::abs(got - want) <= 1e-12, what + " = " + fmt(got, 17) + ", expected " + fmt(want, 17));
  };
  spot(kd_loss(std::vector<double>{0, 0}, std::vector<double>{0, 0}, 2.0), std::log(2.0), "kd of identical uniform");
  spot(kd_loss(std::vector<double>{3, 3}, std::vector<double>{-1, -1}, 2.0), std::log(2.0), "kd of equal scores");
  spot(fkd_loss(std::vector<double>{1, 2}, std::vector<double>{2, 4}), 0.0, "fkd parallel");
  spot(fkd_loss(std::vector<double>{1, 0}, std::vector<double>{0, 3}), 1.0, "fkd orthogonal");
  spot(fkd_loss(std::vector<double>{1, 2}, std::vector<double>{-2, -4}), 2.0, "fkd antipodal");
  // cos 0.6 - (-0.1) = 0.7 active; cos -1 - (-0.1) inactive
  spot(icml_loss(Tensor::from_rows({{1, 0}}), Tensor::from_rows({{0.6, 0.8}, {-1, 0}}), -0.1), 0.7, "icml hinge");
  spot(icml_loss(Tensor::from_rows({{1, 0}}), Tensor::from_rows({{0, 1}}), 0.2), 0.0, "icml inactive");
  return "max errors kd " + fmt(kd_err, 2) + ", fkd " + fmt(fkd_err, 2) + ", icml " + fmt(icml_err, 2);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> indices(const std::vector<Sample>& s) {
  std::vector<std::size_t> out;
  for (const auto& x : s) out.push_back(x.source_index);
  return out;
}

std::string memory_law(Check& c) {
  const std::size_t B = 200;
  const std::pair<std::size_t, std::size_t> expected[] = {{5, 40}, {10, 20}, {20, 10}};
  for (const auto& [t, q] : expected) {
    for (std::size_t r = 0; r < t; ++r) {
      c.expect(memory_quota(B, t, r) == q, "quota for t=" + std::to_string(t) + " is not " + std::to_string(q));
    }
  }
  for (std::size_t t = 1; t <= 2 * B; ++t) {
    std::size_t sum = 0;
    for (std::size_t r = 0; r < t; ++r) {
      const std::size_t q = memory_quota(B, t, r);
      c.expect(q == B / t + (r < B % t ? 1 : 0), "remainder rule broken at t=" + std::to_string(t));
      sum += q;
    }
    c.expect(sum <= B, "quotas exceed B at t=" + std::to_string(t));
  }

  std::mt19937_64 rng(4242);
  std::size_t checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t first = 1 + rng() % 6, more = 1 + rng() % 8;
    ReplayMemory m(B);
    m.shrink(first);
    std::vector<std::pair<std::vector<Sample>, Tensor>> cand;
    for (std::size_t k = 0; k < first; ++k) {
      const std::size_t n = 1 + rng() % 100;
      std::vector<Sample> s;
      for (std::size_t i = 0; i < n; ++i) s.push_back({"x", static_cast<ClassId>(k), 1000 * k + i});
      Tensor f = Tensor::from_rows(oracle::random_mat(rng, n, 5));
      m.insert(static_cast<ClassId>(k), select_exemplars(s, f, n));
      c.expect(m.total_size() <= B, "total exceeds B after insert");
      cand.emplace_back(std::move(s), std::move(f));
    }
    m.shrink(first + more);
    c.expect(m.total_size() <= B, "total exceeds B after shrink");
    std::size_t rank = 0;
    for (const auto& [k, list] : m.classes()) {
      const auto& [s, f] = cand[static_cast<std::size_t>(k)];
      const auto fresh = select_exemplars(s, f, memory_quota(B, first + more, rank++));
      c.expect(indices(list) == indices(fresh), "shrink differs from reselection in trial " + std::to_string(trial));
      ++checked;
    }
  }
  return "quotas 40/20/10, " + std::to_string(checked) + " class lists over 50 memories";
}

// ---------------------------------------------------------------------------

struct Runs {
  BenchmarkSchedule schedule;
  RunConfig config;  // MSR reference config
  std::map<std::string, RunReport> reports;
  std::size_t frozen_checks = 0, frozen_mismatch = 0;
  std::size_t snapshot_checks = 0, snapshot_mismatch = 0;
};

double class_mean(const StepResult& s, const std::vector<ClassId>& classes) {
  double sum = 0;
  for (ClassId c : classes) sum += s.per_class.at(c);
  return sum / static_cast<double>(classes.size());
}

std::string retention(Check& c, Runs& runs) {
  const auto t0 = Clock::now();
  runs.config = RunConfig{};  // synthetic seed 1, default hyperparameters
  const SynthConfig& sc = runs.config.source.synth;
  c.expect(sc.n_classes == 10 && sc.train_per_class == 100 && sc.test_per_class == 20 && sc.overlap_fraction == 0.2 &&
               runs.config.source.params.classes_per_step == 2,
           "default synthetic benchmark is not 10 classes, 2 per step, 100/20, overlap 0.2");
  runs.schedule = materialize_schedule(runs.config.source);
  c.expect(runs.schedule.steps.size() == 5, "schedule does not have 5 steps");
  const HyperParams& hp = runs.config.hyperparams;

  for (const char* name : {"finetune", "emr", "upperbound"}) {
    runs.reports[name] = run_benchmark(runs.schedule, Strategy::preset(name), hp, runs.config.seed);
  }

  // MSR, watching frozen rows and the snapshot after each step.
  std::optional<ModelState> previous;
  std::vector<std::vector<double>> rows_before;
  runs.reports["msr"] = run_benchmark(
      runs.schedule, runs.config.strategy, hp, runs.config.seed,
      [&](const StepResult& s, const LearnerState& st, const std::optional<ModelState>& snap) {
        const auto& theta = st.model.theta;
        for (std::size_t r = 0; r < rows_before.size(); ++r) {
          ++runs.frozen_checks;
          if (!theta.frozen(r) || theta.matrix().row_vector(r) != rows_before[r]) ++runs.frozen_mismatch;
        }
        if (s.step > 1) {
          ++runs.snapshot_checks;
          if (!snap || !(snap->encoder == previous->encoder) || !(snap->theta == previous->theta) ||
              snap->vocab.tokens() != previous->vocab.tokens()) {
            ++runs.snapshot_mismatch;
          }
        }
        previous = st.model;
        rows_before.clear();
        for (std::size_t r = 0; r < theta.size(); ++r) rows_before.push_back(theta.matrix().row_vector(r));
      });
  const double secs = seconds_since(t0);

  const auto& first = runs.schedule.steps.front().classes;
  const double ft = runs.reports["finetune"].whole_acc, msr = runs.reports["msr"].whole_acc;
  const double emr = runs.reports["emr"].whole_acc, ub = runs.reports["upperbound"].whole_acc;
  const double ft_first = class_mean(runs.reports["finetune"].steps.back(), first);
  const double msr_first = class_mean(runs.reports["msr"].steps.back(), first);
  const double chance = 1.0 / static_cast<double>(runs.schedule.class_count());

  c.expect(ft <= 0.35, "finetune WholeAcc " + fmt(ft) + " > 0.35");
  c.expect(ft_first <= 0.15, "finetune step-1-class accuracy " + fmt(ft_first) + " > 0.15");
  c.expect(ft_first < chance + 0.05, "finetune step-1-class accuracy not near chance");
  c.expect(msr >= ft + 0.25, "msr WholeAcc " + fmt(msr) + " < finetune + 0.25");
  c.expect(msr >= emr, "msr WholeAcc " + fmt(msr) + " < emr " + fmt(emr));
  c.expect(msr_first > 0.60, "msr step-1-class accuracy " + fmt(msr_first) + " <= 0.60");
  c.expect(ub >= 0.90, "upperbound WholeAcc " + fmt(ub) + " < 0.90");
  c.expect(secs < 180.0, "runtime " + fmt(secs) + " s >= 180 s");
  return "WholeAcc finetune " + fmt(ft) + " (step-1 classes " + fmt(ft_first) + "), emr " + fmt(emr) + ", msr " +
         fmt(msr) + " (step-1 classes " + fmt(msr_first) + "), upperbound " + fmt(ub) + "; " + fmt(secs, 3) + " s";
}

// ---------------------------------------------------------------------------

std::string ablation(Check& c, Runs& runs, const fs::path& root) {
  const auto t0 = Clock::now();
  RunConfig base = runs.config;
  base.out_dir = (root / "ablation").string();
  std::ostringstream quiet;
  const auto rows = cli::ablate(base, {}, {base.seed}, quiet);
  const double secs = seconds_since(t0);

  c.expect(rows.size() == 8, "ablate produced " + std::to_string(rows.size()) + " variants");
  const json msr_echo = json::parse(slurp(root / "ablation" / "msr" / "seed_1" / "report.json")).at("config");
  for (const auto& v : ablation_variants()) {
    const json echo = json::parse(slurp(root / "ablation" / v.preset / "seed_1" / "report.json")).at("config");
    std::vector<std::string> diff;
    for (const auto& [k, val] : echo.items()) {
      if (k == "strategy") continue;
      if (msr_echo.at(k) != val) diff.push_back(k);
    }
    for (const auto& [k, val] : echo.at("strategy").items()) {
      if (k != "name" && msr_echo.at("strategy").at(k) != val) diff.push_back(k);
    }
    std::vector<std::string> want = v.removed;
    std::sort(diff.begin(), diff.end());
    std::sort(want.begin(), want.end());
    std::string got;
    for (const auto& d : diff) got += d + " ";
    c.expect(diff == want, v.name + " differs in: " + got);
  }
  // the full method inside the grid reproduces the standalone MSR run
  c.expect(slurp(root / "ablation" / "msr" / "seed_1" / "report.json") ==
               report_json_string(runs.reports["msr"], to_json(runs.config)),
           "grid MSR report differs from the standalone run");
  c.expect(secs < 25 * 60.0, "runtime " + fmt(secs) + " s >= 25 min");
  std::string summary;
  for (const auto& r : rows) summary += r.variant + " " + fmt(r.mean_whole, 3) + ", ";
  return summary + fmt(secs, 3) + " s";
}

// ---------------------------------------------------------------------------

std::string determinism(Check& c, Runs& runs, const fs::path& root) {
  RunConfig a = runs.config, b = runs.config;
  a.out_dir = (root / "det_a").string();
  b.out_dir = (root / "det_b").string();
  std::ostringstream quiet;
  cli::run(a, quiet);
  cli::run(b, quiet);
  const std::string ja = slurp(fs::path(a.out_dir) / "report.json");
  c.expect(!ja.empty() && ja == slurp(fs::path(b.out_dir) / "report.json"), "repeated run report differs");
  c.expect(ja == report_json_string(runs.reports["msr"], to_json(runs.config)),
           "report differs from the in-process MSR run");
  for (std::size_t s = 1; s <= runs.schedule.steps.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%02zu.json", s);
    c.expect(slurp(fs::path(a.out_dir) / "memory" / name) == slurp(fs::path(b.out_dir) / "memory" / name),
             std::string("memory dump differs: ") + name);
  }
  // the stored config alone reproduces the run
  RunConfig again = load_run_config(fs::path(a.out_dir) / "report.json");
  again.out_dir = (root / "det_c").string();
  cli::run(again, quiet);
  c.expect(slurp(fs::path(again.out_dir) / "report.json") == ja, "rerun from stored config differs");

  c.expect(runs.frozen_checks > 0 && runs.frozen_mismatch == 0,
           std::to_string(runs.frozen_mismatch) + " frozen rows changed");
  c.expect(runs.snapshot_checks == runs.schedule.steps.size() - 1 && runs.snapshot_mismatch == 0,
           std::to_string(runs.snapshot_mismatch) + " snapshots differ from the previous model");
  return "3 identical reports, " + std::to_string(runs.frozen_checks) + " frozen-row checks, " +
         std::to_string(runs.snapshot_checks) + " snapshot checks";
}

// ---------------------------------------------------------------------------

std::string metric_identities(Check& c, Runs& runs, const fs::path& root) {
  std::size_t checked = 0;
  auto verify = [&](const std::vector<double>& accs, double average, double whole, const std::string& what) {
    double sum = 0;
    for (double a : accs) sum += a;
    c.expect(average == sum / static_cast<double>(accs.size()), what + ": AverageAcc != mean(acc_i)");
    c.expect(whole == accs.back(), what + ": WholeAcc != acc_K");
    ++checked;
  };
  for (const auto& [name, r] : runs.reports) verify(r.accs(), r.average_acc, r.whole_acc, name);
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.path().filename() != "report.json") continue;
    const ReportSummary s = load_report_summary(e.path());
    verify(s.accs, s.average_acc, s.whole_acc, e.path().string());
  }

  // hand-built three-step fixtures
  struct Fixture {
    std::vector<double> accs;
    double average, whole;
  };
  const Fixture fixtures[] = {
      {{1.0, 0.8, 0.6}, 0.8, 0.6},    // forgetting: Average above Whole
      {{0.5, 0.7, 0.9}, 0.7, 0.9},    // improving: Whole above Average
      {{0.75, 0.75, 0.75}, 0.75, 0.75},
  };
  for (const auto& f : fixtures) {
    RunReport r;
    for (double a : f.accs) {
      StepResult s;
      s.acc = a;
      r.steps.push_back(s);
    }
    finalize_metrics(r);
    c.expect(std::abs(r.average_acc - f.average) < 1e-15 && r.whole_acc == f.whole, "fixture metrics wrong");
    const bool decreasing = f.accs[0] >= f.accs[1] && f.accs[1] >= f.accs[2];
    const bool increasing = f.accs[0] <= f.accs[1] && f.accs[1] <= f.accs[2];
    if (decreasing) c.expect(r.average_acc >= r.whole_acc, "non-increasing curve with Whole above Average");
    if (increasing) c.expect(r.average_acc <= r.whole_acc, "non-decreasing curve with Average above Whole");
    ++checked;
  }
  return std::to_string(checked) + " reports and fixtures";
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "lid_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  Runs runs;

  run_criterion(1, "composite loss gradients match finite differences", gradient_check);
  run_criterion(2, "cosine head is scale invariant, dot head is not", scale_invariance);
  run_criterion(3, "losses match brute-force oracles", loss_oracles);
  run_criterion(4, "replay memory quota and prefix law", memory_law);
  run_criterion(5, "retention on the synthetic benchmark", [&](Check& c) { return retention(c, runs); });
  run_criterion(6, "ablation grid", [&](Check& c) { return ablation(c, runs, root); });
  run_criterion(7, "determinism and frozen state", [&](Check& c) { return determinism(c, runs, root); });
  run_criterion(8, "metric identities", [&](Check& c) { return metric_identities(c, runs, root); });

  fs::remove_all(root);
  std::cout << (g_failed == 0 ? "all criteria passed" : std::to_string(g_failed) + " criteria failed") << std::endl;
  return g_failed == 0 ? 0 : 1;
}
