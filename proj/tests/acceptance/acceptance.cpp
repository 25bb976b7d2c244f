// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Measurements are reported whether or not they pass.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dsch/cli.hpp"
#include "dsch/dataset.hpp"
#include "dsch/gradcheck.hpp"
#include "dsch/io.hpp"
#include "dsch/losses.hpp"
#include "dsch/training.hpp"
#include "oracles.hpp"

using namespace dsch;
using namespace dsch::test;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// -- 1 -----------------------------------------------------------------------

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  const HashModel m = init_model(16, 8, 3);
  const Matrix xa = random_matrix(4, 16, 4), xb = random_matrix(4, 16, 5);
  const ComponentStructure st = random_structure(4, 8, 3, 2, 6);
  const auto idx = iota_indices(4);
  const Matrix alpha = batch_alpha(pair_similarity(st.fine_assign).similarity, idx);
  const std::array<Matrix, 4> params{m.w1, m.b1, m.w2, m.b2};
  const TapedFunction f = [&](ad::Tape& t, std::span<const ad::Var> p) {
    const TapedModel tm{p[0], p[1], p[2], p[3]};
    const CodeViews v{encode_relaxed(tm, t.constant(xa)), encode_relaxed(tm, t.constant(xb))};
    return total_loss(v, alpha, st, idx, 1.0, 0.1).total;
  };
  const GradCheckResult r = finite_diff_check(f, params, 1e-5);
  const double secs = seconds_since(t0);
  return {r.max_rel_error < 1e-4 && secs < 10.0,
          fmt("max rel error %.3g over %zu evaluations (< 1e-4), %.2f s (< 10 s)", r.max_rel_error, r.evaluations, secs)};
}

// -- 2 -----------------------------------------------------------------------

Verdict gmm_oracle() {
  const auto t0 = Clock::now();
  const Matrix x = two_clusters(200, 8, 0.1, 2024);
  const FineLevel f = fit_gmm(x, 2, 7);
  const RowVector pos = x.topRows(200).colwise().mean();
  const RowVector neg = x.bottomRows(200).colwise().mean();
  // Component labels are arbitrary: take the better of the two matchings.
  const double direct = std::max((f.means.row(0) - pos).norm(), (f.means.row(1) - neg).norm());
  const double swapped = std::max((f.means.row(0) - neg).norm(), (f.means.row(1) - pos).norm());
  const double dist = std::min(direct, swapped);
  double worst_drop = 0.0;
  for (std::size_t t = 1; t < f.loglik_history.size(); ++t) {
    const double prev = f.loglik_history[t - 1];
    worst_drop = std::max(worst_drop, (prev - f.loglik_history[t]) / std::abs(prev));
  }
  const double secs = seconds_since(t0);
  return {dist <= 0.05 && worst_drop <= 1e-7 && secs < 5.0,
          fmt("mean distance %.3g (<= 0.05), worst relative log-lik drop %.3g (<= 1e-7) over %zu iterations, %.2f s",
              dist, worst_drop, f.loglik_history.size(), secs)};
}

// -- 3 -----------------------------------------------------------------------

Verdict loss_equivalence() {
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 1 + trial % 8;
    const Index r = 3 + trial % 6;
    const double tau = 0.3 + 0.1 * (trial % 8);
    const auto seed = static_cast<std::uint64_t>(9000 + trial);
    const Matrix ha = random_matrix(n, r, seed).array().tanh().matrix();
    const Matrix hb = random_matrix(n, r, seed + 100).array().tanh().matrix();
    const Matrix s = pair_similarity(random_stochastic(n, 5, seed + 200)).similarity;
    const Matrix alpha = batch_alpha(s, iota_indices(static_cast<std::size_t>(n)));
    ad::Tape t;
    const CodeViews v{t.constant(ha), t.constant(hb)};
    if (n >= 2) worst = std::max(worst, std::abs(loss_baseline(v, tau).scalar() - oracle_baseline(ha, hb, tau)));
    worst = std::max(worst, std::abs(loss_instance(v, alpha, tau).scalar() - oracle_instance(ha, hb, alpha, tau)));
  }
  return {worst < 1e-10, fmt("worst |library - loop oracle| = %.3g on 20 instances, n <= 8 (< 1e-10)", worst)};
}

// -- 4 -----------------------------------------------------------------------

Verdict assignment_algebra() {
  double worst_sum = 0.0;
  int exact = 0;
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    const Index m1 = 2 + trial % 9;
    const Index m2 = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(m1));
    const Index r = 2 + trial % 5;
    const auto seed = static_cast<std::uint64_t>(700 + trial);
    const Matrix h = random_matrix(50 + 5 * trial, r, seed).array().tanh().matrix();
    const ComponentStructure s = build_structure(h, m1, m2, seed);
    worst_sum = std::max({worst_sum, (s.fine_assign.rowwise().sum().array() - 1.0).abs().maxCoeff(),
                          (s.coarse_assign.rowwise().sum().array() - 1.0).abs().maxCoeff()});

    // Random membership over a random stochastic P1, surjective onto m2.
    CoarseLevel c;
    c.membership.resize(static_cast<std::size_t>(m1));
    for (Index j = 0; j < m1; ++j)
      c.membership[static_cast<std::size_t>(j)] = static_cast<int>(j < m2 ? j : static_cast<Index>(rng() % static_cast<std::uint64_t>(m2)));
    std::shuffle(c.membership.begin(), c.membership.end(), rng);
    c.means = Matrix::Zero(m2, 1);
    const Matrix p1 = random_stochastic(30, m1, seed + 1);
    const Matrix p2 = coarse_assignments(p1, c);
    worst_sum = std::max(worst_sum, (p2.rowwise().sum().array() - 1.0).abs().maxCoeff());
    exact += p2 == naive_chain(p1, membership_matrix(c.membership, m2));
  }
  return {worst_sum <= 1e-9 && exact == 20,
          fmt("worst row-sum error %.3g (<= 1e-9); P2 == P1*M exactly in %d/20 membership configurations", worst_sum,
              exact)};
}

// -- 5 -----------------------------------------------------------------------

Verdict degenerations() {
  int ok = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Index m1 = 3 + static_cast<Index>(seed);
    const Matrix h = random_matrix(80, 4, 1200 + seed).array().tanh().matrix();

    const ComponentStructure same = build_structure(h, m1, m1, seed);
    std::vector<int> sorted = same.coarse.membership;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> iota(static_cast<std::size_t>(m1));
    std::iota(iota.begin(), iota.end(), 0);
    bool permuted = sorted == iota;
    for (Index j = 0; j < m1; ++j)
      permuted = permuted && same.coarse_assign.col(same.coarse.membership[static_cast<std::size_t>(j)]) == same.fine_assign.col(j);
    ok += permuted;

    const ComponentStructure flat = build_structure(h, m1, 1, seed);
    ok += (flat.coarse_assign.array() == 1.0).all();
    total += 2;
  }
  return {ok == total, fmt("%d/%d: m2 = m1 permuted identity membership, m2 = 1 all-ones coarse assignments", ok, total)};
}

// -- 6 -----------------------------------------------------------------------

Verdict map_oracle() {
  const std::string dir = std::string(DSCH_TEST_DATA) + "/map_fixture/";
  const BinaryCodes qc = io::read_codes(dir + "query.code");
  const BinaryCodes dc = io::read_codes(dir + "db.code");
  const LabelSet ql = LabelSet::from_lists(io::read_label_lists(dir + "query.labels"), 4);
  const LabelSet dl = LabelSet::from_lists(io::read_label_lists(dir + "db.labels"), 4);
  const auto expected = nlohmann::json::parse(io::read_text(dir + "expected.json"));
  double worst = 0.0;
  std::string values;
  for (const auto& [k, v] : expected.items()) {
    const double got = map_at_k({qc, ql}, {dc, dl}, std::stoul(k));
    worst = std::max(worst, std::abs(got - v["map"].get<double>()));
    values += fmt(" MAP@%s=%.7f", k.c_str(), got);
  }
  const double ap = average_precision(std::vector<int>{1, 0, 1});
  worst = std::max(worst, std::abs(ap - 5.0 / 6.0));
  return {worst < 1e-9, fmt("%s, AP(1,0,1)=%.5f; worst error %.3g (< 1e-9)", values.c_str(), ap, worst)};
}

// -- 7, 8 --------------------------------------------------------------------

TrainConfig benchmark_config(std::uint64_t seed) {
  TrainConfig c;
  c.code_length = 16;
  c.m1 = 12;
  c.m2 = 4;
  c.epochs = 30;
  c.seed = seed;
  c.record_timings = false;
  return c;
}

EvalOptions map50() {
  EvalOptions e;
  e.map_k = 50;
  e.precision_ks = {50};
  return e;
}

double benchmark_map(std::uint64_t seed, Variant variant) {
  SynthParams p;
  p.seed = seed;
  const SyntheticData d = make_gaussian_clusters(p);
  const LabelSet tl = LabelSet::from_classes(d.train_labels, 3), ql = LabelSet::from_classes(d.query_labels, 3);
  return ablation_run(d.train, tl, d.queries, ql, benchmark_config(seed), variant, map50()).map_at_k;
}

Verdict synthetic_retrieval() {
  const std::clock_t c0 = std::clock();
  const auto t0 = Clock::now();
  double full = 0.0, random = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const double m = benchmark_map(seed, Variant::Full);
    full += m / 3.0;
    per_seed += fmt("%s%.4f", seed ? ", " : "", m);

    SynthParams p;
    p.seed = seed;
    const SyntheticData d = make_gaussian_clusters(p);
    const BinaryCodes rq = random_codes(150, 16, 100 + seed), rd = random_codes(600, 16, 200 + seed);
    const LabelSet tl = LabelSet::from_classes(d.train_labels, 3), ql = LabelSet::from_classes(d.query_labels, 3);
    random += map_at_k({rq, ql}, {rd, tl}, 50) / 3.0;
  }
  const double cpu = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  const double wall = seconds_since(t0);
  return {full >= 0.90 && random >= 0.28 && random <= 0.40 && cpu < 180.0,
          fmt("MAP@50 %.4f [%s] (>= 0.90), random codes %.4f (in [0.28, 0.40]), %.1f s CPU / %.1f s wall (< 180 s)",
              full, per_seed.c_str(), random, cpu, wall)};
}

Verdict ablation_direction() {
  const std::array<Variant, 3> variants{Variant::Base, Variant::BaseIC, Variant::Full};
  std::array<double, 3> mean{};
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (std::size_t v = 0; v < variants.size(); ++v) mean[v] += benchmark_map(seed, variants[v]) / 5.0;
  const double base = mean[0], ic = mean[1], full = mean[2];
  return {full >= ic && ic >= base && full - base >= 0.02,
          fmt("mean MAP@50 over 5 seeds: Base %.4f, Base+IC %.4f, Full %.4f; Full - Base = %.4f (>= 0.02)", base, ic,
              full, full - base)};
}

// -- 9 -----------------------------------------------------------------------

Verdict linear_scaling() {
  // Codes from a fixed generator at each n so only the sample count changes.
  std::array<double, 3> secs{};
  std::array<int, 3> iters{};
  const std::array<Index, 3> sizes{1000, 2000, 4000};
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    SynthParams p;
    p.clusters = 8;
    p.train = sizes[s];
    p.queries = 1;
    p.dim = 16;
    p.sigma = 0.3;
    p.seed = 9;
    const Matrix h = make_gaussian_clusters(p).train.array().tanh().matrix();
    std::vector<double> runs;
    for (int rep = 0; rep < 5; ++rep) {
      const ComponentStructure st = build_structure(h, 16, 4, 3);
      runs.push_back(st.stats.total_seconds);
      iters[s] = st.stats.gmm_iterations;
    }
    std::nth_element(runs.begin(), runs.begin() + 2, runs.end());
    secs[s] = runs[2];
  }
  const double g1 = secs[1] / secs[0], g2 = secs[2] / secs[1];
  return {g1 <= 2.5 && g2 <= 2.5,
          fmt("median build_structure time %.3f / %.3f / %.3f s at n = 1000/2000/4000 (GMM iterations %d/%d/%d); "
              "growth %.2fx, %.2fx per doubling (<= 2.5x)",
              secs[0], secs[1], secs[2], iters[0], iters[1], iters[2], g1, g2)};
}

// -- 10 ----------------------------------------------------------------------

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dsch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Verdict determinism() {
  const ScratchDir dir("acceptance_det");
  SynthParams p;
  p.train = 200;
  p.queries = 1;
  p.seed = 3;
  io::write_features(dir.file("train.feat"), make_gaussian_clusters(p).train);
  io::write_text(dir.file("cfg.json"), nlohmann::json{{"r", 16}, {"m1", 12}, {"m2", 4}, {"epochs", 5},
                                                      {"seed", 1}, {"record_timings", false}}
                                           .dump());
  int codes = 0;
  for (const char* tag : {"a", "b"}) {
    codes += run_cli({"train", "--features", dir.file("train.feat"), "--config", dir.file("cfg.json"), "--out",
                      dir.file(std::string(tag) + ".model"), "--log", dir.file(std::string(tag) + ".log")});
  }
  if (codes != 0) return {false, "a train run failed"};
  const bool model = io::read_text(dir.file("a.model")) == io::read_text(dir.file("b.model"));
  const bool log = io::read_text(dir.file("a.log")) == io::read_text(dir.file("b.log"));
  return {model && log, fmt("model files %s, logs %s (%zu model bytes)", model ? "identical" : "DIFFER",
                            log ? "identical" : "DIFFER", io::read_text(dir.file("a.model")).size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"GMM two-cluster oracle", gmm_oracle},
      {"brute-force loss equivalence", loss_equivalence},
      {"assignment algebra", assignment_algebra},
      {"hierarchy degenerations", degenerations},
      {"MAP fixture", map_oracle},
      {"synthetic retrieval", synthetic_retrieval},
      {"ablation direction", ablation_direction},
      {"linear scaling in n", linear_scaling},
      {"training determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << i + 1 << ". " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
