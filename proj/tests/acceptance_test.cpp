// Acceptance gate: nine published criteria, one printed PASS/FAIL line each.
// Tolerances and runtime budgets are pinned here and must not be loosened.
#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nck/alternation.hpp"
#include "nck/cleaner.hpp"
#include "nck/graph.hpp"
#include "nck/io.hpp"
#include "nck/loss.hpp"
#include "nck/metrics.hpp"
#include "nck/synthdata.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int criterion, bool pass, double elapsed, double budget, const std::string& detail) {
    std::printf("[CRITERION %d] %s: %s (%.1fs < %.0fs budget)\n", criterion,
                pass ? "PASS" : "FAIL", detail.c_str(), elapsed, budget);
    std::fflush(stdout);
    EXPECT_TRUE(pass) << "criterion " << criterion << ": " << detail;
    EXPECT_LT(elapsed, budget) << "criterion " << criterion << " over budget";
}

nck::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen,
                          double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    nck::Matrix m(rows, cols);
    for (auto& v : m.values()) v = dist(gen);
    return m;
}

// --- Criterion 1: renormalization against a direct dense oracle. ----------

TEST(Acceptance, Criterion1RenormalizationOracle) {
    const auto start = Clock::now();
    std::mt19937_64 gen(0xacc1);
    std::uniform_int_distribution<std::size_t> size_dist(1, 64);
    std::uniform_real_distribution<double> entry(0.0, 3.0);

    double max_abs_err = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = size_dist(gen);
        nck::Matrix a(n, n);
        for (auto& v : a.values()) v = entry(gen);

        // Oracle: direct entrywise evaluation with plain doubles.
        std::vector<double> inv_sqrt(n);
        for (std::size_t i = 0; i < n; ++i) {
            double row_sum = 1.0;
            for (std::size_t j = 0; j < n; ++j) row_sum += a(i, j);
            inv_sqrt[i] = 1.0 / std::sqrt(row_sum);
        }
        const auto op = nck::renormalize(nck::Adjacency{a, nck::AdjacencyKind::constant});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double expected =
                    inv_sqrt[i] * (a(i, j) + (i == j ? 1.0 : 0.0)) * inv_sqrt[j];
                max_abs_err = std::max(max_abs_err, std::abs(op.data(i, j) - expected));
            }
        }
    }
    const double elapsed = seconds_since(start);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "renormalization matches dense oracle, max|err|=%.2e <= 1e-12 over 100 "
                  "matrices (N<=64)",
                  max_abs_err);
    report(1, max_abs_err <= 1e-12, elapsed, 5.0, buf);
}

// --- Criterion 2: adjacency invariants over randomized cases. -------------

TEST(Acceptance, Criterion2AdjacencyInvariants) {
    const auto start = Clock::now();
    std::mt19937_64 gen(0xacc2);
    std::uniform_int_distribution<std::size_t> n_dist(1, 32);
    std::uniform_int_distribution<std::size_t> d_dist(1, 8);

    bool rows_attain_one = true;
    bool temporal_ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = n_dist(gen);
        if (trial % 2 == 0) {
            const nck::FeatureMatrix x(random_matrix(n, d_dist(gen), gen));
            const nck::Adjacency a = nck::build_feature_similarity(x);
            for (std::size_t i = 0; i < n && rows_attain_one; ++i) {
                double row_max = 0.0;
                for (std::size_t j = 0; j < n; ++j) row_max = std::max(row_max, a.data(i, j));
                rows_attain_one = rows_attain_one && row_max == 1.0;
            }
        } else {
            const nck::Adjacency t = nck::build_temporal_consistency(n);
            for (std::size_t i = 0; i < n && temporal_ok; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double v = t.data(i, j);
                    temporal_ok = temporal_ok && v > 0.0 && v <= 1.0;
                    temporal_ok = temporal_ok && t.data(j, i) == v;  // symmetric
                    if (i + 1 < n && j + 1 < n)
                        temporal_ok = temporal_ok && t.data(i + 1, j + 1) == v;  // Toeplitz
                    temporal_ok =
                        temporal_ok && (i != j || v == 1.0);  // unit diagonal
                }
            }
        }
    }

    // Asymmetry witness: distinct row norms make the row-max shift differ.
    nck::Matrix w(3, 1);
    w(0, 0) = 0.5;
    w(1, 0) = 2.0;
    w(2, 0) = -1.0;
    const nck::Adjacency af = nck::build_feature_similarity(nck::FeatureMatrix(w));
    bool witness = false;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            witness = witness || af.data(i, j) != af.data(j, i);

    const double elapsed = seconds_since(start);
    const bool pass = rows_attain_one && temporal_ok && witness;
    std::string detail = "feature rows attain max 1.0 exactly";
    detail += rows_attain_one ? "" : " [VIOLATED]";
    detail += "; temporal symmetric Toeplitz in (0,1]";
    detail += temporal_ok ? "" : " [VIOLATED]";
    detail += "; asymmetry witness ";
    detail += witness ? "found" : "MISSING";
    detail += "; 1000 cases";
    report(2, pass, elapsed, 5.0, detail);
}

// --- Criterion 3: analytic vs central finite-difference gradients. --------

TEST(Acceptance, Criterion3GradientSuite) {
    const auto start = Clock::now();
    std::mt19937_64 gen(0xacc3);
    std::uniform_int_distribution<std::size_t> n_dist(2, 8);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    std::uniform_real_distribution<double> var_dist(0.01, 0.5);

    double max_rel_err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = n_dist(gen);
        nck::CleanerConfig cfg;
        cfg.raw_dim = 3;
        cfg.comp_hidden = 4;
        cfg.comp_out = 3;
        cfg.gcn_hidden = 2;
        cfg.gcn_layers = 1 + trial % 3;
        cfg.activation = trial % 2 == 0 ? nck::Activation::relu : nck::Activation::tanh;
        cfg.branches = std::array<nck::BranchSet, 3>{nck::BranchSet::both,
                                                     nck::BranchSet::feature_only,
                                                     nck::BranchSet::temporal_only}[trial % 3];
        cfg.seed = 1000 + std::uint64_t(trial);

        const nck::FeatureMatrix x(random_matrix(n, cfg.raw_dim, gen));
        nck::RenormalizedAdjacency op_f, op_t;
        if (cfg.has_feature_branch()) op_f = nck::renormalize(nck::build_feature_similarity(x));
        if (cfg.has_temporal_branch())
            op_t = nck::renormalize(nck::build_temporal_consistency(n));

        std::vector<double> mean(n), variance(n);
        for (std::size_t i = 0; i < n; ++i) {
            mean[i] = unit(gen);
            variance[i] = var_dist(gen);
        }
        const nck::NoisySnippetLabels labels(mean, variance, 4);
        const auto high_conf = nck::select_high_confidence(labels, 0.5);
        const auto ema = nck::init_ema(labels, 0.6);

        nck::CleanerParams params = nck::init_params(cfg);
        const auto trace = nck::forward(x, op_f, op_t, params);
        const auto loss = nck::total_loss(trace.prob, labels, high_conf, ema);
        const auto grads = nck::backward(trace, params, loss.grad);

        auto loss_at = [&]() {
            const auto t = nck::forward(x, op_f, op_t, params);
            return nck::total_loss(t.prob, labels, high_conf, ema).value;
        };

        const auto theta = nck::detail::tensor_views(params);
        const auto analytic = nck::detail::tensor_views(grads);
        const double h = 1e-5;
        for (std::size_t t = 0; t < theta.size(); ++t) {
            for (std::size_t i = 0; i < theta[t].size(); ++i) {
                const double saved = theta[t][i];
                theta[t][i] = saved + h;
                const double up = loss_at();
                theta[t][i] = saved - h;
                const double down = loss_at();
                theta[t][i] = saved;
                const double fd = (up - down) / (2.0 * h);
                const double denom = std::max({std::abs(fd), std::abs(analytic[t][i]), 1e-6});
                max_rel_err = std::max(max_rel_err, std::abs(fd - analytic[t][i]) / denom);
            }
        }
    }
    const double elapsed = seconds_since(start);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "analytic vs central FD over every parameter, 20 instances (N<=8), max rel "
                  "err=%.2e < 1e-4",
                  max_rel_err);
    report(3, max_rel_err < 1e-4, elapsed, 30.0, buf);
}

// --- Criterion 4: loss identities and EMA bounds. --------------------------

TEST(Acceptance, Criterion4LossIdentities) {
    const auto start = Clock::now();
    std::mt19937_64 gen(0xacc4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool pass = true;
    std::string failure;

    // L_D at matched (hard, saturated) targets <= 2 * clamp epsilon.
    {
        const std::vector<double> mean = {1.0, 0.0, 1.0};
        const std::vector<double> variance = {0.0, 0.0, 0.0};
        const nck::NoisySnippetLabels labels(mean, variance, 1);
        const nck::HighConfidenceSet all{{0, 1, 2}};
        const auto term = nck::direct_loss(mean, labels, all);
        if (!(term.value <= 2.0 * nck::kProbEpsilon)) {
            pass = false;
            failure += " L_D(matched)=" + std::to_string(term.value);
        }
    }

    // L_I = 0 iff p == p_bar.
    {
        const std::vector<double> mean = {0.3, 0.7, 0.5};
        const nck::NoisySnippetLabels labels(mean, {0.1, 0.1, 0.1}, 4);
        auto ema = nck::init_ema(labels, 0.6);
        const auto zero = nck::indirect_loss(mean, ema);
        std::vector<double> moved = mean;
        moved[1] += 0.25;
        const auto nonzero = nck::indirect_loss(moved, ema);
        if (zero.value != 0.0 || !(nonzero.value > 0.0)) {
            pass = false;
            failure += " L_I iff failed";
        }
    }

    // total = direct + indirect exactly, over random instances.
    for (int trial = 0; trial < 50 && pass; ++trial) {
        const std::size_t n = 1 + std::size_t(gen() % 12);
        std::vector<double> p(n), mean(n), variance(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = 0.02 + 0.96 * unit(gen);
            mean[i] = 0.02 + 0.96 * unit(gen);
            variance[i] = 0.01 + unit(gen);
        }
        const nck::NoisySnippetLabels labels(mean, variance, 4);
        const auto high_conf = nck::select_high_confidence(labels, 0.5);
        auto ema = nck::init_ema(labels, 0.6);
        const auto total = nck::total_loss(p, labels, high_conf, ema);
        const auto direct = nck::direct_loss(p, labels, high_conf);
        const auto indirect = nck::indirect_loss(p, ema);
        if (total.value != direct.value + indirect.value) {
            pass = false;
            failure += " total != direct + indirect";
        }
    }

    // EMA stays inside the convex hull of its inputs over 1000 updates.
    {
        const std::size_t n = 16;
        std::vector<double> mean(n), variance(n, 0.1);
        for (auto& m : mean) m = unit(gen);
        const nck::NoisySnippetLabels labels(mean, variance, 4);
        auto ema = nck::init_ema(labels, 0.6);
        std::vector<double> lo = mean, hi = mean;
        for (int step = 0; step < 1000; ++step) {
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = unit(gen);
                lo[i] = std::min(lo[i], p[i]);
                hi[i] = std::max(hi[i], p[i]);
            }
            nck::update_ema(ema, p);
            for (std::size_t i = 0; i < n; ++i) {
                if (ema.p_bar[i] < lo[i] - 1e-12 || ema.p_bar[i] > hi[i] + 1e-12) {
                    pass = false;
                    failure += " EMA left convex hull";
                    break;
                }
            }
        }
    }

    const double elapsed = seconds_since(start);
    report(4, pass, elapsed, 5.0,
           pass ? "L_D(matched)<=2eps; L_I=0 iff p=ema; total==direct+indirect exactly; EMA "
                  "hull bounds over 1000 updates"
                : "loss identities failed:" + failure);
}

// --- Criterion 5: AUC against pairwise Mann-Whitney. -----------------------

TEST(Acceptance, Criterion5AucOracle) {
    const auto start = Clock::now();
    std::mt19937_64 gen(0xacc5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    double max_auc_err = 0.0;
    bool roc_monotone = true;
    double max_far_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + std::size_t(gen() % 199);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Quantized scores force tie groups.
            scores[i] = std::round(unit(gen) * 8.0) / 8.0;
            labels[i] = gen() % 2 == 0 ? 1 : 0;
            has0 = has0 || labels[i] == 0;
            has1 = has1 || labels[i] == 1;
        }
        if (!has0) labels[0] = 0;
        if (!has1) labels[n - 1] = 1;

        // Oracle: brute-force pairwise Mann-Whitney with half credit on ties.
        double wins = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] != 1) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] != 0) continue;
                ++pairs;
                if (scores[i] > scores[j]) wins += 1.0;
                else if (scores[i] == scores[j]) wins += 0.5;
            }
        }
        const double oracle = wins / double(pairs);
        max_auc_err = std::max(max_auc_err, std::abs(nck::auc(scores, labels) - oracle));

        const nck::RocCurve roc = nck::roc_curve(scores, labels);
        for (std::size_t k = 1; k < roc.size(); ++k) {
            roc_monotone = roc_monotone && roc.fpr[k] >= roc.fpr[k - 1] &&
                           roc.tpr[k] >= roc.tpr[k - 1];
        }
        for (std::size_t k = 1; k < roc.size(); ++k) {  // skip +inf sentinel
            const double far = nck::false_alarm_rate(scores, labels, roc.thresholds[k]);
            max_far_err = std::max(max_far_err, std::abs(far - roc.fpr[k]));
        }
    }
    const double elapsed = seconds_since(start);
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "trapezoid vs Mann-Whitney max|err|=%.2e <= 1e-9 on 200 instances (n<=200); "
                  "ROC monotone=%s; max|FAR-fpr|=%.2e",
                  max_auc_err, roc_monotone ? "yes" : "NO", max_far_err);
    report(5, max_auc_err <= 1e-9 && roc_monotone && max_far_err <= 1e-12, elapsed, 10.0, buf);
}

// --- Criterion 6: one-sided noise invariant + graph-free test time. --------

TEST(Acceptance, Criterion6OneSidedInvariantAndTestTimePath) {
    const auto start = Clock::now();
    const nck::StandardBenchmark bench = nck::standard_benchmark();
    nck::AlternationConfig cfg =
        nck::benchmark_alternation_config(bench.descriptor.run_seeds.front());
    nck::BuiltinSnippetClassifier clf(cfg.classifier, bench.train[0].features.dim());
    const auto history = nck::run(cfg, clf, bench.train, bench.eval);

    bool targets_exact_zero = true;
    std::uint64_t eval_builds = 0;
    for (const auto& rec : history.steps) {
        eval_builds += rec.graph_builds_during_eval;
        for (const auto& bag : bench.train) {
            if (bag.label != 0) continue;
            for (double t : rec.train_targets.at(bag.id))
                targets_exact_zero = targets_exact_zero && t == 0.0;
        }
    }
    const double elapsed = seconds_since(start);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "every Y=0 target exactly 0 across %zu steps: %s; graph builds during eval: "
                  "%llu (must be 0)",
                  history.steps.size(), targets_exact_zero ? "yes" : "NO",
                  (unsigned long long)eval_builds);
    report(6, targets_exact_zero && eval_builds == 0, elapsed, 120.0, buf);
}

// --- Criterion 7: step-wise improvement trend over the published seeds. ----

TEST(Acceptance, Criterion7StepwiseImprovementTrend) {
    const auto start = Clock::now();
    const nck::StandardBenchmark bench = nck::standard_benchmark();
    const std::size_t n_seeds = bench.descriptor.run_seeds.size();

    std::array<double, 3> mean{0.0, 0.0, 0.0};
    for (std::uint64_t seed : bench.descriptor.run_seeds) {
        nck::AlternationConfig cfg = nck::benchmark_alternation_config(seed);
        nck::BuiltinSnippetClassifier clf(cfg.classifier, bench.train[0].features.dim());
        const auto history = nck::run(cfg, clf, bench.train, bench.eval);
        for (int s = 0; s < 3; ++s) mean[s] += history.steps[s].eval_auc / double(n_seeds);
    }
    const double gain2 = mean[1] - mean[0];
    const double gain3 = mean[2] - mean[1];
    const bool pass = gain2 >= bench.descriptor.min_step2_gain &&
                      gain3 >= -bench.descriptor.step3_drop_tolerance;
    const double elapsed = seconds_since(start);
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "mean eval AUC %.4f -> %.4f -> %.4f over %zu seeds; step2 gain %+.4f >= "
                  "0.03; step3 change %+.4f >= -0.02",
                  mean[0], mean[1], mean[2], n_seeds, gain2, gain3);
    report(7, pass, elapsed, 600.0, buf);
}

// --- Criterion 8: ablation ordering. ----------------------------------------

TEST(Acceptance, Criterion8AblationOrdering) {
    const auto start = Clock::now();
    const nck::StandardBenchmark bench = nck::standard_benchmark();

    auto mean_final_auc = [&](nck::BranchSet branches, bool constant_graph) {
        double mean = 0.0;
        for (std::uint64_t seed : bench.descriptor.run_seeds) {
            nck::AlternationConfig cfg = nck::benchmark_alternation_config(seed);
            cfg.ablation.branches = branches;
            cfg.ablation.constant_graph = constant_graph;
            nck::BuiltinSnippetClassifier clf(cfg.classifier, bench.train[0].features.dim());
            const auto history = nck::run(cfg, clf, bench.train, bench.eval);
            mean += history.steps.back().eval_auc / double(bench.descriptor.run_seeds.size());
        }
        return mean;
    };

    const double both = mean_final_auc(nck::BranchSet::both, false);
    const double feature = mean_final_auc(nck::BranchSet::feature_only, false);
    const double temporal = mean_final_auc(nck::BranchSet::temporal_only, false);
    const double feature_const = mean_final_auc(nck::BranchSet::feature_only, true);
    const double temporal_const = mean_final_auc(nck::BranchSet::temporal_only, true);

    const double margin = bench.descriptor.ablation_margin;
    const bool pass = both >= feature - margin && both >= temporal - margin &&
                      feature >= feature_const - margin && temporal >= temporal_const - margin;
    const double elapsed = seconds_since(start);
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "mean final AUC: both=%.4f >= feature=%.4f >= feature-const=%.4f and "
                  "both >= temporal=%.4f >= temporal-const=%.4f (margin -0.01)",
                  both, feature, feature_const, temporal, temporal_const);
    report(8, pass, elapsed, 1200.0, buf);
}

// --- Criterion 9: byte-identical metrics on rerun. ---------------------------

TEST(Acceptance, Criterion9DeterministicMetrics) {
    const auto start = Clock::now();
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "nck_acceptance_c9";
    fs::remove_all(root);

    auto configured = [&](const fs::path& out) {
        nck::RunConfig cfg;  // standard benchmark defaults
        cfg.command = "run";
        cfg.out_dir = out;
        nck::apply_seed(cfg, 11);
        return cfg;
    };
    const int rc_a = nck::run_experiment(configured(root / "a"));
    const int rc_b = nck::run_experiment(configured(root / "b"));

    bool pass = rc_a == 0 && rc_b == 0;
    std::string detail;
    if (pass) {
        const auto metrics_a = nck::read_binary_file(root / "a" / "metrics.json");
        const auto metrics_b = nck::read_binary_file(root / "b" / "metrics.json");
        const auto roc_a = nck::read_binary_file(root / "a" / "roc_step_3.csv");
        const auto roc_b = nck::read_binary_file(root / "b" / "roc_step_3.csv");
        const auto cleaned_a = nck::read_binary_file(root / "a" / "cleaned_step_3.json");
        const auto cleaned_b = nck::read_binary_file(root / "b" / "cleaned_step_3.json");
        pass = metrics_a == metrics_b && roc_a == roc_b && cleaned_a == cleaned_b;
        detail = "identical config+seed reruns byte-identical (metrics.json " +
                 std::to_string(metrics_a.size()) + " bytes" +
                 (metrics_a == metrics_b ? " equal" : " DIFFER") + ", roc csv " +
                 (roc_a == roc_b ? "equal" : "DIFFER") + ", cleaned labels " +
                 (cleaned_a == cleaned_b ? "equal" : "DIFFER") + ")";
    } else {
        detail = "run_experiment exited nonzero";
    }
    fs::remove_all(root);
    report(9, pass, seconds_since(start), 300.0, detail);
}

}  // namespace
