#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "nck/metrics.hpp"

namespace {

// Brute-force Mann-Whitney oracle: concordant positive/negative pairs count
// 1, ties count 1/2.
double pairwise_auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / double(pairs);
}

TEST(Auc, PerfectSeparationScoresOne) {
    EXPECT_DOUBLE_EQ(nck::auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}), 1.0);
}

TEST(Auc, AllTiedScoresHalf) {
    EXPECT_DOUBLE_EQ(nck::auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}), 0.5);
}

TEST(Auc, ThreeOfFourConcordantPairs) {
    EXPECT_NEAR(nck::auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.75, 1e-12);
}

TEST(Auc, MatchesPairwiseOracleOnRandomInstances) {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + gen() % 199;
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        // Quantized scores on some trials force heavy tie structure.
        const bool quantize = trial % 2 == 0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = unit(gen);
            if (quantize) s = std::round(s * 8.0) / 8.0;
            scores[i] = s;
            labels[i] = unit(gen) < 0.4 ? 1 : 0;
        }
        labels[0] = 1;
        labels[n - 1] = 0;
        EXPECT_NEAR(nck::auc(scores, labels), pairwise_auc_oracle(scores, labels), 1e-9)
            << "trial " << trial;
    }
}

TEST(Auc, InvariantUnderStrictlyIncreasingTransform) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> scores(50);
    std::vector<int> labels(50);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = unit(gen);
        labels[i] = i % 3 == 0 ? 1 : 0;
    }
    std::vector<double> warped(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) warped[i] = std::exp(3.0 * scores[i]) + 1.0;
    EXPECT_DOUBLE_EQ(nck::auc(scores, labels), nck::auc(warped, labels));
}

TEST(Auc, NegatedTieFreeScoresComplementToOne) {
    std::mt19937_64 gen(8);
    std::vector<double> scores(30);
    std::iota(scores.begin(), scores.end(), 1.0);
    std::shuffle(scores.begin(), scores.end(), gen);
    std::vector<int> labels(30);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
    std::vector<double> negated(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) negated[i] = -scores[i];
    EXPECT_NEAR(nck::auc(scores, labels) + nck::auc(negated, labels), 1.0, 1e-12);
}

TEST(Auc, RejectsSingleClassAndBadInput) {
    EXPECT_THROW(nck::auc({0.1, 0.2}, {1, 1}), std::invalid_argument);
    EXPECT_THROW(nck::auc({0.1, 0.2}, {0, 0}), std::invalid_argument);
    EXPECT_THROW(nck::auc({}, {}), std::invalid_argument);
    EXPECT_THROW(nck::auc({0.1}, {0, 1}), std::invalid_argument);
    EXPECT_THROW(nck::auc({0.1, 0.2}, {0, 2}), std::invalid_argument);
    EXPECT_THROW(nck::auc({0.1, std::nan("")}, {0, 1}), std::invalid_argument);
}

TEST(RocCurve, EndpointsAndMonotonicity) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + gen() % 60;
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = std::round(unit(gen) * 10.0) / 10.0;
            labels[i] = unit(gen) < 0.5 ? 1 : 0;
        }
        labels[0] = 1;
        labels[n - 1] = 0;
        auto curve = nck::roc_curve(scores, labels);
        ASSERT_GE(curve.size(), 2u);
        ASSERT_EQ(curve.fpr.size(), curve.tpr.size());
        ASSERT_EQ(curve.fpr.size(), curve.thresholds.size());
        EXPECT_EQ(curve.fpr.front(), 0.0);
        EXPECT_EQ(curve.tpr.front(), 0.0);
        EXPECT_EQ(curve.fpr.back(), 1.0);
        EXPECT_EQ(curve.tpr.back(), 1.0);
        EXPECT_TRUE(std::isinf(curve.thresholds.front()));
        for (std::size_t i = 1; i < curve.size(); ++i) {
            EXPECT_GE(curve.fpr[i], curve.fpr[i - 1]);
            EXPECT_GE(curve.tpr[i], curve.tpr[i - 1]);
            EXPECT_LT(curve.thresholds[i], curve.thresholds[i - 1]);
        }
    }
}

TEST(RocCurve, PerfectSeparationPassesThroughTopLeftCorner) {
    auto curve = nck::roc_curve({0.9, 0.1}, {1, 0});
    bool corner = false;
    for (std::size_t i = 0; i < curve.size(); ++i)
        corner = corner || (curve.fpr[i] == 0.0 && curve.tpr[i] == 1.0);
    EXPECT_TRUE(corner);
}

TEST(RocCurve, TrapezoidAreaEqualsAucExactly) {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 5 + gen() % 40;
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = unit(gen);
            labels[i] = i % 2;
        }
        auto curve = nck::roc_curve(scores, labels);
        EXPECT_EQ(nck::trapezoid_area(curve), nck::auc(scores, labels));
    }
}

TEST(RocCurve, OnePointPerDistinctScore) {
    auto curve = nck::roc_curve({0.5, 0.5, 0.3, 0.3, 0.9}, {1, 0, 0, 1, 1});
    EXPECT_EQ(curve.size(), 4u);  // +inf, 0.9, 0.5, 0.3
    EXPECT_EQ(curve.thresholds[1], 0.9);
    EXPECT_EQ(curve.thresholds[2], 0.5);
    EXPECT_EQ(curve.thresholds[3], 0.3);
}

TEST(FalseAlarmRate, CountsNegativesAtOrAboveThreshold) {
    EXPECT_NEAR(nck::false_alarm_rate({0.6, 0.4, 0.2}, {0, 0, 0}, 0.5), 1.0 / 3.0, 1e-15);
}

TEST(FalseAlarmRate, QuietNegativesScoreZero) {
    EXPECT_DOUBLE_EQ(nck::false_alarm_rate({0.1, 0.2, 0.49}, {0, 0, 0}, 0.5), 0.0);
}

TEST(FalseAlarmRate, ThresholdTieCountsAsAlarm) {
    EXPECT_DOUBLE_EQ(nck::false_alarm_rate({0.5}, {0}, 0.5), 1.0);
}

TEST(FalseAlarmRate, AgreesWithRocFprAtScoreThresholds) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> scores(40);
    std::vector<int> labels(40);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = std::round(unit(gen) * 6.0) / 6.0;
        labels[i] = i % 2;
    }
    auto curve = nck::roc_curve(scores, labels);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        EXPECT_DOUBLE_EQ(nck::false_alarm_rate(scores, labels, curve.thresholds[i]),
                         curve.fpr[i]);
    }
    // A threshold between two observed scores alarms exactly as the next
    // observed score above it does.
    for (std::size_t i = 2; i < curve.size(); ++i) {
        const double mid = 0.5 * (curve.thresholds[i] + curve.thresholds[i - 1]);
        EXPECT_DOUBLE_EQ(nck::false_alarm_rate(scores, labels, mid), curve.fpr[i - 1]);
    }
}

TEST(FalseAlarmRate, RejectsAllPositiveLabels) {
    EXPECT_THROW(nck::false_alarm_rate({0.5, 0.6}, {1, 1}, 0.5), std::invalid_argument);
}

TEST(RocCsv, WellFormedRows) {
    auto curve = nck::roc_curve({0.9, 0.1}, {1, 0});
    const std::string csv = nck::roc_to_csv(curve);
    EXPECT_EQ(csv.rfind("threshold,fpr,tpr\n", 0), 0u);
    const std::size_t rows = std::size_t(std::count(csv.begin(), csv.end(), '\n'));
    EXPECT_EQ(rows, curve.size() + 1);
    EXPECT_NE(csv.find("inf,0,0"), std::string::npos);
}

}  // namespace
