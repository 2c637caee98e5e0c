#pragma once

#include <span>

namespace aad {

enum class TestKind { unpaired, paired };
enum class Tail { single, both };

struct TestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
};

/// Student t-test of mean(a) against mean(b). The single tail tests
/// mean(a) > mean(b); unpaired uses the pooled variance.
TestResult ttest(TestKind kind, Tail tail, std::span<const double> a, std::span<const double> b);

/// Smallest k/n with P(X <= k) >= 1 - alpha for X ~ Binomial(n, 1/2).
double chance_level(int n_segments, double alpha = 0.05);

} // namespace aad
