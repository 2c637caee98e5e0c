#include "aad/hypothesis.hpp"

#include <cmath>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "aad/error.hpp"

namespace aad {

namespace {

struct Moments {
    double mean = 0.0;
    double ss = 0.0; // sum of squared deviations
};

Moments moments(std::span<const double> x)
{
    Moments m;
    for (double v : x) m.mean += v;
    m.mean /= static_cast<double>(x.size());
    for (double v : x) m.ss += (v - m.mean) * (v - m.mean);
    return m;
}

TestResult finish(double t, double df, Tail tail)
{
    const boost::math::students_t dist(df);
    TestResult r;
    r.t = t;
    r.df = df;
    if (tail == Tail::single)
        r.p = boost::math::cdf(boost::math::complement(dist, t));
    else
        r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    r.p = std::min(r.p, 1.0);
    return r;
}

} // namespace

TestResult ttest(TestKind kind, Tail tail, std::span<const double> a, std::span<const double> b)
{
    if (a.size() < 2 || b.size() < 2) throw ParameterError("ttest: need at least two samples per group");
    if (kind == TestKind::paired) {
        if (a.size() != b.size()) throw ParameterError("ttest: paired samples differ in length");
        std::vector<double> d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        const Moments m = moments(d);
        const double n = static_cast<double>(d.size());
        const double var = m.ss / (n - 1.0);
        if (!(var > 0.0)) throw DegenerateTestError("ttest: differences have zero variance");
        return finish(m.mean / std::sqrt(var / n), n - 1.0, tail);
    }
    const Moments ma = moments(a), mb = moments(b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double df = na + nb - 2.0;
    const double pooled = (ma.ss + mb.ss) / df;
    if (!(pooled > 0.0)) throw DegenerateTestError("ttest: both groups have zero variance");
    return finish((ma.mean - mb.mean) / std::sqrt(pooled * (1.0 / na + 1.0 / nb)), df, tail);
}

double chance_level(int n_segments, double alpha)
{
    if (n_segments < 1) throw ParameterError("chance_level: n must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("chance_level: alpha outside (0, 1)");
    const boost::math::binomial dist(n_segments, 0.5);
    int lo = 0, hi = n_segments;
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (boost::math::cdf(dist, mid) >= 1.0 - alpha)
            hi = mid;
        else
            lo = mid + 1;
    }
    return static_cast<double>(lo) / n_segments;
}

} // namespace aad
