#include "firmcascade/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <vector>

#include "firmcascade/errors.hpp"

namespace firmcascade {

PairedTTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("paired t-test needs series of equal length");
    const std::size_t n = a.size();
    if (n < 2) throw InputError("paired t-test needs at least two pairs");

    std::vector<double> diff(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = a[i] - b[i];
        mean += diff[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double d : diff) ss += (d - mean) * (d - mean);
    const double var = ss / static_cast<double>(n - 1);
    if (var <= 0.0) {
        throw DegenerateInputError("paired differences have zero variance; the t statistic is undefined");
    }

    PairedTTestResult out;
    out.dof = static_cast<int>(n) - 1;
    out.mean_diff = mean;
    out.t = mean / std::sqrt(var / static_cast<double>(n));
    boost::math::students_t_distribution<double> dist(static_cast<double>(out.dof));
    out.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
    return out;
}

}  // namespace firmcascade
