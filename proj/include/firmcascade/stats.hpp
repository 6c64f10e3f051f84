#ifndef FIRMCASCADE_STATS_HPP
#define FIRMCASCADE_STATS_HPP

#include <span>

namespace firmcascade {

struct PairedTTestResult {
    double t = 0.0;
    double p_two_sided = 1.0;
    int dof = 0;
    double mean_diff = 0.0;  // mean of a - b
};

// Classic paired t-test on the differences a_i - b_i. InputError unless
// both series have the same length >= 2; DegenerateInputError when the
// differences have zero variance.
PairedTTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace firmcascade

#endif
