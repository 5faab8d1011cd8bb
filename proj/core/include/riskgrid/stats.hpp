#pragma once

#include <cstddef>
#include <vector>

namespace riskgrid::stats {

// standard normal CDF
double normal_cdf(double x);

// two-sided normal p-value, 2*Phi(-|z|)
double two_sided_p(double z);

double mean(const std::vector<double>& v);

// sample variance (n-1 divisor); 0 for n < 2
double sample_variance(const std::vector<double>& v);

double sample_sd(const std::vector<double>& v);

}  // namespace riskgrid::stats
