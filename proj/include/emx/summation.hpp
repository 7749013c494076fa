#ifndef EMX_SUMMATION_HPP
#define EMX_SUMMATION_HPP

#include <cstddef>
#include <vector>

namespace emx
{

// Pairwise (cascade) summation; fixed reduction order.
inline double pairwise_sum(const double *x, std::size_t n)
{
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double> &x) { return pairwise_sum(x.data(), x.size()); }

}  // namespace emx

#endif  // EMX_SUMMATION_HPP
