#pragma once

namespace mbiv {

// Upper-tail probabilities.
[[nodiscard]] double chi2_sf(double x, double df);
[[nodiscard]] double f_sf(double x, double df1, double df2);
[[nodiscard]] double t_two_sided_p(double t, double df);

}  // namespace mbiv
