#include "mbiv/stats.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "mbiv/error.hpp"

namespace mbiv {

double chi2_sf(double x, double df) {
    if (!(df > 0.0)) throw NumericError("chi-square degrees of freedom must be positive");
    if (std::isnan(x)) throw NumericError("chi-square statistic is NaN");
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double f_sf(double x, double df1, double df2) {
    if (!(df1 > 0.0) || !(df2 > 0.0)) throw NumericError("F degrees of freedom must be positive");
    if (std::isnan(x)) throw NumericError("F statistic is NaN");
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    // P(F > x) = I_{d2/(d2+d1 x)}(d2/2, d1/2); the complementary form keeps precision in the far tail.
    const double w = df1 * x / (df1 * x + df2);
    return boost::math::ibetac(df1 / 2.0, df2 / 2.0, w);
}

double t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw NumericError("t degrees of freedom must be positive");
    if (std::isnan(t)) return 1.0;
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return boost::math::ibeta(df / 2.0, 0.5, x);
}

}  // namespace mbiv
