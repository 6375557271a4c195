#pragma once

#include <cmath>
#include <functional>

#include "nvgan/autodiff.hpp"
#include "nvgan/rng.hpp"

namespace testutil {

inline nvgan::Grid random_grid(nvgan::Shape shape, nvgan::Pcg32& rng, float lo = -1.0f,
                               float hi = 1.0f) {
    nvgan::Grid g(std::move(shape));
    for (float& v : g.data) v = rng.uniform(lo, hi);
    return g;
}

inline double rel_err(double analytic, double reference) {
    return std::fabs(analytic - reference) / (std::fabs(reference) + 1e-8);
}

// Central finite difference of a scalar-valued function of one float32
// parameter cell, evaluated through the supplied forward function. The
// denominator is the realized float32 step, not the nominal one, so tiny
// steps stay unbiased.
inline double central_difference(float& cell, double h,
                                 const std::function<double()>& forward) {
    const float saved = cell;
    cell = static_cast<float>(saved + h);
    const double up_at = cell;
    const double up = forward();
    cell = static_cast<float>(saved - h);
    const double down_at = cell;
    const double down = forward();
    cell = saved;
    return (up - down) / (up_at - down_at);
}

}  // namespace testutil
