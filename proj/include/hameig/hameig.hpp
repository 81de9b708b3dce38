#ifndef HAMEIG_HAMEIG_HPP
#define HAMEIG_HAMEIG_HPP

// Umbrella header.

#include "hameig/errors.hpp"
#include "hameig/piecewise.hpp"
#include "hameig/coefficients.hpp"
#include "hameig/riccati.hpp"
#include "hameig/spectrum.hpp"
#include "hameig/stochastic.hpp"
#include "hameig/io.hpp"
#include "hameig/config.hpp"

#endif  // HAMEIG_HAMEIG_HPP
