#pragma once

// Umbrella header for the quadratic sieve library.

#include "qsieve/assembly.hpp"
#include "qsieve/engine.hpp"
#include "qsieve/factor_base.hpp"
#include "qsieve/formats.hpp"
#include "qsieve/gf2.hpp"
#include "qsieve/number_theory.hpp"
#include "qsieve/sieve.hpp"
