#pragma once

#include "ntwist/error.hpp"
#include "ntwist/fourier.hpp"
#include "ntwist/maps.hpp"
#include "ntwist/interpolation.hpp"
#include "ntwist/frame.hpp"
#include "ntwist/solver_qp.hpp"
#include "ntwist/continuation.hpp"
#include "ntwist/solver_general.hpp"
