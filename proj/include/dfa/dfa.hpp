#pragma once

#include "dfa/arma.hpp"
#include "dfa/dual.hpp"
#include "dfa/errors.hpp"
#include "dfa/estimate.hpp"
#include "dfa/io.hpp"
#include "dfa/parallel.hpp"
#include "dfa/recovery.hpp"
#include "dfa/rng.hpp"
#include "dfa/specalg.hpp"
#include "dfa/tolerance.hpp"
#include "dfa/types.hpp"
