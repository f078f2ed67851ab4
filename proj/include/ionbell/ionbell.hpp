#pragma once

#include "ionbell/analyze.hpp"
#include "ionbell/errors.hpp"
#include "ionbell/evolve.hpp"
#include "ionbell/jumps.hpp"
#include "ionbell/observables.hpp"
#include "ionbell/qops.hpp"
#include "ionbell/scheme.hpp"
