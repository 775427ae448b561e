#pragma once

#include "asd/control.hpp"
#include "asd/decomposition.hpp"
#include "asd/errors.hpp"
#include "asd/estimators.hpp"
#include "asd/numerics.hpp"
#include "asd/plant.hpp"
#include "asd/scenarios.hpp"
#include "asd/simulation.hpp"
