#pragma once

#include "ipea/rng.hpp"
#include "ipea/qmath.hpp"
#include "ipea/controlled.hpp"
#include "ipea/photonics.hpp"
#include "ipea/qpe.hpp"
#include "ipea/tomography.hpp"
#include "ipea/experiment.hpp"
