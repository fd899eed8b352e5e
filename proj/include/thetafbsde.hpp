#pragma once

#include "thetafbsde/errors.hpp"
#include "thetafbsde/measures.hpp"
#include "thetafbsde/uncertainty.hpp"
#include "thetafbsde/driver.hpp"
#include "thetafbsde/optimizer.hpp"
#include "thetafbsde/noise.hpp"
#include "thetafbsde/problem.hpp"
#include "thetafbsde/sde.hpp"
#include "thetafbsde/regression.hpp"
#include "thetafbsde/bsde.hpp"
#include "thetafbsde/coupling.hpp"
#include "thetafbsde/properties.hpp"
#include "thetafbsde/pde.hpp"
#include "thetafbsde/scenarios.hpp"
#include "thetafbsde/config.hpp"
#include "thetafbsde/io.hpp"
