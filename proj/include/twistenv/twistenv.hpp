#pragma once

#include "constants.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "scaled_system.hpp"
#include "validity.hpp"
#include "ode.hpp"
#include "envelope.hpp"
#include "wavefunction.hpp"
#include "io.hpp"
#include "cli.hpp"
