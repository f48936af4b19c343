#pragma once

// Umbrella header for the donor spin toolkit.

#include "donorspin/constants.hpp"
#include "donorspin/diffusion.hpp"
#include "donorspin/eigensolver.hpp"
#include "donorspin/errors.hpp"
#include "donorspin/hamiltonian.hpp"
#include "donorspin/io.hpp"
#include "donorspin/linewidth.hpp"
#include "donorspin/lockin.hpp"
#include "donorspin/operators.hpp"
#include "donorspin/optim.hpp"
#include "donorspin/specfit.hpp"
#include "donorspin/spin_system.hpp"
#include "donorspin/transitions.hpp"
