// Copyright The rsgpi Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RSGPI_RSGPI_HPP
#define RSGPI_RSGPI_HPP

#include "rsgpi/baselines.hpp"
#include "rsgpi/channel_model.hpp"
#include "rsgpi/gpi_solver.hpp"
#include "rsgpi/message_set.hpp"
#include "rsgpi/quotient_forms.hpp"
#include "rsgpi/rate_bounds.hpp"
#include "rsgpi/sim_harness.hpp"
#include "rsgpi/sim_output.hpp"
#include "rsgpi/types.hpp"

#endif // RSGPI_RSGPI_HPP
