#pragma once

#include "compreg/error.hpp"
#include "compreg/simplex.hpp"
#include "compreg/grid.hpp"
#include "compreg/linear_model.hpp"
#include "compreg/optimize.hpp"
#include "compreg/zero_impute.hpp"
#include "compreg/alpha_reg.hpp"
#include "compreg/pcr.hpp"
#include "compreg/io.hpp"
#include "compreg/cli.hpp"
