#pragma once
// Umbrella header.

#include "relaxfield/error.hpp"
#include "relaxfield/field.hpp"
#include "relaxfield/grid.hpp"
#include "relaxfield/io.hpp"
#include "relaxfield/solver.hpp"
