#pragma once

#include "grade/numerics/kernels.hpp"
#include "grade/numerics/layers.hpp"
#include "grade/numerics/ops.hpp"
#include "grade/numerics/optim.hpp"
#include "grade/numerics/tape.hpp"
