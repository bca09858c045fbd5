#pragma once

#include "sbss/bootstrap.hpp"
#include "sbss/diag.hpp"
#include "sbss/dimtest.hpp"
#include "sbss/errors.hpp"
#include "sbss/estimate.hpp"
#include "sbss/geometry.hpp"
#include "sbss/io.hpp"
#include "sbss/kernels.hpp"
#include "sbss/rng.hpp"
#include "sbss/sample.hpp"
#include "sbss/scatter.hpp"
#include "sbss/simulate.hpp"
#include "sbss/special.hpp"
