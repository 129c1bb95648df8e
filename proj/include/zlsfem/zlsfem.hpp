#pragma once

#include "zlsfem/assembly.hpp"
#include "zlsfem/benchmarks.hpp"
#include "zlsfem/driver.hpp"
#include "zlsfem/estimator.hpp"
#include "zlsfem/fem_space.hpp"
#include "zlsfem/fields.hpp"
#include "zlsfem/geometry.hpp"
#include "zlsfem/linear_solver.hpp"
#include "zlsfem/mesh.hpp"
#include "zlsfem/nonlinearity.hpp"
#include "zlsfem/quadrature.hpp"
#include "zlsfem/selfcheck.hpp"
