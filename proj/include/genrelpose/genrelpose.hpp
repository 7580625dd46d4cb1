#pragma once

#include "genrelpose/constraints.hpp"
#include "genrelpose/geometry.hpp"
#include "genrelpose/io.hpp"
#include "genrelpose/polynomial.hpp"
#include "genrelpose/solver.hpp"
#include "genrelpose/synthetic.hpp"
#include "genrelpose/trajectory.hpp"
