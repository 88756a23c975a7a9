#pragma once

#include "cavcool/analysis/extrema.hpp"
#include "cavcool/analysis/physics.hpp"
#include "cavcool/analysis/report.hpp"
#include "cavcool/analysis/trajectory.hpp"
#include "cavcool/analysis/velocity.hpp"
