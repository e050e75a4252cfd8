#pragma once

#include "cbfquad/dynamics.hpp"
#include "cbfquad/cbf.hpp"
#include "cbfquad/qp.hpp"
#include "cbfquad/safety_filter.hpp"
#include "cbfquad/controllers.hpp"
#include "cbfquad/sim.hpp"
#include "cbfquad/scenario_file.hpp"
#include "cbfquad/log_io.hpp"
#include "cbfquad/svg.hpp"
