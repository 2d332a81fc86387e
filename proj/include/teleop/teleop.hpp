#ifndef TELEOP_TELEOP_HPP
#define TELEOP_TELEOP_HPP

#include "teleop/analysis.hpp"
#include "teleop/config.hpp"
#include "teleop/energy.hpp"
#include "teleop/engine.hpp"
#include "teleop/environments.hpp"
#include "teleop/error.hpp"
#include "teleop/format.hpp"
#include "teleop/log_csv.hpp"
#include "teleop/operators.hpp"
#include "teleop/psychophysics.hpp"
#include "teleop/svg_plot.hpp"
#include "teleop/sysid.hpp"
#include "teleop/transmissions.hpp"

#endif  // TELEOP_TELEOP_HPP
