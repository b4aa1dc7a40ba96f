#pragma once

#include "qnest/branch_stats.hpp"
#include "qnest/capacity.hpp"
#include "qnest/classify.hpp"
#include "qnest/constants.hpp"
#include "qnest/dynamics.hpp"
#include "qnest/errors.hpp"
#include "qnest/nest.hpp"
#include "qnest/parawindow.hpp"
#include "qnest/real.hpp"
#include "qnest/report.hpp"
#include "qnest/tree_address.hpp"
