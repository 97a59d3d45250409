#pragma once

#include "qomor/errors.hpp"
#include "qomor/linalg.hpp"
#include "qomor/systems.hpp"
#include "qomor/gramians.hpp"
#include "qomor/balancing.hpp"
#include "qomor/qbmor.hpp"
#include "qomor/signals.hpp"
#include "qomor/simulate.hpp"
#include "qomor/metrics.hpp"
#include "qomor/generators.hpp"
#include "qomor/system_io.hpp"
#include "qomor/experiment.hpp"
