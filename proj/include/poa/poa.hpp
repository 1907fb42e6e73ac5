#pragma once

#include "poa/algorithms.hpp"
#include "poa/factories.hpp"
#include "poa/hypotest.hpp"
#include "poa/instance.hpp"
#include "poa/metrics.hpp"
#include "poa/oracle.hpp"
#include "poa/experiment.hpp"
