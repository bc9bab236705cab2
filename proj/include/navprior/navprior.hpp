#pragma once

#include "navprior/agents.hpp"
#include "navprior/config.hpp"
#include "navprior/dataset.hpp"
#include "navprior/envgraph.hpp"
#include "navprior/errors.hpp"
#include "navprior/experiments.hpp"
#include "navprior/metrics.hpp"
#include "navprior/prioranalysis.hpp"
#include "navprior/random.hpp"
#include "navprior/samplers.hpp"
