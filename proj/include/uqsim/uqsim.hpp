#ifndef UQSIM_UQSIM_HPP
#define UQSIM_UQSIM_HPP

#include "uqsim/builtin.hpp"
#include "uqsim/config.hpp"
#include "uqsim/distributions.hpp"
#include "uqsim/engine.hpp"
#include "uqsim/errors.hpp"
#include "uqsim/power.hpp"
#include "uqsim/queueing.hpp"
#include "uqsim/rng.hpp"
#include "uqsim/service_model.hpp"
#include "uqsim/simulation.hpp"
#include "uqsim/stats.hpp"
#include "uqsim/workload.hpp"

#endif
