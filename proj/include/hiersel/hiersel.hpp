#pragma once

#include "hiersel/term.hpp"
#include "hiersel/model_space.hpp"
#include "hiersel/random.hpp"
#include "hiersel/priors.hpp"
#include "hiersel/marginals.hpp"
#include "hiersel/csv.hpp"
#include "hiersel/posterior.hpp"
#include "hiersel/sampler.hpp"
#include "hiersel/simulation.hpp"
#include "hiersel/commands.hpp"
