#pragma once

#include "ehreg/baselines.hpp"
#include "ehreg/csv.hpp"
#include "ehreg/dist_core.hpp"
#include "ehreg/errors.hpp"
#include "ehreg/getting_it_right.hpp"
#include "ehreg/gibbs.hpp"
#include "ehreg/harness.hpp"
#include "ehreg/horseshoe.hpp"
#include "ehreg/metrics.hpp"
#include "ehreg/model.hpp"
#include "ehreg/random.hpp"
#include "ehreg/random_effects.hpp"
#include "ehreg/sampler_eh.hpp"
#include "ehreg/simulate.hpp"
