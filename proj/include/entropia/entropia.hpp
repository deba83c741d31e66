#pragma once

#include "entropia/bounds.hpp"
#include "entropia/data.hpp"
#include "entropia/gibbs.hpp"
#include "entropia/harness.hpp"
#include "entropia/nn.hpp"
#include "entropia/optim.hpp"
#include "entropia/rng.hpp"
#include "entropia/schedule.hpp"
