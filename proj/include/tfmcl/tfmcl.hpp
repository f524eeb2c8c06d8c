#pragma once

#include "tfmcl/augment.hpp"
#include "tfmcl/autodiff.hpp"
#include "tfmcl/checkpoint.hpp"
#include "tfmcl/config.hpp"
#include "tfmcl/data.hpp"
#include "tfmcl/errors.hpp"
#include "tfmcl/gradcheck.hpp"
#include "tfmcl/jsonio.hpp"
#include "tfmcl/loss.hpp"
#include "tfmcl/model.hpp"
#include "tfmcl/rng.hpp"
#include "tfmcl/signal.hpp"
#include "tfmcl/synth.hpp"
#include "tfmcl/train.hpp"
#include "tfmcl/version.hpp"
