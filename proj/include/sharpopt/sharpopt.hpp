// Umbrella header.
#pragma once

#include "sharpopt/analysis.hpp"
#include "sharpopt/base_optimizers.hpp"
#include "sharpopt/config.hpp"
#include "sharpopt/core.hpp"
#include "sharpopt/emit.hpp"
#include "sharpopt/gradcheck.hpp"
#include "sharpopt/objectives.hpp"
#include "sharpopt/runner.hpp"
#include "sharpopt/sam_family.hpp"
