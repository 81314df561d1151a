#pragma once

#include "mixforge/core.hpp"
#include "mixforge/data.hpp"
#include "mixforge/error.hpp"
#include "mixforge/harness.hpp"
#include "mixforge/hungarian.hpp"
#include "mixforge/masks.hpp"
#include "mixforge/model.hpp"
#include "mixforge/objective.hpp"
#include "mixforge/policies.hpp"
#include "mixforge/puzzlemix.hpp"
#include "mixforge/rng.hpp"
#include "mixforge/saliency.hpp"
#include "mixforge/tensor.hpp"
