#pragma once

#include "hybridcox/error.hpp"
#include "hybridcox/rng.hpp"
#include "hybridcox/stats.hpp"
#include "hybridcox/linalg.hpp"
#include "hybridcox/dataset.hpp"
#include "hybridcox/survival.hpp"
#include "hybridcox/glm.hpp"
#include "hybridcox/trees.hpp"
#include "hybridcox/cox.hpp"
#include "hybridcox/predictors.hpp"
#include "hybridcox/missingness.hpp"
#include "hybridcox/imputation.hpp"
#include "hybridcox/methods.hpp"
#include "hybridcox/simulation.hpp"

namespace hybridcox {

#ifdef HYBRIDCOX_VERSION
inline constexpr const char* kVersion = HYBRIDCOX_VERSION;
#else
inline constexpr const char* kVersion = "0.1.0";
#endif

}  // namespace hybridcox
