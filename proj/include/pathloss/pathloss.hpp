#pragma once

// Umbrella header for the indoor path-loss modeling workbench.

#include "pathloss/anova.hpp"
#include "pathloss/bayes.hpp"
#include "pathloss/campaign.hpp"
#include "pathloss/cross_validation.hpp"
#include "pathloss/design.hpp"
#include "pathloss/distributions.hpp"
#include "pathloss/errors.hpp"
#include "pathloss/fade_margin.hpp"
#include "pathloss/group_tests.hpp"
#include "pathloss/isolation_forest.hpp"
#include "pathloss/kde.hpp"
#include "pathloss/modality.hpp"
#include "pathloss/regression.hpp"
#include "pathloss/residual_fit.hpp"
#include "pathloss/synthetic.hpp"
