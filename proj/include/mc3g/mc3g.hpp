#ifndef MC3G_MC3G_HPP
#define MC3G_MC3G_HPP

#include "mc3g/blackbox.hpp"
#include "mc3g/causal.hpp"
#include "mc3g/cost.hpp"
#include "mc3g/csv.hpp"
#include "mc3g/dataset.hpp"
#include "mc3g/error.hpp"
#include "mc3g/learner.hpp"
#include "mc3g/report.hpp"
#include "mc3g/rules.hpp"
#include "mc3g/schema.hpp"
#include "mc3g/search.hpp"
#include "mc3g/synth.hpp"

#endif  // MC3G_MC3G_HPP
