#pragma once

#include "popleader/engine.hpp"
#include "popleader/baseline.hpp"
#include "popleader/pll.hpp"
#include "popleader/pll_sym.hpp"
#include "popleader/analysis.hpp"
