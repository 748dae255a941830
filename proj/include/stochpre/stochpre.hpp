#pragma once

#include "stochpre/anomaly.hpp"
#include "stochpre/cdf.hpp"
#include "stochpre/errors.hpp"
#include "stochpre/fasterthan.hpp"
#include "stochpre/rational.hpp"
#include "stochpre/simdist.hpp"
#include "stochpre/smp.hpp"
#include "stochpre/tml.hpp"
#include "stochpre/wlwb.hpp"
