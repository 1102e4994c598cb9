#pragma once

#include "tipvol/backtest.hpp"
#include "tipvol/baselines.hpp"
#include "tipvol/config.hpp"
#include "tipvol/error.hpp"
#include "tipvol/evaluation.hpp"
#include "tipvol/io.hpp"
#include "tipvol/matrix.hpp"
#include "tipvol/regression.hpp"
#include "tipvol/report.hpp"
#include "tipvol/rng.hpp"
#include "tipvol/simulator.hpp"
#include "tipvol/spot_vol.hpp"
#include "tipvol/stats.hpp"
#include "tipvol/tip_pca.hpp"
