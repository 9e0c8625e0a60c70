#pragma once

#include "prb/acquisition.hpp"
#include "prb/bounds.hpp"
#include "prb/common.hpp"
#include "prb/lbfgs.hpp"
#include "prb/pathwise.hpp"
#include "prb/regret.hpp"
#include "prb/sample_opt.hpp"
#include "prb/seqtest.hpp"
#include "prb/space_model.hpp"
#include "prb/stopping.hpp"
