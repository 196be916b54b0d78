#pragma once

#include "persfl/baselines.hpp"
#include "persfl/dataset.hpp"
#include "persfl/error.hpp"
#include "persfl/federation_io.hpp"
#include "persfl/harness.hpp"
#include "persfl/hypothesis.hpp"
#include "persfl/linmodel.hpp"
#include "persfl/metrics.hpp"
#include "persfl/persfl_agnostic.hpp"
#include "persfl/persfl_param.hpp"
#include "persfl/regtree.hpp"
#include "persfl/rng.hpp"
#include "persfl/synthdata.hpp"
