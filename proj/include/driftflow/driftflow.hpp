#pragma once

#include "driftflow/batch.hpp"
#include "driftflow/datasets.hpp"
#include "driftflow/drift.hpp"
#include "driftflow/drift_kl.hpp"
#include "driftflow/drift_mmd_sw.hpp"
#include "driftflow/errors.hpp"
#include "driftflow/flow.hpp"
#include "driftflow/generator.hpp"
#include "driftflow/io.hpp"
#include "driftflow/kernels.hpp"
#include "driftflow/matrix.hpp"
#include "driftflow/metrics.hpp"
#include "driftflow/numerics.hpp"
#include "driftflow/rng.hpp"
#include "driftflow/sinkhorn.hpp"
#include "driftflow/verify.hpp"
