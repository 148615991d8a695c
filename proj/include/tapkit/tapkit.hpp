#pragma once

#include "tapkit/error.hpp"
#include "tapkit/random.hpp"
#include "tapkit/types.hpp"
#include "tapkit/linalg/autodiff.hpp"
#include "tapkit/linalg/grad_check.hpp"
#include "tapkit/linalg/matrix.hpp"
#include "tapkit/linalg/ops.hpp"
#include "tapkit/model/checkpoint.hpp"
#include "tapkit/model/transparser.hpp"
#include "tapkit/losses/losses.hpp"
#include "tapkit/losses/train.hpp"
#include "tapkit/parsing/parsing.hpp"
#include "tapkit/metrics/metrics.hpp"
#include "tapkit/baselines/kmeans.hpp"
#include "tapkit/baselines/tcn.hpp"
#include "tapkit/data/annotations.hpp"
#include "tapkit/data/dataset.hpp"
#include "tapkit/data/features.hpp"
#include "tapkit/data/stats.hpp"
#include "tapkit/data/synthetic.hpp"
#include "tapkit/experiments/ablation.hpp"
#include "tapkit/experiments/pipeline.hpp"
#include "tapkit/experiments/sampling.hpp"
