#pragma once

#include "hdpan/config.hpp"
#include "hdpan/divergence.hpp"
#include "hdpan/errors.hpp"
#include "hdpan/layers.hpp"
#include "hdpan/metrics.hpp"
#include "hdpan/models.hpp"
#include "hdpan/objective.hpp"
#include "hdpan/pudata.hpp"
#include "hdpan/tensor.hpp"
#include "hdpan/trainer.hpp"
