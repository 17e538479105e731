#pragma once

// Umbrella header.

#include "tsadv/attack.hpp"
#include "tsadv/checkpoint.hpp"
#include "tsadv/dataset.hpp"
#include "tsadv/defense.hpp"
#include "tsadv/eval.hpp"
#include "tsadv/net.hpp"
#include "tsadv/parallel.hpp"
#include "tsadv/report.hpp"
#include "tsadv/rng.hpp"
#include "tsadv/text.hpp"
#include "tsadv/train.hpp"
#include "tsadv/universal.hpp"
