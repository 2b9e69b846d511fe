#pragma once

#include "fedmua/aggregation.hpp"
#include "fedmua/archive.hpp"
#include "fedmua/attack.hpp"
#include "fedmua/dataset.hpp"
#include "fedmua/defense.hpp"
#include "fedmua/error.hpp"
#include "fedmua/example.hpp"
#include "fedmua/experiment.hpp"
#include "fedmua/federation.hpp"
#include "fedmua/influence.hpp"
#include "fedmua/metrics.hpp"
#include "fedmua/model.hpp"
#include "fedmua/param_vector.hpp"
#include "fedmua/partition.hpp"
#include "fedmua/report.hpp"
#include "fedmua/rng.hpp"
#include "fedmua/serialize.hpp"
#include "fedmua/threading.hpp"
#include "fedmua/unlearn.hpp"
