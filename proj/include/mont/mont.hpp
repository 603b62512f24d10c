#pragma once

#include "mont/dataset.hpp"
#include "mont/errors.hpp"
#include "mont/harness.hpp"
#include "mont/hypervolume.hpp"
#include "mont/individual.hpp"
#include "mont/metrics.hpp"
#include "mont/moea.hpp"
#include "mont/rng.hpp"
#include "mont/serialize.hpp"
#include "mont/tree.hpp"
#include "mont/variation.hpp"
