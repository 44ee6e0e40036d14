#pragma once

// Umbrella header.

#include "bootstrap.hpp"
#include "classifiers.hpp"
#include "cost.hpp"
#include "csv.hpp"
#include "data.hpp"
#include "ensembling.hpp"
#include "error.hpp"
#include "harness.hpp"
#include "metrics.hpp"
#include "random.hpp"
