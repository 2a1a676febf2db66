// Umbrella header.
#pragma once

#include "fairdcov/core.hpp"
#include "fairdcov/dcov.hpp"
#include "fairdcov/fairness.hpp"
#include "fairdcov/scoring.hpp"
#include "fairdcov/network.hpp"
#include "fairdcov/objective.hpp"
#include "fairdcov/optimizer.hpp"
#include "fairdcov/train.hpp"
#include "fairdcov/checkpoint.hpp"
#include "fairdcov/table.hpp"
#include "fairdcov/preprocess.hpp"
#include "fairdcov/split.hpp"
#include "fairdcov/synthetic.hpp"
#include "fairdcov/search.hpp"
#include "fairdcov/evaluate.hpp"
#include "fairdcov/figures.hpp"
#include "fairdcov/commands.hpp"
