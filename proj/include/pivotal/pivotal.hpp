#pragma once
#include <pivotal/core/dataset.hpp>
#include <pivotal/core/error.hpp>
#include <pivotal/core/matrix.hpp>
#include <pivotal/core/parallel.hpp>
#include <pivotal/core/serialize.hpp>
#include <pivotal/core/svd.hpp>
#include <pivotal/diagnostics.hpp>
#include <pivotal/estimators.hpp>
#include <pivotal/experiments.hpp>
#include <pivotal/io.hpp>
#include <pivotal/random.hpp>
#include <pivotal/simulate.hpp>
#include <pivotal/smoothing.hpp>
