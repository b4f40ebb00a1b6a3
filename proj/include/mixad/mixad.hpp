// Everything in one include.

#pragma once

#include "mixad/autodiff.hpp"
#include "mixad/benchmark.hpp"
#include "mixad/concurrency.hpp"
#include "mixad/dataset.hpp"
#include "mixad/em.hpp"
#include "mixad/io.hpp"
#include "mixad/metrics.hpp"
#include "mixad/mixture.hpp"
#include "mixad/model_select.hpp"
#include "mixad/optimize.hpp"
#include "mixad/penalty.hpp"
#include "mixad/report.hpp"
#include "mixad/simulate.hpp"
