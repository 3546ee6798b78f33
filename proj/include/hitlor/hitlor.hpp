#pragma once

#include "hitlor/error.hpp"
#include "hitlor/rng.hpp"
#include "hitlor/geometry.hpp"
#include "hitlor/feature_store.hpp"
#include "hitlor/representation.hpp"
#include "hitlor/svm.hpp"
#include "hitlor/classifier.hpp"
#include "hitlor/evaluation.hpp"
#include "hitlor/active_loop.hpp"
#include "hitlor/bench.hpp"
#include "hitlor/synthetic.hpp"
#include "hitlor/service.hpp"
