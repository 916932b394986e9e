#pragma once

#include "ellrisk/conditioning.hpp"
#include "ellrisk/distributions.hpp"
#include "ellrisk/error.hpp"
#include "ellrisk/estimation.hpp"
#include "ellrisk/measures.hpp"
#include "ellrisk/model.hpp"
#include "ellrisk/sampler.hpp"
#include "ellrisk/stress.hpp"
