// tdm.hpp
// Umbrella header for the whole toolkit.

#pragma once

#include "tdm/errors.hpp"
#include "tdm/corpus.hpp"
#include "tdm/formats.hpp"
#include "tdm/features.hpp"
#include "tdm/optim.hpp"
#include "tdm/crf.hpp"
#include "tdm/augment.hpp"
#include "tdm/eval.hpp"
#include "tdm/kg.hpp"
