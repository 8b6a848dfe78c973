#pragma once

#include "synlm/cli.hpp"
#include "synlm/config.hpp"
#include "synlm/corpus.hpp"
#include "synlm/decoder.hpp"
#include "synlm/evaluation.hpp"
#include "synlm/model.hpp"
#include "synlm/reestimation.hpp"
#include "synlm/smoothing.hpp"
#include "synlm/transitions.hpp"
#include "synlm/tree.hpp"
#include "synlm/util.hpp"
#include "synlm/vocab.hpp"
