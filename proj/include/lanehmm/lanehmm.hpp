#pragma once

#include "lanehmm/baseline.hpp"
#include "lanehmm/brute_force.hpp"
#include "lanehmm/error.hpp"
#include "lanehmm/geodesy.hpp"
#include "lanehmm/hmm_prob.hpp"
#include "lanehmm/io.hpp"
#include "lanehmm/lanemap.hpp"
#include "lanehmm/metrics.hpp"
#include "lanehmm/normal.hpp"
#include "lanehmm/pipeline.hpp"
#include "lanehmm/simulate.hpp"
#include "lanehmm/statespace.hpp"
#include "lanehmm/viterbi.hpp"
#include "lanehmm/window.hpp"
