#pragma once

#include "sesame/ann.hpp"
#include "sesame/checkpoint.hpp"
#include "sesame/corpus.hpp"
#include "sesame/embednet.hpp"
#include "sesame/error.hpp"
#include "sesame/gnn.hpp"
#include "sesame/metrics.hpp"
#include "sesame/pipeline.hpp"
#include "sesame/random.hpp"
#include "sesame/sampler.hpp"
#include "sesame/simgraph.hpp"
#include "sesame/synth.hpp"
#include "sesame/tensor.hpp"
