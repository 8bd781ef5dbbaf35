#pragma once

#include "emoclim/adamw.hpp"
#include "emoclim/bytes.hpp"
#include "emoclim/checkpoint.hpp"
#include "emoclim/embedding.hpp"
#include "emoclim/emotion.hpp"
#include "emoclim/error.hpp"
#include "emoclim/feature_file.hpp"
#include "emoclim/gradcheck.hpp"
#include "emoclim/gradcheck_suite.hpp"
#include "emoclim/layers.hpp"
#include "emoclim/log.hpp"
#include "emoclim/losses.hpp"
#include "emoclim/metrics.hpp"
#include "emoclim/model.hpp"
#include "emoclim/probe.hpp"
#include "emoclim/probe_data.hpp"
#include "emoclim/retrieval.hpp"
#include "emoclim/run_config.hpp"
#include "emoclim/rng.hpp"
#include "emoclim/sampler.hpp"
#include "emoclim/split.hpp"
#include "emoclim/synthetic.hpp"
#include "emoclim/tag_file.hpp"
#include "emoclim/tensor.hpp"
#include "emoclim/training.hpp"
