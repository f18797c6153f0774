#pragma once

#include "protosynth/analyze.hpp"
#include "protosynth/baselines.hpp"
#include "protosynth/bench.hpp"
#include "protosynth/codec.hpp"
#include "protosynth/corpus.hpp"
#include "protosynth/dataset.hpp"
#include "protosynth/dependency.hpp"
#include "protosynth/domain.hpp"
#include "protosynth/engine.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/graph.hpp"
#include "protosynth/message.hpp"
#include "protosynth/pattern.hpp"
#include "protosynth/quality.hpp"
#include "protosynth/random.hpp"
#include "protosynth/registry.hpp"
#include "protosynth/schema.hpp"
#include "protosynth/sink.hpp"
#include "protosynth/stats.hpp"
#include "protosynth/walk.hpp"
#include "protosynth/wire.hpp"
