#pragma once

#include "error.hpp"
#include "random.hpp"
#include "event_model.hpp"
#include "ingest.hpp"
#include "selection.hpp"
#include "render.hpp"
#include "png.hpp"
#include "dataset.hpp"
#include "baseline_nn.hpp"
#include "metrics.hpp"
#include "synth.hpp"
#include "pipeline.hpp"
