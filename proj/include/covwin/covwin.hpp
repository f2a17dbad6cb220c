#pragma once

#include "covwin/adaptive_window.hpp"
#include "covwin/baseline_window.hpp"
#include "covwin/bench.hpp"
#include "covwin/driftgen.hpp"
#include "covwin/event.hpp"
#include "covwin/pipeline.hpp"
#include "covwin/replay.hpp"
#include "covwin/species_stats.hpp"
#include "covwin/species_view.hpp"
#include "covwin/tcp_server.hpp"
#include "covwin/threshold.hpp"
#include "covwin/window_record.hpp"
#include "covwin/wire_format.hpp"
