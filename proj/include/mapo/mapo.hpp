#pragma once

// Umbrella header for the engine. The live HTTP backend and the CLI are
// separate includes: mapo/live_backend.hpp, mapo/cli.hpp.

#include "mapo/artifacts.hpp"
#include "mapo/bandit.hpp"
#include "mapo/config_file.hpp"
#include "mapo/core.hpp"
#include "mapo/datasets.hpp"
#include "mapo/gateway.hpp"
#include "mapo/gradient_engine.hpp"
#include "mapo/momentum.hpp"
#include "mapo/report.hpp"
#include "mapo/scoring.hpp"
#include "mapo/search.hpp"
#include "mapo/synthetic.hpp"
#include "mapo/templates.hpp"
