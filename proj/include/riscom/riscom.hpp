#pragma once

#include "riscom/analysis.hpp"
#include "riscom/channel.hpp"
#include "riscom/codebook.hpp"
#include "riscom/config.hpp"
#include "riscom/csvfmt.hpp"
#include "riscom/detector.hpp"
#include "riscom/ris.hpp"
#include "riscom/rng.hpp"
#include "riscom/specfun.hpp"
#include "riscom/version.hpp"
