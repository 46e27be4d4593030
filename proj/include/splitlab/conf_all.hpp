#pragma once

// Convenience umbrella for the CLI and integration tests.

#include "splitlab/attacks.hpp"
#include "splitlab/blackbox.hpp"
#include "splitlab/checkpoint.hpp"
#include "splitlab/config.hpp"
#include "splitlab/corpus.hpp"
#include "splitlab/defenses.hpp"
#include "splitlab/harness.hpp"
#include "splitlab/image_io.hpp"
#include "splitlab/metrics.hpp"
#include "splitlab/report.hpp"
#include "splitlab/train.hpp"
#include "splitlab/wire.hpp"
#include "splitlab/zoo.hpp"
