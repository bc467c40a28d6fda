// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"
#include "gags/compositor.hpp"
#include "gags/config.hpp"
#include "gags/geometry.hpp"
#include "gags/image_io.hpp"
#include "gags/ingest.hpp"
#include "gags/loss.hpp"
#include "gags/metrics.hpp"
#include "gags/model.hpp"
#include "gags/optim.hpp"
#include "gags/pipeline.hpp"
#include "gags/renderer.hpp"
#include "gags/synth.hpp"
#include "gags/train.hpp"
