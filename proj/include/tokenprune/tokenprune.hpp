// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "tokenprune/chair.hpp"
#include "tokenprune/complexity.hpp"
#include "tokenprune/core.hpp"
#include "tokenprune/dataio.hpp"
#include "tokenprune/error.hpp"
#include "tokenprune/harness.hpp"
#include "tokenprune/selectors.hpp"
