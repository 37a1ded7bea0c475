// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_FEMBOX_HPP
#define FEMBOX_FEMBOX_HPP

#include "fembox/adapt.hpp"
#include "fembox/bddc.hpp"
#include "fembox/common.hpp"
#include "fembox/fespace.hpp"
#include "fembox/integration.hpp"
#include "fembox/io_cli.hpp"
#include "fembox/linalg.hpp"
#include "fembox/mesh.hpp"
#include "fembox/morton.hpp"
#include "fembox/reference.hpp"

#endif  // FEMBOX_FEMBOX_HPP
