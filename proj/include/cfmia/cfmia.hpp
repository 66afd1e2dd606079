// Copyright 2026 The cfmia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "cfmia/attack.hpp"
#include "cfmia/common.hpp"
#include "cfmia/config.hpp"
#include "cfmia/cost.hpp"
#include "cfmia/data.hpp"
#include "cfmia/metrics.hpp"
#include "cfmia/model_io.hpp"
#include "cfmia/nn.hpp"
#include "cfmia/privacy.hpp"
#include "cfmia/recourse.hpp"
#include "cfmia/runner.hpp"
#include "cfmia/stats.hpp"
#include "cfmia/vae.hpp"
