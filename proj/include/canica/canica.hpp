/******************************************************************************
 * Copyright 2026 The CanICA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/

#pragma once

#include "canica/config.hpp"
#include "canica/data_model.hpp"
#include "canica/error.hpp"
#include "canica/group_level.hpp"
#include "canica/linalg.hpp"
#include "canica/map_thresholding.hpp"
#include "canica/matrix_io.hpp"
#include "canica/parallel.hpp"
#include "canica/pipeline.hpp"
#include "canica/random.hpp"
#include "canica/report.hpp"
#include "canica/reproducibility.hpp"
#include "canica/simulate.hpp"
#include "canica/source_separation.hpp"
#include "canica/split_half.hpp"
#include "canica/subject_level.hpp"
