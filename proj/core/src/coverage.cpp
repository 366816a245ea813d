// SPDX-License-Identifier: Apache-2.0
#include "meshfuzz/coverage.hpp"

// Header-only; this translation unit anchors the target in the build.
