#pragma once

#include "bbt/corpus.hpp"
#include "bbt/error.hpp"
#include "bbt/mbr.hpp"
#include "bbt/metrics.hpp"
#include "bbt/params.hpp"
#include "bbt/schedule.hpp"
#include "bbt/text.hpp"
#include "bbt/toytrain.hpp"

namespace bbt {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace bbt
