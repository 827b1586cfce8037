#pragma once

#include <span>
#include <string_view>

namespace whisker {

/// Shown while ephemeral keys are generated.
std::span<const std::string_view> cat_facts();

}  // namespace whisker
