#pragma once

#include <cstdint>
#include <string>

namespace oneq {

using NodeId = std::string;

/// Identifier of an entangled resource. Never reused within one run.
enum class ResourceId : std::uint64_t {};

inline std::string to_string(ResourceId id) {
    return "r" + std::to_string(static_cast<std::uint64_t>(id));
}

class IdAllocator {
public:
    ResourceId next() { return ResourceId{++last_}; }
    std::uint64_t issued() const { return last_; }

private:
    std::uint64_t last_ = 0;
};

}  // namespace oneq
