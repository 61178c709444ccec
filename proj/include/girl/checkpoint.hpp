#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "girl/ndarray.hpp"

namespace girl {

// Parameter checkpoint: little-endian binary, header (magic "GIRL",
// version u32, tensor count u32), then per tensor: name length u32,
// UTF-8 name, rank u32, extents u32 each, raw f32 data.
inline constexpr char kCheckpointMagic[4] = {'G', 'I', 'R', 'L'};
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const NdArray*>>&
                         tensors);

std::map<std::string, NdArray> load_checkpoint(const std::string& path);

// Copies checkpoint contents into existing tensors; every destination name
// must be present with a matching shape.
void restore_tensors(
    const std::map<std::string, NdArray>& loaded,
    const std::vector<std::pair<std::string, NdArray*>>& dests);

}  // namespace girl
