// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/fusion.hpp"

#include <algorithm>
#include <map>

namespace panclust {

PanopticLabel fuse(std::span<const ClassId> sem, std::span<const std::uint32_t> cluster,
                   const ClassTaxonomy& taxonomy) {
  if (sem.size() != cluster.size())
    fail("fuse: " + std::to_string(sem.size()) + " semantic labels but " + std::to_string(cluster.size()) +
         " cluster labels");

  // classes seen per cluster, in ascending class order
  std::map<std::uint32_t, std::map<ClassId, InstanceId>> owners;
  InstanceId max_id = 0;
  for (std::size_t p = 0; p < sem.size(); ++p) {
    if (!taxonomy.valid(sem[p])) fail("fuse: class id out of range at point " + std::to_string(p));
    if (!taxonomy.is_thing(sem[p])) continue;
    owners[cluster[p]].emplace(sem[p], 0);
    max_id = std::max<InstanceId>(max_id, cluster[p] + 1);
  }

  std::vector<std::pair<ClassId, std::uint32_t>> extra;
  for (auto& [c, classes] : owners) {
    auto it = classes.begin();
    it->second = c + 1;
    for (++it; it != classes.end(); ++it) extra.emplace_back(it->first, c);
  }
  std::sort(extra.begin(), extra.end());
  for (auto [cls, c] : extra) owners[c][cls] = ++max_id;

  std::vector<ClassId> out_sem(sem.begin(), sem.end());
  std::vector<InstanceId> out_inst(sem.size(), 0);
  for (std::size_t p = 0; p < sem.size(); ++p)
    if (taxonomy.is_thing(sem[p])) out_inst[p] = owners[cluster[p]][sem[p]];
  return PanopticLabel(std::move(out_sem), std::move(out_inst), taxonomy);
}

}  // namespace panclust
