// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "rasp_forge/compiler/compiler.hpp"

namespace rasp_forge::compiler {

namespace {

// Smallest slot with the requested parity that is strictly above `after`.
int next_slot(int after, bool attention) {
  int slot = after + 1;
  if ((slot % 2 == 0) != attention) ++slot;
  return slot;
}

}  // namespace

Allocation allocate_layers(const CompGraph& graph) {
  const Program& p = graph.program;
  Allocation alloc;
  auto slot_of = [&](SOpId id) {
    auto it = alloc.slot.find(id.index);
    return it == alloc.slot.end() ? -1 : it->second;
  };
  int max_slot = -1;
  for (const auto& gn : graph.nodes) {
    const auto* id = std::get_if<SOpId>(&gn.ref);
    if (!id) continue;
    const SOpNode& node = p.sop(*id);
    int after = -1;
    for (SOpId op : node.operands) after = std::max(after, slot_of(op));
    if (node.selector) {
      const SelectorNode& sel = p.selector(*node.selector);
      after = std::max({after, slot_of(sel.keys), slot_of(sel.queries)});
    }
    switch (node.kind) {
      case SOpKind::tokens:
      case SOpKind::indices:
      case SOpKind::constant:
        continue;
      case SOpKind::map:
      case SOpKind::sequence_map:
        alloc.slot[id->index] = next_slot(after, false);
        break;
      case SOpKind::aggregate:
        alloc.slot[id->index] = next_slot(after, true);
        break;
      case SOpKind::selector_width: {
        const int head = next_slot(after, true);
        alloc.attention_slot[id->index] = head;
        alloc.slot[id->index] = head + 1;
        break;
      }
    }
    max_slot = std::max(max_slot, alloc.slot[id->index]);
  }
  const int blocks = (max_slot + 2) / 2;  // ceil((max_slot + 1) / 2)
  alloc.num_slots = 2 * blocks;
  return alloc;
}

}  // namespace rasp_forge::compiler
