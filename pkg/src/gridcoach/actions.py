"""Discrete action table over a grid topology.

Three control families plus an explicit no-op:

  * LineSwitch(l)            - toggle the service status of line l
  * LineBusSet(l, b_or, b_ex) - reassign both endpoints of line l
  * SubstationAssign(s, mask) - reassign every element of substation s;
                                bit j of the mask is the target bus of
                                the substation's j-th element

The family cardinality is N_line + 4*N_line + sum_i 2^Sub(i); the
enumerated table prepends one explicit no-op on top of that.

Advisor proposals arrive as {line_id: bus_id} maps; this module also owns
the (lossy) mapping between those maps and table actions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import GridTopology, LINE_EX, LINE_OR

NOOP = "noop"
LINE_SWITCH = "line_switch"
LINE_BUS_SET = "line_bus_set"
SUBSTATION_ASSIGN = "substation_assign"


@dataclass(frozen=True)
class Action:
    kind: str
    index: int = -1  # position in the enumerated table
    line_id: int = -1
    origin_bus: int = 0
    extremity_bus: int = 0
    substation_id: int = -1
    bitmask: int = 0

    def brief(self) -> str:
        if self.kind == NOOP:
            return "{}"
        if self.kind == LINE_SWITCH:
            return f"switch line {self.line_id}"
        if self.kind == LINE_BUS_SET:
            return f"{{{self.line_id}: {self.origin_bus}/{self.extremity_bus}}}"
        return f"substation {self.substation_id} mask {self.bitmask:b}"


def action_space_size(topology: GridTopology) -> int:
    """Cardinality of the three action families (no-op excluded)."""
    n = topology.n_lines
    return n + 4 * n + sum(2 ** topology.substation_size(s)
                           for s in range(topology.n_substations))


class ActionTable:
    """Enumerated actions for one topology, with legality masking."""

    def __init__(self, topology: GridTopology):
        self.topology = topology
        actions: list[Action] = [Action(NOOP, index=0)]
        for l in range(topology.n_lines):
            actions.append(Action(LINE_SWITCH, index=len(actions), line_id=l))
        for l in range(topology.n_lines):
            for b_or in (0, 1):
                for b_ex in (0, 1):
                    actions.append(Action(LINE_BUS_SET, index=len(actions), line_id=l,
                                          origin_bus=b_or, extremity_bus=b_ex))
        for s in range(topology.n_substations):
            for mask in range(2 ** topology.substation_size(s)):
                actions.append(Action(SUBSTATION_ASSIGN, index=len(actions),
                                      substation_id=s, bitmask=mask))
        self.actions = actions
        self._index = {self._key(a): a.index for a in actions}

        # Per-action touch arrays for fast mask computation.
        self.touched_line = np.full(len(actions), -1, dtype=np.int64)
        self.touched_sub = np.full(len(actions), -1, dtype=np.int64)
        for a in actions:
            if a.kind in (LINE_SWITCH, LINE_BUS_SET):
                self.touched_line[a.index] = a.line_id
            elif a.kind == SUBSTATION_ASSIGN:
                self.touched_sub[a.index] = a.substation_id

    @staticmethod
    def _key(a: Action):
        return (a.kind, a.line_id, a.origin_bus, a.extremity_bus,
                a.substation_id, a.bitmask)

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, index: int) -> Action:
        return self.actions[index]

    @property
    def noop(self) -> Action:
        return self.actions[0]

    def line_switch(self, line_id: int) -> Action:
        return self.actions[1 + line_id]

    def line_bus_set(self, line_id: int, b_or: int, b_ex: int) -> Action:
        base = 1 + self.topology.n_lines
        return self.actions[base + 4 * line_id + 2 * b_or + b_ex]

    def substation_assign(self, sub: int, bitmask: int) -> Action:
        key = (SUBSTATION_ASSIGN, -1, 0, 0, sub, bitmask)
        return self.actions[self._index[key]]

    def legal_mask(self, cooldown_line: np.ndarray, cooldown_sub: np.ndarray,
                   whitelist: np.ndarray | None = None) -> np.ndarray:
        """Boolean legality per table entry.  The no-op is always legal."""
        mask = np.ones(len(self.actions), dtype=bool)
        blocked_lines = np.flatnonzero(np.asarray(cooldown_line) > 0)
        for l in blocked_lines:
            mask[self.touched_line == l] = False
        blocked_subs = np.flatnonzero(np.asarray(cooldown_sub) > 0)
        for s in blocked_subs:
            mask[self.touched_sub == s] = False
        if whitelist is not None:
            allow = np.zeros(len(self.actions), dtype=bool)
            allow[whitelist] = True
            allow[0] = True
            mask &= allow
        mask[0] = True
        return mask


# -- proposal maps -----------------------------------------------------------
#
# A proposal is a {line_id: target_bus} map (possibly empty = no-op).  Maps
# with one entry move both endpoints of that line; maps with several entries
# are realized as a single substation reassignment at a substation shared by
# the listed lines, all other elements keeping their current bus.

def action_to_line_changes(action: Action, bus_assignment: np.ndarray,
                           topology: GridTopology) -> dict[int, int] | None:
    """Proposal map for an action, or None if not expressible."""
    if action.kind == NOOP:
        return {}
    if action.kind == LINE_BUS_SET:
        if action.origin_bus != action.extremity_bus:
            return None
        return {action.line_id: action.origin_bus}
    if action.kind == SUBSTATION_ASSIGN:
        sub = action.substation_id
        elements = topology.substation_elements[sub]
        offset = topology.element_offsets[sub]
        changes: dict[int, int] = {}
        for j, el in enumerate(elements):
            target = (action.bitmask >> j) & 1
            if target == int(bus_assignment[offset + j]):
                continue
            if el.kind not in (LINE_OR, LINE_EX):
                return None  # moves a generator or load: not expressible
            if el.ref in changes and changes[el.ref] != target:
                return None
            changes[el.ref] = target
        if len(changes) < 2:
            # Empty maps alias the no-op and single-line maps alias
            # LineBusSet; neither round-trips back to this action.
            return None
        return changes
    return None  # line switches have no bus-map form


def line_changes_to_action(changes: dict[int, int], bus_assignment: np.ndarray,
                           table: ActionTable,
                           legal_mask: np.ndarray | None = None) -> Action | None:
    """Resolve a proposal map to the nearest legal table action.

    Single-entry maps become LineBusSet on both endpoints.  Multi-entry
    maps become one SubstationAssign at the lowest-id substation touching
    all listed lines; if no substation covers every line, the substation
    covering the most listed lines wins (greedy decomposition).  Returns
    None when no legal realization exists.
    """
    topo = table.topology

    def ok(a: Action) -> bool:
        return legal_mask is None or bool(legal_mask[a.index])

    if not changes:
        return table.noop
    for line_id, bus in changes.items():
        if not (0 <= line_id < topo.n_lines):
            raise KeyError(f"unknown line id {line_id}")
        if bus not in (0, 1):
            raise ValueError(f"bus value {bus} for line {line_id} not in {{0,1}}")
    if len(changes) == 1:
        (line_id, bus), = changes.items()
        a = table.line_bus_set(line_id, bus, bus)
        return a if ok(a) else None

    # Rank substations by how many listed lines they touch.
    coverage = []
    for s in range(topo.n_substations):
        at_s = set(topo.lines_at(s))
        covered = [l for l in sorted(changes) if l in at_s]
        if covered:
            coverage.append((-len(covered), s, covered))
    coverage.sort()
    for _, s, covered in coverage:
        offset = topo.element_offsets[s]
        mask = 0
        for j in range(topo.substation_size(s)):
            mask |= int(bus_assignment[offset + j]) << j
        for l in covered:
            el = topo.line_end_element(l, s)
            j = el - offset
            mask = (mask & ~(1 << j)) | (changes[l] << j)
        a = table.substation_assign(s, mask)
        if ok(a):
            return a
    # Fall back to moving a single listed line.
    for line_id in sorted(changes):
        a = table.line_bus_set(line_id, changes[line_id], changes[line_id])
        if ok(a):
            return a
    return None


def enumerate_proposals(table: ActionTable, bus_assignment: np.ndarray,
                        legal_mask: np.ndarray) -> list[tuple[dict[int, int], Action]]:
    """All legal actions expressible as proposal maps that round-trip.

    This is the advisor's effective search space: every returned map
    resolves back to exactly the action it was derived from.
    """
    out = []
    for a in table.actions:
        if not legal_mask[a.index]:
            continue
        m = action_to_line_changes(a, bus_assignment, table.topology)
        if m is None:
            continue
        resolved = line_changes_to_action(m, bus_assignment, table, legal_mask)
        if resolved is not None and resolved.index == a.index:
            out.append((m, a))
    return out


def format_line_changes(changes: dict[int, int]) -> str:
    """Render a proposal map exactly as the response grammar expects."""
    if not changes:
        return "{}"
    inner = ", ".join(f"{l}: {changes[l]}" for l in sorted(changes))
    return "{" + inner + "}"
