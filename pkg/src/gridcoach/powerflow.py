"""Linearized (DC) power flow over the split-bus electrical graph.

Each substation contributes up to two electrical nodes (busbar 0 and 1);
an element sits on the node selected by its bus assignment and a line
connects the nodes chosen by its two endpoints.  Flows follow the DC
approximation

    flow = susceptance * (theta_from - theta_to),   B @ theta = P

solved independently on every connected island with one slack angle
pinned per island.  Injections must balance island by island; the
environment takes care of that before calling in here.
"""

from __future__ import annotations

import numpy as np

from .topology import GridTopology


class PowerFlowError(RuntimeError):
    """Unbalanced island, stranded injection, or singular system."""


def node_of(sub: int, bus: int) -> int:
    return 2 * sub + bus


def gen_nodes(topology: GridTopology, bus_assignment: np.ndarray) -> np.ndarray:
    return np.array([node_of(g.substation, int(bus_assignment[topology.gen_element(i)]))
                     for i, g in enumerate(topology.generators)], dtype=np.int64)


def load_nodes(topology: GridTopology, bus_assignment: np.ndarray) -> np.ndarray:
    return np.array([node_of(s, int(bus_assignment[topology.load_element(i)]))
                     for i, s in enumerate(topology.loads)], dtype=np.int64)


def line_end_nodes(topology: GridTopology, bus_assignment: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    origin = np.array([node_of(ln.from_sub, int(bus_assignment[topology.line_or_element(i)]))
                       for i, ln in enumerate(topology.lines)], dtype=np.int64)
    extremity = np.array([node_of(ln.to_sub, int(bus_assignment[topology.line_ex_element(i)]))
                          for i, ln in enumerate(topology.lines)], dtype=np.int64)
    return origin, extremity


def find_islands(topology: GridTopology, bus_assignment: np.ndarray,
                 line_status: np.ndarray) -> list[list[int]]:
    """Connected components over nodes that host anything.

    Nodes enter the graph when they carry a generator, a load, or an
    endpoint of an in-service line; isolated element nodes form their own
    single-node islands.
    """
    parent: dict[int, int] = {}

    def add(n):
        parent.setdefault(n, n)

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for n in gen_nodes(topology, bus_assignment):
        add(int(n))
    for n in load_nodes(topology, bus_assignment):
        add(int(n))
    origin, extremity = line_end_nodes(topology, bus_assignment)
    for l in range(topology.n_lines):
        if line_status[l]:
            add(int(origin[l]))
            add(int(extremity[l]))
            union(int(origin[l]), int(extremity[l]))
    groups: dict[int, list[int]] = {}
    for n in parent:
        groups.setdefault(find(n), []).append(n)
    return [sorted(g) for g in sorted(groups.values())]


def dc_power_flow(topology: GridTopology, bus_assignment: np.ndarray,
                  line_status: np.ndarray, injections: np.ndarray,
                  balance_tol: float = 1e-6) -> np.ndarray:
    """Per-line MW flows for the given injections (indexed by node id).

    Raises PowerFlowError when an island's injections do not sum to zero,
    when a node outside any island carries injection, or when the reduced
    susceptance system is singular.
    """
    injections = np.asarray(injections, dtype=float)
    n_lines = topology.n_lines
    flows = np.zeros(n_lines)
    origin, extremity = line_end_nodes(topology, bus_assignment)
    islands = find_islands(topology, bus_assignment, line_status)
    covered = set()
    for island in islands:
        covered.update(island)
    stray = [n for n in np.flatnonzero(np.abs(injections) > balance_tol)
             if int(n) not in covered]
    if stray:
        raise PowerFlowError(f"injection at disconnected node(s) {stray}")

    for island in islands:
        imbalance = float(sum(injections[n] for n in island))
        if abs(imbalance) > balance_tol:
            raise PowerFlowError(
                f"island {island} injections sum to {imbalance:.3g} MW, not zero")
        if len(island) == 1:
            continue
        index = {n: i for i, n in enumerate(island)}
        k = len(island)
        b_mat = np.zeros((k, k))
        member_lines = []
        for l in range(n_lines):
            if not line_status[l]:
                continue
            i = index.get(int(origin[l]))
            j = index.get(int(extremity[l]))
            if i is None or j is None:
                continue
            b = topology.lines[l].susceptance
            b_mat[i, i] += b
            b_mat[j, j] += b
            b_mat[i, j] -= b
            b_mat[j, i] -= b
            member_lines.append(l)
        p = np.array([injections[n] for n in island])
        # Pin the first node's angle to zero and solve the reduced system.
        try:
            theta_red = np.linalg.solve(b_mat[1:, 1:], p[1:])
        except np.linalg.LinAlgError:
            raise PowerFlowError("singular reduced susceptance matrix") from None
        theta = np.concatenate(([0.0], theta_red))
        for l in member_lines:
            b = topology.lines[l].susceptance
            flows[l] = b * (theta[index[int(origin[l])]] - theta[index[int(extremity[l])]])
    return flows
