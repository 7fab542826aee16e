"""Static grid description: substations, lines, generators, loads.

Every element endpoint (generator, load, line origin, line extremity)
belongs to exactly one substation and can sit on one of the substation's
two internal busbars.  The element order within a substation is canonical:
generators first (by generator index), then loads, then line origins,
then line extremities.  Bus-assignment vectors and substation bitmasks
index elements in this order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class TopologyError(ValueError):
    """Raised for an inconsistent or infeasible grid description."""


@dataclass(frozen=True)
class Line:
    from_sub: int
    to_sub: int
    susceptance: float  # per-unit, > 0
    thermal_limit: float  # MW, > 0


@dataclass(frozen=True)
class Generator:
    substation: int
    p_max: float  # MW


# Element kinds, in canonical within-substation order.
GEN = "gen"
LOAD = "load"
LINE_OR = "line_or"
LINE_EX = "line_ex"


@dataclass(frozen=True)
class Element:
    kind: str  # GEN | LOAD | LINE_OR | LINE_EX
    ref: int  # generator / load / line index


@dataclass
class GridTopology:
    name: str
    n_substations: int
    lines: list[Line]
    generators: list[Generator]
    loads: list[int]  # substation id per load

    # Derived in __post_init__.
    substation_elements: list[list[Element]] = field(default_factory=list, repr=False)
    element_offsets: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._validate()
        self._build_elements()

    # -- validation ------------------------------------------------------

    def _validate(self):
        n = self.n_substations
        if n < 1:
            raise TopologyError("topology needs at least one substation")
        for i, ln in enumerate(self.lines):
            if not (0 <= ln.from_sub < n) or not (0 <= ln.to_sub < n):
                raise TopologyError(f"line {i} references unknown substation")
            if ln.from_sub == ln.to_sub:
                raise TopologyError(f"line {i} connects substation {ln.from_sub} to itself")
            if ln.susceptance <= 0:
                raise TopologyError(f"line {i} has non-positive susceptance")
            if ln.thermal_limit <= 0:
                raise TopologyError(f"line {i} has non-positive thermal limit")
        for i, g in enumerate(self.generators):
            if not (0 <= g.substation < n):
                raise TopologyError(f"generator {i} references unknown substation")
            if g.p_max <= 0:
                raise TopologyError(f"generator {i} has non-positive p_max")
        for i, s in enumerate(self.loads):
            if not (0 <= s < n):
                raise TopologyError(f"load {i} references unknown substation")
        if n > 1 and not self._connected():
            raise TopologyError("line graph over substations is not connected")

    def _connected(self) -> bool:
        parent = list(range(self.n_substations))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for ln in self.lines:
            ra, rb = find(ln.from_sub), find(ln.to_sub)
            if ra != rb:
                parent[ra] = rb
        root = find(0)
        return all(find(s) == root for s in range(self.n_substations))

    # -- canonical element layout ----------------------------------------

    def _build_elements(self):
        per_sub: list[list[Element]] = [[] for _ in range(self.n_substations)]
        for i, g in enumerate(self.generators):
            per_sub[g.substation].append(Element(GEN, i))
        for i, s in enumerate(self.loads):
            per_sub[s].append(Element(LOAD, i))
        for i, ln in enumerate(self.lines):
            per_sub[ln.from_sub].append(Element(LINE_OR, i))
        for i, ln in enumerate(self.lines):
            per_sub[ln.to_sub].append(Element(LINE_EX, i))
        offsets, total = [], 0
        for s in range(self.n_substations):
            offsets.append(total)
            total += len(per_sub[s])
        object.__setattr__(self, "substation_elements", per_sub)
        object.__setattr__(self, "element_offsets", offsets)
        # Reverse lookup: (kind, ref) -> global element index.
        lookup = {}
        for s in range(self.n_substations):
            for j, el in enumerate(per_sub[s]):
                lookup[(el.kind, el.ref)] = offsets[s] + j
        self._element_index = lookup

    # -- queries -----------------------------------------------------------

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    @property
    def n_loads(self) -> int:
        return len(self.loads)

    @property
    def n_elements(self) -> int:
        return sum(len(e) for e in self.substation_elements)

    def substation_size(self, sub: int) -> int:
        return len(self.substation_elements[sub])

    def element_index(self, kind: str, ref: int) -> int:
        """Global index of an element endpoint in the bus-assignment vector."""
        return self._element_index[(kind, ref)]

    def gen_element(self, gen_id: int) -> int:
        return self.element_index(GEN, gen_id)

    def load_element(self, load_id: int) -> int:
        return self.element_index(LOAD, load_id)

    def line_or_element(self, line_id: int) -> int:
        return self.element_index(LINE_OR, line_id)

    def line_ex_element(self, line_id: int) -> int:
        return self.element_index(LINE_EX, line_id)

    def lines_at(self, sub: int) -> list[int]:
        """Line ids with an endpoint at this substation, ascending."""
        seen = []
        for el in self.substation_elements[sub]:
            if el.kind in (LINE_OR, LINE_EX) and el.ref not in seen:
                seen.append(el.ref)
        return sorted(seen)

    def line_end_element(self, line_id: int, sub: int) -> int:
        """Global element index of the given line's endpoint at `sub`."""
        ln = self.lines[line_id]
        if ln.from_sub == sub:
            return self.line_or_element(line_id)
        if ln.to_sub == sub:
            return self.line_ex_element(line_id)
        raise KeyError(f"line {line_id} has no endpoint at substation {sub}")

    def total_p_max(self) -> float:
        return sum(g.p_max for g in self.generators)


@dataclass
class TopologySpec:
    """Plain description used to build and (de)serialize topologies."""

    name: str
    n_substations: int
    lines: list[tuple[int, int, float, float]]  # (from, to, susceptance, limit)
    generators: list[tuple[int, float]]  # (substation, p_max)
    loads: list[int]  # substation per load


def build_topology(spec: TopologySpec) -> GridTopology:
    return GridTopology(
        name=spec.name,
        n_substations=spec.n_substations,
        lines=[Line(*ln) for ln in spec.lines],
        generators=[Generator(*g) for g in spec.generators],
        loads=list(spec.loads),
    )


# -- text format -----------------------------------------------------------
#
# One directive per line:
#   name: <id>
#   substations: <count>
#   line <from> <to> <susceptance> <thermal_limit>
#   gen <substation> <p_max>
#   load <substation>
# '#' starts a comment.

def topology_to_text(topo: GridTopology) -> str:
    out = [f"# gridcoach topology v1", f"name: {topo.name}",
           f"substations: {topo.n_substations}"]
    for ln in topo.lines:
        out.append(f"line {ln.from_sub} {ln.to_sub} {ln.susceptance:.6g} {ln.thermal_limit:.6g}")
    for g in topo.generators:
        out.append(f"gen {g.substation} {g.p_max:.6g}")
    for s in topo.loads:
        out.append(f"load {s}")
    return "\n".join(out) + "\n"


def parse_topology_text(text: str) -> GridTopology:
    name, n_sub = None, None
    lines, gens, loads = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = re.match(r"name:\s*(\S+)$", stripped)
        if m:
            name = m.group(1)
            continue
        m = re.match(r"substations:\s*(\d+)$", stripped)
        if m:
            n_sub = int(m.group(1))
            continue
        parts = stripped.split()
        try:
            if parts[0] == "line" and len(parts) == 5:
                lines.append((int(parts[1]), int(parts[2]), float(parts[3]), float(parts[4])))
            elif parts[0] == "gen" and len(parts) == 3:
                gens.append((int(parts[1]), float(parts[2])))
            elif parts[0] == "load" and len(parts) == 2:
                loads.append(int(parts[1]))
            else:
                raise ValueError
        except ValueError:
            raise TopologyError(f"unparseable topology line {lineno}: {raw!r}") from None
    if name is None or n_sub is None:
        raise TopologyError("topology text must declare 'name:' and 'substations:'")
    return build_topology(TopologySpec(name, n_sub, lines, gens, loads))


def load_topology(path) -> GridTopology:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_topology_text(fh.read())


def save_topology(topo: GridTopology, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(topology_to_text(topo))


# -- built-in grids ----------------------------------------------------------

def ring3_spec() -> TopologySpec:
    """Three substations on a ring, single generator feeding two loads."""
    return TopologySpec(
        name="ring3",
        n_substations=3,
        lines=[(0, 1, 10.0, 50.0), (1, 2, 10.0, 50.0), (2, 0, 10.0, 50.0)],
        generators=[(0, 120.0)],
        loads=[1, 2],
    )


def toy5_spec() -> TopologySpec:
    """Five-substation meshed grid used throughout the test suite.

    Sized so that the bundled daily scenarios stay feasible off-peak but
    congest the corridor into the load center at peak unless the operator
    re-routes flow by splitting a substation.
    """
    return TopologySpec(
        name="toy5",
        n_substations=5,
        lines=[
            (0, 1, 10.0, 60.0),   # 0
            (0, 2, 10.0, 42.0),   # 1
            (1, 2, 10.0, 45.0),   # 2
            (1, 3, 10.0, 45.0),   # 3
            (2, 3, 10.0, 45.0),   # 4
            (2, 4, 10.0, 40.0),   # 5
            (3, 4, 10.0, 40.0),   # 6
            (0, 3, 5.0, 50.0),    # 7
        ],
        generators=[(0, 150.0), (1, 100.0), (3, 80.0)],
        loads=[1, 2, 3, 4],
    )


def ring3() -> GridTopology:
    return build_topology(ring3_spec())


def toy5() -> GridTopology:
    return build_topology(toy5_spec())


def wcci2020_shape() -> GridTopology:
    """Medium-grid shape: 36 substations, 59 lines, 22 generators, 37 loads.

    Reproduces the aggregate element layout of the mid-west style
    competition grid (177 element endpoints, hub substation with 16
    elements) so cardinality checks run against a realistic size
    distribution.  Electrical parameters are placeholders.
    """
    n_sub = 36
    hub = 16
    lines = [(i, (i + 1) % n_sub) for i in range(n_sub)]  # ring, 36 lines
    for other in (2, 5, 8, 11, 20, 23, 26, 29, 32, 35):  # hub spokes, 10 lines
        lines.append((hub, other))
    extra = [(0, 12), (3, 15), (6, 18), (9, 21), (1, 24), (4, 27), (7, 30),
             (10, 33), (13, 25), (2, 19), (5, 22), (8, 31), (11, 34)]  # 13 lines
    lines.extend(extra)
    assert len(lines) == 59
    gens = [(hub, 200.0), (hub, 200.0)]
    gens += [((7 * i + 1) % n_sub, 150.0) for i in range(20)]  # 22 total
    loads = [hub, hub]
    loads += [s for s in ((5 * i + 3) % n_sub for i in range(n_sub)) if s != hub]  # 37 total
    return build_topology(TopologySpec(
        name="wcci2020-shape",
        n_substations=n_sub,
        lines=[(a, b, 10.0, 100.0) for a, b in lines],
        generators=gens,
        loads=loads,
    ))


BUILTIN_TOPOLOGIES = {
    "toy5": toy5,
    "ring3": ring3,
    "wcci2020-shape": wcci2020_shape,
}


def get_topology(name: str) -> GridTopology:
    try:
        return BUILTIN_TOPOLOGIES[name]()
    except KeyError:
        raise TopologyError(f"unknown built-in topology {name!r}") from None
