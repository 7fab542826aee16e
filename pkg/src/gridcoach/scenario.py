"""Episode scenarios: per-step load and scheduled-generation series.

A scenario is a daily load sinusoid with seeded noise, dispatched
proportionally to generator capacity with a reserve margin so every row is
feasible (total scheduled generation >= total load).  Files are plain text
with a small header and one row of MW values per step; column order is
load_0..load_{n-1} then gen_0..gen_{m-1}.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .topology import GridTopology


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    id: str
    horizon: int
    load_series: np.ndarray  # (horizon, n_loads) MW
    gen_series: np.ndarray  # (horizon, n_gens) MW, scheduled availability
    seed: int
    opponent_enabled: bool = False
    start: tuple[int, int, int, int, int] = (2012, 1, 9, 0, 0)  # y m d h min

    def __post_init__(self):
        self.load_series = np.asarray(self.load_series, dtype=float)
        self.gen_series = np.asarray(self.gen_series, dtype=float)
        if self.horizon < 1:
            raise ScenarioError("horizon must be >= 1")
        if self.load_series.shape[0] != self.horizon or self.gen_series.shape[0] != self.horizon:
            raise ScenarioError("series length must equal horizon")
        if (self.load_series < 0).any() or (self.gen_series < 0).any():
            raise ScenarioError("series entries must be non-negative")

    @property
    def n_loads(self) -> int:
        return self.load_series.shape[1]

    @property
    def n_gens(self) -> int:
        return self.gen_series.shape[1]


@dataclass
class ScenarioProfile:
    """Knobs for the synthetic daily curve."""

    base_fraction: float = 0.42  # mean total load as a fraction of fleet p_max
    amplitude: float = 0.28  # daily swing around the mean
    margin: float = 0.06  # scheduled reserve above load
    noise: float = 0.01  # multiplicative per-load noise (sigma)
    peak_minute: int = 17 * 60
    load_weights: tuple[float, ...] | None = None  # per-load share, defaults uniform


# Per-topology defaults; the toy5 numbers are tuned so the bundled daily
# curve congests the grid at peak unless the operator re-routes flow.
PROFILES: dict[str, ScenarioProfile] = {
    "toy5": ScenarioProfile(),
    "ring3": ScenarioProfile(base_fraction=0.35, amplitude=0.2),
}


def make_scenario(topology: GridTopology, horizon: int, seed: int,
                  scenario_id: str | None = None,
                  profile: ScenarioProfile | None = None,
                  opponent_enabled: bool = False,
                  step_minutes: int = 5) -> Scenario:
    if horizon < 1:
        raise ScenarioError("horizon must be >= 1")
    profile = profile or PROFILES.get(topology.name, ScenarioProfile())
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_loads, n_gens = topology.n_loads, topology.n_generators
    p_total = topology.total_p_max()
    weights = np.asarray(profile.load_weights if profile.load_weights is not None
                         else [1.0 / n_loads] * n_loads, dtype=float)
    if weights.shape != (n_loads,) or not math.isclose(float(weights.sum()), 1.0, rel_tol=1e-9):
        raise ScenarioError("load weights must be one share per load summing to 1")

    start = (2012, 1, 9, 0, 0)
    base_total = profile.base_fraction * p_total
    minute0 = start[3] * 60 + start[4]
    t = np.arange(horizon)
    minute = (minute0 + t * step_minutes) % 1440
    bump = np.cos(2 * math.pi * (minute - profile.peak_minute) / 1440.0)
    total = base_total * (1.0 + profile.amplitude * bump)

    per_load_noise = 1.0 + profile.noise * np.clip(rng.standard_normal((horizon, n_loads)), -3, 3)
    load_series = total[:, None] * weights[None, :] * per_load_noise

    margin_noise = profile.margin + 0.01 * np.abs(np.clip(rng.standard_normal(horizon), -3, 3))
    avail_total = load_series.sum(axis=1) * (1.0 + margin_noise)
    cap = np.array([g.p_max for g in topology.generators])
    gen_series = avail_total[:, None] * (cap / cap.sum())[None, :]
    if (gen_series > cap[None, :] + 1e-9).any():
        raise ScenarioError("profile over-drives the fleet: scheduled output above p_max")

    return Scenario(
        id=scenario_id or f"{topology.name}-s{seed:05d}",
        horizon=horizon,
        load_series=load_series,
        gen_series=gen_series,
        seed=seed,
        opponent_enabled=opponent_enabled,
        start=start,
    )


def gen_scenarios(topology: GridTopology, count: int, horizon: int, seed: int,
                  out_dir: str | os.PathLike | None = None,
                  profile: ScenarioProfile | None = None,
                  opponent_enabled: bool = False) -> list:
    """Synthesize `count` scenarios; write one file each when out_dir is set.

    Returns the scenarios, or the written file paths when out_dir is given.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    scenarios = []
    for k, child in enumerate(children):
        child_seed = int(child.generate_state(1)[0] % (2 ** 31))
        scenarios.append(make_scenario(
            topology, horizon, child_seed,
            scenario_id=f"{topology.name}-s{seed:05d}-{k:03d}",
            profile=profile, opponent_enabled=opponent_enabled))
    if out_dir is None:
        return scenarios
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for sc in scenarios:
        path = os.path.join(out_dir, f"{sc.id}.scenario")
        save_scenario(sc, path)
        paths.append(path)
    return paths


# -- text format -------------------------------------------------------------

def scenario_to_text(sc: Scenario) -> str:
    n_l, n_g = sc.n_loads, sc.n_gens
    cols = [f"load_{i}" for i in range(n_l)] + [f"gen_{i}" for i in range(n_g)]
    head = [
        "# gridcoach scenario v1",
        f"id: {sc.id}",
        f"horizon: {sc.horizon}",
        f"seed: {sc.seed}",
        f"opponent: {int(sc.opponent_enabled)}",
        "start: {0:04d}-{1:02d}-{2:02d} {3:02d}:{4:02d}".format(*sc.start),
        f"loads: {n_l}",
        f"gens: {n_g}",
        "columns: " + " ".join(cols),
    ]
    rows = []
    for i in range(sc.horizon):
        vals = list(sc.load_series[i]) + list(sc.gen_series[i])
        rows.append(" ".join(f"{v:.6f}" for v in vals))
    return "\n".join(head + rows) + "\n"


def parse_scenario_text(text: str) -> Scenario:
    meta: dict[str, str] = {}
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" in line and not line[0].isdigit():
            key, _, value = line.partition(":")
            meta[key.strip()] = value.strip()
        else:
            rows.append([float(v) for v in line.split()])
    try:
        horizon = int(meta["horizon"])
        n_l, n_g = int(meta["loads"]), int(meta["gens"])
        y, mo, rest = meta["start"].split("-")
        d, hm = rest.split()
        h, mi = hm.split(":")
        start = (int(y), int(mo), int(d), int(h), int(mi))
        if any(len(r) != n_l + n_g for r in rows):
            raise ScenarioError("row width does not match declared loads/gens")
        return Scenario(
            id=meta["id"],
            horizon=horizon,
            load_series=np.array([r[:n_l] for r in rows]),
            gen_series=np.array([r[n_l:] for r in rows]),
            seed=int(meta["seed"]),
            opponent_enabled=bool(int(meta.get("opponent", "0"))),
            start=start,
        )
    except (KeyError, ValueError, IndexError) as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from None


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_text(fh.read())


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scenario_to_text(sc))
