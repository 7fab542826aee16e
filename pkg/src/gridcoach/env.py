"""Grid operation environment: observation, action, reward, termination.

Dynamics per step: decrement cooldowns, apply the chosen action (illegal
actions degrade to a no-op), advance the load/generation series, let the
opponent strike, re-solve the DC power flow, and account line overloads.
A line above its thermal limit for `overflow_disconnect_steps` consecutive
steps trips and enters cooldown.  Episodes end on islanded load, demand
above scheduled production, or series exhaustion.

`step` is a pure function of (state, action, episode seed): the opponent's
randomness is derived from the episode seed and the timestep, so replaying
a step reproduces it bit for bit.  `simulate` runs the same dynamics with
the opponent disabled and never touches the live episode.
"""

from __future__ import annotations

import datetime
import hashlib
from dataclasses import dataclass

import numpy as np

from . import powerflow
from .actions import Action, ActionTable, LINE_BUS_SET, LINE_SWITCH, NOOP, SUBSTATION_ASSIGN
from .scenario import Scenario
from .topology import GridTopology


class EnvError(RuntimeError):
    pass


@dataclass
class EnvConfig:
    overflow_disconnect_steps: int = 3  # consecutive overloaded steps before a trip
    cooldown_steps: int = 3
    lambda_fail: float = 1.0
    overload_rho: float = 1.0
    opponent_attack_prob: float = 0.05
    opponent_top_k: int = 3
    step_minutes: int = 5
    balance_tol: float = 1e-6
    action_whitelist: tuple[int, ...] | None = None  # restrict the table for toy problems


@dataclass
class GridState:
    timestep: int
    clock: tuple[int, int, int, int, int, int]  # year, month, day, hour, minute, weekday
    load_mw: np.ndarray  # per load: demand
    gen_mw: np.ndarray  # per generator: scheduled availability
    flow_mw: np.ndarray  # per line
    rho: np.ndarray  # per line, |flow| / thermal limit
    bus_assignment: np.ndarray  # int8 per element endpoint
    line_status: np.ndarray  # bool per line
    overflow_steps: np.ndarray  # int per line
    cooldown_line: np.ndarray  # int per line
    cooldown_sub: np.ndarray  # int per substation
    time_next_maintenance: np.ndarray  # constant -1 (never; maintenance is stubbed)
    duration_next_maintenance: np.ndarray  # constant 0

    def copy(self) -> "GridState":
        return GridState(
            timestep=self.timestep,
            clock=self.clock,
            load_mw=self.load_mw.copy(),
            gen_mw=self.gen_mw.copy(),
            flow_mw=self.flow_mw.copy(),
            rho=self.rho.copy(),
            bus_assignment=self.bus_assignment.copy(),
            line_status=self.line_status.copy(),
            overflow_steps=self.overflow_steps.copy(),
            cooldown_line=self.cooldown_line.copy(),
            cooldown_sub=self.cooldown_sub.copy(),
            time_next_maintenance=self.time_next_maintenance.copy(),
            duration_next_maintenance=self.duration_next_maintenance.copy(),
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(str((self.timestep, self.clock)).encode())
        for arr in (self.load_mw, self.gen_mw, self.flow_mw, self.rho,
                    self.bus_assignment, self.line_status, self.overflow_steps,
                    self.cooldown_line, self.cooldown_sub,
                    self.time_next_maintenance, self.duration_next_maintenance):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def reward(state: GridState, failed: bool, lambda_fail: float = 1.0) -> float:
    """Efficiency ratio while the grid holds, a flat penalty when it fails."""
    if failed:
        return -lambda_fail
    prod = float(state.gen_mw.sum())
    if prod <= 0:
        raise EnvError("reward undefined: no scheduled production")
    return float(state.load_mw.sum()) / prod


class GridEnv:
    def __init__(self, topology: GridTopology, config: EnvConfig | None = None):
        self.topology = topology
        self.config = config or EnvConfig()
        self.table = ActionTable(topology)
        self._scenario: Scenario | None = None
        self._episode_seed: int = 0

    # -- episode control ---------------------------------------------------

    def reset(self, scenario: Scenario, seed: int = 0) -> GridState:
        topo = self.topology
        if scenario.n_loads != topo.n_loads or scenario.n_gens != topo.n_generators:
            raise EnvError("scenario shape does not match topology")
        self._scenario = scenario
        self._episode_seed = int(seed)
        state = GridState(
            timestep=0,
            clock=self._clock_at(0),
            load_mw=scenario.load_series[0].copy(),
            gen_mw=scenario.gen_series[0].copy(),
            flow_mw=np.zeros(topo.n_lines),
            rho=np.zeros(topo.n_lines),
            bus_assignment=np.zeros(topo.n_elements, dtype=np.int8),
            line_status=np.ones(topo.n_lines, dtype=bool),
            overflow_steps=np.zeros(topo.n_lines, dtype=np.int32),
            cooldown_line=np.zeros(topo.n_lines, dtype=np.int32),
            cooldown_sub=np.zeros(topo.n_substations, dtype=np.int32),
            time_next_maintenance=np.full(topo.n_lines, -1, dtype=np.int32),
            duration_next_maintenance=np.zeros(topo.n_lines, dtype=np.int32),
        )
        if not self._solve_into(state):
            raise EnvError("infeasible initial power flow")
        return state

    def legal_actions(self, state: GridState) -> np.ndarray:
        whitelist = None
        if self.config.action_whitelist is not None:
            whitelist = np.asarray(self.config.action_whitelist, dtype=np.int64)
        return self.table.legal_mask(state.cooldown_line, state.cooldown_sub, whitelist)

    def step(self, state: GridState, action: Action):
        return self._advance(state, action, allow_opponent=True)

    def simulate(self, state: GridState, action: Action):
        """Outcome preview with the opponent off; never mutates the episode."""
        next_state, r, done, _ = self._advance(state, action, allow_opponent=False)
        return r, next_state, done

    def opponent_step(self, state: GridState, rng: np.random.Generator) -> GridState:
        """Adversarial line trip: with configured probability, disconnect one
        in-service line drawn uniformly from the top-k by capacity ratio."""
        cfg = self.config
        if self._scenario is None or not self._scenario.opponent_enabled:
            return state
        if rng.random() >= cfg.opponent_attack_prob:
            return state
        in_service = np.flatnonzero(state.line_status)
        if in_service.size == 0:
            return state
        ranked = in_service[np.argsort(-state.rho[in_service], kind="stable")]
        top = ranked[:cfg.opponent_top_k]
        target = int(top[rng.integers(len(top))])
        ns = state.copy()
        ns.line_status[target] = False
        ns.cooldown_line[target] = cfg.cooldown_steps
        ns.overflow_steps[target] = 0
        return ns

    # -- dynamics ------------------------------------------------------------

    def _advance(self, state: GridState, action: Action, allow_opponent: bool):
        if self._scenario is None:
            raise EnvError("reset() must be called before stepping")
        cfg = self.config
        scenario = self._scenario
        info = {"illegal_action": False, "termination": None,
                "attacked_line": None, "tripped_lines": []}

        legal = self.legal_actions(state)
        if not legal[action.index]:
            info["illegal_action"] = True
            action = self.table.noop

        ns = state.copy()
        t1 = state.timestep + 1
        ns.timestep = t1
        ns.clock = self._clock_at(t1)
        np.maximum(ns.cooldown_line - 1, 0, out=ns.cooldown_line)
        np.maximum(ns.cooldown_sub - 1, 0, out=ns.cooldown_sub)

        self._apply_action(ns, action)

        row = min(t1, scenario.horizon - 1)
        ns.load_mw = scenario.load_series[row].copy()
        ns.gen_mw = scenario.gen_series[row].copy()

        if allow_opponent and scenario.opponent_enabled:
            rng = np.random.default_rng([self._episode_seed, t1, 0xA77AC4])
            before = ns.line_status.copy()
            ns = self.opponent_step(ns, rng)
            changed = np.flatnonzero(before & ~ns.line_status)
            if changed.size:
                info["attacked_line"] = int(changed[0])

        failed = not self._solve_into(ns)
        if not failed:
            over = ns.line_status & (ns.rho > cfg.overload_rho)
            ns.overflow_steps = np.where(over, ns.overflow_steps + 1, 0).astype(np.int32)
            trips = np.flatnonzero(ns.overflow_steps >= cfg.overflow_disconnect_steps)
            if trips.size:
                for l in trips:
                    ns.line_status[l] = False
                    ns.cooldown_line[l] = cfg.cooldown_steps
                    ns.overflow_steps[l] = 0
                info["tripped_lines"] = [int(l) for l in trips]
                failed = not self._solve_into(ns)

        if failed:
            ns.flow_mw[:] = 0.0
            ns.rho[:] = 0.0
            info["termination"] = "islanding"
            return ns, reward(ns, True, cfg.lambda_fail), True, info

        if ns.load_mw.sum() > ns.gen_mw.sum() + cfg.balance_tol:
            info["termination"] = "load_exceeds_production"
            return ns, reward(ns, True, cfg.lambda_fail), True, info

        done = t1 >= scenario.horizon
        if done:
            info["termination"] = "horizon"
        return ns, reward(ns, False, cfg.lambda_fail), done, info

    def _apply_action(self, ns: GridState, action: Action) -> None:
        cfg, topo = self.config, self.topology
        if action.kind == NOOP:
            return
        if action.kind == LINE_SWITCH:
            l = action.line_id
            ns.line_status[l] = not ns.line_status[l]
            ns.cooldown_line[l] = cfg.cooldown_steps
            ns.overflow_steps[l] = 0
        elif action.kind == LINE_BUS_SET:
            l = action.line_id
            ns.bus_assignment[topo.line_or_element(l)] = action.origin_bus
            ns.bus_assignment[topo.line_ex_element(l)] = action.extremity_bus
            ns.cooldown_line[l] = cfg.cooldown_steps
        elif action.kind == SUBSTATION_ASSIGN:
            s = action.substation_id
            offset = topo.element_offsets[s]
            for j in range(topo.substation_size(s)):
                ns.bus_assignment[offset + j] = (action.bitmask >> j) & 1
            ns.cooldown_sub[s] = cfg.cooldown_steps
        else:
            raise EnvError(f"unknown action kind {action.kind!r}")

    def _solve_into(self, ns: GridState) -> bool:
        """Balance generation to load island by island, then solve flows.

        Returns False on islanding failure (a load with no reachable
        generation) or an unsolvable system; flows/rho are updated in
        place on success.
        """
        topo = self.topology
        g_nodes = powerflow.gen_nodes(topo, ns.bus_assignment)
        l_nodes = powerflow.load_nodes(topo, ns.bus_assignment)
        islands = powerflow.find_islands(topo, ns.bus_assignment, ns.line_status)
        dispatch = np.zeros(topo.n_generators)
        injections = np.zeros(2 * topo.n_substations)
        for island in islands:
            members = set(island)
            gens = [i for i in range(topo.n_generators) if int(g_nodes[i]) in members]
            loads = [i for i in range(topo.n_loads) if int(l_nodes[i]) in members]
            load_total = float(sum(ns.load_mw[i] for i in loads))
            avail_total = float(sum(ns.gen_mw[i] for i in gens))
            if load_total > self.config.balance_tol:
                if avail_total <= self.config.balance_tol:
                    return False  # islanded load
                scale = load_total / avail_total
                for i in gens:
                    dispatch[i] = ns.gen_mw[i] * scale
        for i in range(topo.n_generators):
            injections[g_nodes[i]] += dispatch[i]
        for i in range(topo.n_loads):
            injections[l_nodes[i]] -= ns.load_mw[i]
        try:
            flows = powerflow.dc_power_flow(topo, ns.bus_assignment, ns.line_status,
                                            injections, self.config.balance_tol)
        except powerflow.PowerFlowError:
            return False
        ns.flow_mw = flows
        limits = np.array([ln.thermal_limit for ln in topo.lines])
        ns.rho = np.where(ns.line_status, np.abs(flows) / limits, 0.0)
        return True

    def _clock_at(self, timestep: int) -> tuple[int, int, int, int, int, int]:
        y, mo, d, h, mi = self._scenario.start if self._scenario else (2012, 1, 9, 0, 0)
        dt = datetime.datetime(y, mo, d, h, mi) + datetime.timedelta(
            minutes=self.config.step_minutes * timestep)
        return (dt.year, dt.month, dt.day, dt.hour, dt.minute, dt.weekday())
