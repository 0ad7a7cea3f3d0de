"""Built-in environments: a four-corridor frozen lake and tiny oracle-scale MDPs."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentedPolicy
from .errors import DomainError
from .mdp import TabularMdp, lattice_index

# start at the centre, four corridors of length 4 (three path cells + goal).
# goal 0: three ice cells, 1: two, 2: one, 3: none.
DEFAULT_MAP = """\
HHHH0HHHH
HHHH~HHHH
HHHH~HHHH
HHHH~HHHH
3...S.~.2
HHHH~HHHH
HHHH.HHHH
HHHH~HHHH
HHHH1HHHH
"""

UP, RIGHT, DOWN, LEFT = range(4)
MOVES = {UP: (-1, 0), RIGHT: (0, 1), DOWN: (1, 0), LEFT: (0, -1)}
ACTION_NAMES = ("up", "right", "down", "left")


class MapParseError(DomainError):
    def __init__(self, msg: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(msg + where)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class FrozenLakeSpec:
    map: str = DEFAULT_MAP
    slip: float = 0.1
    rewards: tuple[float, ...] = (6.0, 4.0, 2.0, 1.0)
    T: int = 6
    eta: float = 1.0 / 6.0

    @property
    def reward_scale(self) -> float:
        """Raw terminal rewards are divided by this so per-step rewards lie in [0, 1]."""
        return float(max(self.rewards))

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path | None = None) -> "FrozenLakeSpec":
        kw = {}
        if "map_path" in d:
            path = Path(d["map_path"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            kw["map"] = path.read_text()
        elif "map" in d:
            kw["map"] = d["map"]
        for key in ("slip", "T", "eta"):
            if key in d:
                kw[key] = d[key]
        if "rewards" in d:
            kw["rewards"] = tuple(float(r) for r in d["rewards"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return {"map": self.map, "slip": self.slip, "rewards": list(self.rewards), "T": self.T, "eta": self.eta}


@dataclass(frozen=True)
class LakeLayout:
    rows: tuple[str, ...]
    state_of: dict = field(repr=False)   # (row, col) -> state index, passable non-goal cells
    cell_of: tuple = field(repr=False)   # state index -> (row, col); terminal excluded
    start: int = 0
    terminal: int = 0
    goals: dict = field(default_factory=dict, repr=False)  # (row, col) -> goal id

    @property
    def n_states(self) -> int:
        return self.terminal + 1

    def target(self, cell: tuple[int, int], action: int) -> tuple[int, int]:
        dr, dc = MOVES[action]
        r, c = cell[0] + dr, cell[1] + dc
        if 0 <= r < len(self.rows) and 0 <= c < len(self.rows[r]):
            return r, c
        return cell


def parse_map(text: str, n_goals: int | None = None) -> LakeLayout:
    rows = tuple(line.rstrip("\n") for line in text.strip("\n").splitlines())
    if not rows:
        raise MapParseError("empty map")
    width = len(rows[0])
    start = None
    state_of: dict = {}
    goals: dict = {}
    for r, line in enumerate(rows):
        if len(line) != width:
            raise MapParseError(f"row length {len(line)} differs from {width}", r + 1, len(line) + 1)
        for c, ch in enumerate(line):
            if ch == "S":
                if start is not None:
                    raise MapParseError("more than one start cell", r + 1, c + 1)
                start = (r, c)
            elif ch.isdigit():
                gid = int(ch)
                if n_goals is not None and gid >= n_goals:
                    raise MapParseError(f"goal id {gid} has no reward", r + 1, c + 1)
                goals[(r, c)] = gid
                continue
            elif ch not in ".~H":
                raise MapParseError(f"unknown cell {ch!r}", r + 1, c + 1)
            if ch != "H":
                state_of[(r, c)] = len(state_of)
    if start is None:
        raise MapParseError("map has no start cell")
    cell_of = tuple(sorted(state_of, key=state_of.get))
    return LakeLayout(rows, state_of, cell_of, state_of[start], len(state_of), goals)


def make_frozen_lake(spec: FrozenLakeSpec | None = None) -> TabularMdp:
    """Gridworld with one absorbing terminal state shared by holes and goals.

    Entering goal ``g`` pays ``rewards[g] / reward_scale`` once. Stepping onto
    ice succeeds with probability ``1 - slip`` and otherwise drops into a hole.
    Off-map moves leave the agent in place.
    """
    spec = spec or FrozenLakeSpec()
    if not (0.0 <= spec.slip <= 1.0):
        raise DomainError(f"slip must lie in [0, 1], got {spec.slip!r}")
    lay = parse_map(spec.map, n_goals=len(spec.rewards))
    S, A = lay.n_states, 4
    levels = round(1.0 / spec.eta) + 1
    trans = np.zeros((S, A, S))
    rew = np.zeros((S, A, levels))
    trans[lay.terminal, :, lay.terminal] = 1.0
    rew[lay.terminal, :, 0] = 1.0
    for s, cell in enumerate(lay.cell_of):
        for a in range(A):
            tgt = lay.target(cell, a)
            ch = lay.rows[tgt[0]][tgt[1]]
            r_idx = 0
            if tgt in lay.goals:
                trans[s, a, lay.terminal] = 1.0
                r_idx = lattice_index(spec.rewards[lay.goals[tgt]] / spec.reward_scale, spec.eta)
            elif ch == "H":
                trans[s, a, lay.terminal] = 1.0
            elif ch == "~" and tgt != cell:
                trans[s, a, lay.state_of[tgt]] = 1.0 - spec.slip
                trans[s, a, lay.terminal] += spec.slip
            else:
                trans[s, a, lay.state_of[tgt]] = 1.0
            rew[s, a, r_idx] = 1.0
    init = np.zeros(S)
    init[lay.start] = 1.0
    return TabularMdp(init, trans, rew, spec.T, spec.eta)


def _path_to_goal(lay: LakeLayout, goal_id: int) -> list[tuple[int, int]]:
    """Shortest sequence of (state, action) from the start into goal ``goal_id``."""
    start = lay.cell_of[lay.start]
    prev = {start: None}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        for a in range(4):
            tgt = lay.target(cell, a)
            if lay.goals.get(tgt) == goal_id:
                path = [(lay.state_of[cell], a)]
                while prev[cell] is not None:
                    cell, act = prev[cell]
                    path.append((lay.state_of[cell], act))
                return path[::-1]
            if tgt in lay.state_of and tgt not in prev:
                prev[tgt] = (cell, a)
                queue.append(tgt)
    raise DomainError(f"goal {goal_id} is unreachable")


def corridor_policy(spec: FrozenLakeSpec | None, goal_id: int) -> AugmentedPolicy:
    """Deterministic policy that walks the shortest route to one goal."""
    spec = spec or FrozenLakeSpec()
    mdp = make_frozen_lake(spec)
    lay = parse_map(spec.map)
    actions = np.zeros((spec.T, mdp.n_states, mdp.return_levels), dtype=int)
    for s, a in _path_to_goal(lay, goal_id):
        actions[:, s, :] = a
    return AugmentedPolicy.deterministic(actions, 4, spec.eta)


def planned_goal(spec: FrozenLakeSpec | None, actions: np.ndarray) -> int | None:
    """Goal reached by a deterministic action table ``actions[t-1, s, y]`` when nothing slips."""
    spec = spec or FrozenLakeSpec()
    lay = parse_map(spec.map)
    cell = lay.cell_of[lay.start]
    for t in range(actions.shape[0]):
        tgt = lay.target(cell, int(actions[t, lay.state_of[cell], 0]))
        if tgt in lay.goals:
            return lay.goals[tgt]
        if tgt not in lay.state_of:
            return None
        cell = tgt
    return None


def corridor_return_law(spec: FrozenLakeSpec | None, goal_id: int) -> dict[float, float]:
    """Closed-form two-point law (scaled units) of walking one corridor."""
    spec = spec or FrozenLakeSpec()
    lay = parse_map(spec.map)
    ice = sum(1 for s, a in _path_to_goal(lay, goal_id)[:-1]
              if lay.rows[lay.target(lay.cell_of[s], a)[0]][lay.target(lay.cell_of[s], a)[1]] == "~")
    success = (1.0 - spec.slip) ** ice
    reward = spec.rewards[goal_id]
    return {0.0: 1.0 - success, float(reward): success} if success < 1 else {float(reward): 1.0}


def corridor_cvar(spec: FrozenLakeSpec | None, goal_id: int, alpha: float) -> float:
    """``R * max(alpha - p_fail, 0) / alpha`` in scaled units."""
    law = corridor_return_law(spec, goal_id)
    reward = max(law)
    p_fail = law.get(0.0, 0.0) if reward > 0 else 0.0
    return reward * max(alpha - p_fail, 0.0) / alpha


# ---------------------------------------------------------------------------
# oracle-scale catalogue; rewards on the 1/16 lattice so that coarser
# discretizations (1/2, 1/4, 1/8) genuinely round


CATALOGUE_ETA = 1.0 / 16.0


def _q(x: float) -> float:
    return x / 16.0


def mdp_catalogue() -> dict[str, TabularMdp]:
    eta = CATALOGUE_ETA
    cat: dict[str, TabularMdp] = {}

    # one-shot risky/safe arms
    cat["bandit"] = TabularMdp.from_values(
        [1.0], [[[1.0], [1.0]]],
        [[{0.0: 0.5, 1.0: 0.5}, {_q(7): 1.0}]], 1, eta)

    # single-action deterministic chain
    cat["chain"] = TabularMdp.from_values(
        [1.0, 0.0], [[[0.0, 1.0]], [[1.0, 0.0]]],
        [[{_q(5): 1.0}], [{_q(3): 1.0}]], 3, eta)

    # fork: the expectation-optimal branch is the risky one
    cat["fork"] = TabularMdp.from_values(
        [1.0, 0.0, 0.0],
        [[[0, 1, 0], [0, 0.25, 0.75]],
         [[0, 1, 0], [0, 1, 0]],
         [[0, 0, 1], [0, 0, 1]]],
        [[{0.0: 1.0}, {0.0: 1.0}],
         [{_q(7): 1.0}, {_q(5): 0.5, _q(11): 0.5}],
         [{0.0: 0.4, 1.0: 0.6}, {_q(1): 1.0}]], 2, eta)

    # the best second move depends on the first outcome
    cat["gamble"] = TabularMdp.from_values(
        [1.0, 0.0],
        [[[1, 0], [0, 1]],
         [[0, 1], [0, 1]]],
        [[{0.0: 0.5, _q(8): 0.5}, {_q(3): 1.0}],
         [{_q(2): 1.0}, {0.0: 0.5, _q(6): 0.5}]], 2, eta)

    # random start, stochastic moves, three steps
    cat["drift"] = TabularMdp.from_values(
        [0.5, 0.5, 0.0],
        [[[0.2, 0.8, 0.0], [0.0, 0.3, 0.7]],
         [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
         [[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]],
        [[{_q(1): 1.0}, {_q(3): 1.0}],
         [{_q(6): 1.0}, {0.0: 0.5, _q(13): 0.5}],
         [{_q(2): 1.0}, {_q(2): 1.0}]], 3, eta)
    return cat


def make_test_mdps() -> list[TabularMdp]:
    return list(mdp_catalogue().values())


def list_envs() -> list[dict]:
    out = [{"name": "frozen_lake", "n_states": make_frozen_lake().n_states, "n_actions": 4,
            "T": FrozenLakeSpec().T, "eta": FrozenLakeSpec().eta}]
    for name, mdp in mdp_catalogue().items():
        out.append({"name": name, "n_states": mdp.n_states, "n_actions": mdp.n_actions,
                    "T": mdp.horizon, "eta": mdp.eta})
    return out


def load_env(d: dict, base_dir: str | Path | None = None) -> tuple[TabularMdp, float]:
    """Resolve an env config to ``(mdp, return_scale)``.

    Accepts ``{"name": "frozen_lake", ...spec fields}``, a catalogue name, a
    frozen-lake spec with ``map_path``, or ``{"mdp_path": ...}`` for a serialized MDP.
    """
    if "mdp_path" in d:
        path = Path(d["mdp_path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return TabularMdp.from_dict(json.loads(path.read_text())), 1.0
    name = d.get("name", "frozen_lake")
    if name == "frozen_lake":
        spec = FrozenLakeSpec.from_dict(d, base_dir)
        return make_frozen_lake(spec), spec.reward_scale
    cat = mdp_catalogue()
    if name not in cat:
        raise DomainError(f"unknown environment {name!r}")
    return cat[name], 1.0
