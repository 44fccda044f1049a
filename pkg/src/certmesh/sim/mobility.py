"""Random-waypoint mobility, evaluated lazily at whatever times are asked for.

Each node draws its legs from its own random stream, so a trajectory depends
only on the seed and the node id, never on how often positions are queried.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MobilityState:
    area: tuple
    vmax: float
    pause: float
    start: np.ndarray       # (n, 2) where the current leg began
    waypoint: np.ndarray    # (n, 2) where it ends
    depart: np.ndarray      # leg start time
    speed: np.ndarray       # m/s on the current leg
    arrive: np.ndarray      # time the waypoint is reached
    pause_until: np.ndarray
    rngs: list
    exponential_pause: bool = False

    @property
    def n(self) -> int:
        return len(self.speed)

    @classmethod
    def random(cls, n: int, area=(1500.0, 1500.0), vmax: float = 10.0, pause: float = 30.0,
               seed: int = 0, exponential_pause: bool = False) -> "MobilityState":
        if vmax <= 0:
            raise ValueError("vmax must be positive")
        rngs = [np.random.default_rng([seed, 0x6D6F62, i]) for i in range(n)]
        start = np.array([[r.uniform(0, area[0]), r.uniform(0, area[1])] for r in rngs]).reshape(n, 2)
        zeros = np.zeros(n)
        return cls(tuple(float(a) for a in area), float(vmax), float(pause), start, start.copy(),
                   zeros.copy(), zeros.copy(), zeros.copy(), zeros.copy(), rngs, exponential_pause)

    @classmethod
    def static(cls, points, area=None) -> "MobilityState":
        """Nodes that never move; handy for fixed test topologies."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        n = len(pts)
        if area is None:
            area = (float(pts[:, 0].max(initial=0.0)) + 1.0, float(pts[:, 1].max(initial=0.0)) + 1.0)
        inf = np.full(n, np.inf)
        zeros = np.zeros(n)
        return cls(tuple(area), 1.0, 0.0, pts, pts.copy(), zeros.copy(), zeros.copy(), zeros.copy(),
                   inf, [None] * n)

    def set_leg(self, node: int, start, waypoint, speed: float, depart: float) -> None:
        """Force ``node`` onto a specific leg (used by tests and demos)."""
        self.start[node] = start
        self.waypoint[node] = waypoint
        self.speed[node] = speed
        self.depart[node] = depart
        dist = float(np.hypot(*(np.asarray(waypoint, float) - np.asarray(start, float))))
        self.arrive[node] = depart + (dist / speed if speed > 0 else 0.0)
        self.pause_until[node] = self.arrive[node] + self._pause_length(node)

    def _pause_length(self, node: int) -> float:
        if self.exponential_pause and self.pause > 0 and self.rngs[node] is not None:
            return float(self.rngs[node].exponential(self.pause))
        return self.pause

    def positions(self, now: float) -> np.ndarray:
        for node in np.flatnonzero(self.pause_until <= now):
            step_mobility(self, int(node), now)
        span = self.arrive - self.depart
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(span > 0, (now - self.depart) / span, 1.0)
        frac = np.clip(frac, 0.0, 1.0)[:, None]
        return self.start + frac * (self.waypoint - self.start)


def step_mobility(state: MobilityState, node: int, now: float) -> MobilityState:
    """Renew ``node``'s legs until the one covering ``now`` is current."""
    rng = state.rngs[node]
    while state.pause_until[node] <= now and rng is not None:
        depart = float(state.pause_until[node])
        origin = state.waypoint[node].copy()
        target = np.array([rng.uniform(0, state.area[0]), rng.uniform(0, state.area[1])])
        speed = state.vmax * (1.0 - rng.random())  # (0, vmax]
        state.set_leg(node, origin, target, speed, depart)
    return state


def position_of(state: MobilityState, node: int, now: float) -> np.ndarray:
    step_mobility(state, node, now)
    span = state.arrive[node] - state.depart[node]
    frac = 1.0 if span <= 0 else min(1.0, max(0.0, (now - state.depart[node]) / span))
    return state.start[node] + frac * (state.waypoint[node] - state.start[node])
