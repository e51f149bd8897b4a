"""Grid discretization of the scalar system ``x' = x + a + w``, ``w ~ N(0, σ²)``.

The state interval ``K`` is cut into equal cells.  Cells whose center lies in
the open target interval become target states, the rest decision states,
and a single ``out`` state collects all mass leaving ``K``.  Transition
probabilities are exact Gaussian CDF differences evaluated from the source
cell center.

The closed-form one-step solution serves as an oracle: the best single
action pushes the state toward the middle of the target, saturated at the
action bounds, and the resulting success probability is an erf difference.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Any, Callable

import numpy as np
from scipy import special

from .model import ReachAvoidModel

__all__ = [
    "Linear1DSystem",
    "DegenerateGridError",
    "build_grid_model",
    "cell_edges",
    "transition_row",
    "one_step_value",
    "greedy_oracle",
    "grid_value_error",
    "oracle_sidecar",
    "CEMETERY_ID",
]

CEMETERY_ID = "out"


class DegenerateGridError(ValueError):
    """The grid has fewer than three decision cells."""


@dataclasses.dataclass(frozen=True)
class Linear1DSystem:
    """``x_{t+1} = x_t + a_t + w_t`` with ``a_t`` in ``action_range``.

    Defaults: actions in [-1, 1], unit noise, target ]-1, 1[, safe [-3, 3].
    """

    action_range: tuple[float, float] = (-1.0, 1.0)
    noise_std: float = 1.0
    target_interval: tuple[float, float] = (-1.0, 1.0)
    safe_interval: tuple[float, float] = (-3.0, 3.0)
    grid_step: float = 0.05
    action_grid_count: int = 41

    def __post_init__(self):
        object.__setattr__(self, "action_range", tuple(float(v) for v in self.action_range))
        object.__setattr__(self, "safe_interval", tuple(float(v) for v in self.safe_interval))
        t = self.target_interval
        if len(t) and np.ndim(t[0]) == 0:
            t = tuple(float(v) for v in t)
            pairs = (t,)
        else:
            t = tuple(tuple(float(v) for v in pair) for pair in t)
            pairs = t
        object.__setattr__(self, "target_interval", t)
        (a_lo, a_hi), (k_lo, k_hi) = self.action_range, self.safe_interval
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if not a_lo <= a_hi:
            raise ValueError("action_range must have lo <= hi")
        if int(self.action_grid_count) != self.action_grid_count or self.action_grid_count < 1:
            raise ValueError("action_grid_count must be a positive integer")
        if a_lo < a_hi and self.action_grid_count < 2:
            raise ValueError("a non-degenerate action range needs at least two grid points")
        if not pairs or any(len(p) != 2 for p in pairs):
            raise ValueError("target_interval must be (lo, hi) or a sequence of such pairs")
        if not k_lo < k_hi or any(not lo < hi for lo, hi in pairs):
            raise ValueError("intervals must have lo < hi")
        if any(not (k_lo < lo and hi < k_hi) for lo, hi in pairs):
            raise ValueError("target_interval must lie in the interior of safe_interval")

    @property
    def target_intervals(self) -> tuple[tuple[float, float], ...]:
        """The target as a tuple of open intervals."""
        t = self.target_interval
        return (t,) if np.ndim(t[0]) == 0 else t

    @property
    def n_cells(self) -> int:
        lo, hi = self.safe_interval
        return max(1, int(round((hi - lo) / self.grid_step)))

    @property
    def step(self) -> float:
        """Effective cell width (the requested step adjusted to tile ``K`` exactly)."""
        lo, hi = self.safe_interval
        return (hi - lo) / self.n_cells

    @property
    def actions(self) -> np.ndarray:
        return np.linspace(*self.action_range, int(self.action_grid_count))

    def in_target(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.target_intervals:
            out |= (x > lo) & (x < hi)
        return out

    def in_safe(self, x) -> np.ndarray:
        lo, hi = self.safe_interval
        x = np.asarray(x, dtype=float)
        return (x >= lo) & (x <= hi)

    def to_dict(self) -> dict[str, Any]:
        return {
            "action_range": list(self.action_range),
            "noise_std": self.noise_std,
            "target_interval": [list(p) for p in self.target_intervals]
            if np.ndim(self.target_interval[0])
            else list(self.target_interval),
            "safe_interval": list(self.safe_interval),
            "grid_step": self.grid_step,
            "action_grid_count": int(self.action_grid_count),
        }


def cell_edges(sys: Linear1DSystem) -> np.ndarray:
    lo, hi = sys.safe_interval
    edges = lo + sys.step * np.arange(sys.n_cells + 1)
    edges[-1] = hi
    return edges


def _cell_ids(n: int) -> list[str]:
    width = len(str(n - 1))
    return [f"c{j:0{width}d}" for j in range(n)]


def transition_row(sys: Linear1DSystem, x: float, a: float) -> np.ndarray:
    """Probabilities of landing in each cell, then (last entry) of leaving ``K``."""
    edges = cell_edges(sys)
    F = special.ndtr((edges - x - a) / sys.noise_std)
    row = np.empty(len(edges))
    row[:-1] = np.diff(F)
    row[-1] = F[0] + (1.0 - F[-1])
    return np.clip(row, 0.0, None)


def build_grid_model(sys: Linear1DSystem) -> ReachAvoidModel:
    """Discretize ``sys`` into a :class:`ReachAvoidModel`.

    Raises
    ------
    DegenerateGridError
        If fewer than three cells are decision cells.
    """
    edges = cell_edges(sys)
    centers = 0.5 * (edges[:-1] + edges[1:])
    n = centers.size
    target_cells = sys.in_target(centers)
    if np.sum(~target_cells) < 3:
        raise DegenerateGridError(
            f"only {int(np.sum(~target_cells))} decision cells; refine grid_step or widen safe_interval"
        )
    acts = sys.actions
    m = n + 1
    # F[i, a, j] = Φ((edge_j - c_i - a) / σ)
    shift = centers[:, None, None] + acts[None, :, None]
    F = special.ndtr((edges[None, None, :] - shift) / sys.noise_std)
    kernel = np.zeros((m, acts.size, m))
    kernel[:n, :, :n] = np.diff(F, axis=2)
    kernel[:n, :, n] = F[:, :, 0] + (1.0 - F[:, :, -1])
    kernel = np.clip(kernel, 0.0, None)

    target = np.append(target_cells, False)
    safe = np.append(np.ones(n, dtype=bool), False)
    feasible = np.zeros((m, acts.size), dtype=bool)
    feasible[:n][~target_cells] = True
    coords = np.append(centers, sys.safe_interval[1] + sys.step)
    return ReachAvoidModel(
        kernel, target, safe, feasible=feasible,
        states=_cell_ids(n) + [CEMETERY_ID],
        actions=[repr(float(a)) for a in acts],
        coordinates=coords,
    )


def one_step_value(sys: Linear1DSystem, x, a):
    """Probability that ``x + a + w`` lands in the target.

    Written with ``erfc`` so that both tails keep full relative accuracy.
    """
    s = sys.noise_std * math.sqrt(2.0)
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    out = np.zeros(np.broadcast(x, a).shape)
    for lo, hi in sys.target_intervals:
        out = out + 0.5 * (special.erfc(-(hi - x - a) / s) - special.erfc(-(lo - x - a) / s))
    return float(out) if out.ndim == 0 else out


def greedy_oracle(sys: Linear1DSystem) -> tuple[Callable, Callable]:
    """Closed-form one-step optimal action and value.

    Returns
    -------
    policy : callable
        ``x -> clip(mid - x, a_lo, a_hi)`` with ``mid`` the target midpoint;
        for the default instance this is ``-sat(x)``.  Only defined for a
        single target interval.
    value : callable
        ``x -> 1`` on the target, ``0`` off ``K``, and the one-step success
        probability of ``policy(x)`` on ``K \\ O``.
    """
    if len(sys.target_intervals) != 1:
        raise ValueError("the closed-form oracle needs a single target interval")
    mid = 0.5 * sum(sys.target_intervals[0])
    a_lo, a_hi = sys.action_range

    def policy(x):
        out = np.clip(mid - np.asarray(x, dtype=float), a_lo, a_hi)
        return float(out) if out.ndim == 0 else out

    def value(x):
        x = np.asarray(x, dtype=float)
        out = np.where(sys.in_target(x), 1.0, np.where(sys.in_safe(x), one_step_value(sys, x, policy(x)), 0.0))
        return float(out) if out.ndim == 0 else out

    return policy, value


def grid_value_error(sys: Linear1DSystem, grid_value, n_probe: int = 20_001) -> dict[str, float]:
    """Compare a grid value on ``K \\ O`` with the closed-form one-step value.

    ``grid_value`` is indexed like the model built from ``sys``.  The grid
    value is read as piecewise constant over cells and compared with the
    oracle on ``n_probe`` evenly spaced points of ``K \\ O`` (``sup``), and
    separately at decision cell centers (``centers``).
    """
    grid_value = np.asarray(grid_value, dtype=float)
    _, oracle = greedy_oracle(sys)
    edges = cell_edges(sys)
    centers = 0.5 * (edges[:-1] + edges[1:])
    decision = ~sys.in_target(centers)
    xs = np.linspace(*sys.safe_interval, n_probe)
    xs = xs[~sys.in_target(xs)]
    cell = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, centers.size - 1)
    return {
        "sup": float(np.max(np.abs(grid_value[cell] - oracle(xs)))),
        "centers": float(np.max(np.abs(grid_value[:-1][decision] - oracle(centers[decision])))),
    }


def oracle_sidecar(sys: Linear1DSystem, model: ReachAvoidModel | None = None) -> dict[str, Any]:
    """Closed-form action and value at every cell center, for the JSON sidecar."""
    model = build_grid_model(sys) if model is None else model
    policy, value = greedy_oracle(sys)
    n = model.n_states - 1
    centers = model.coordinates[:n]
    return {
        "system": sys.to_dict(),
        "n_cells": n,
        "effective_step": sys.step,
        "cells": [
            {
                "state": model.states[i],
                "center": float(c),
                "class": "target" if model.target[i] else "decision",
                "oracle_action": policy(c),
                "oracle_value": value(c),
            }
            for i, c in enumerate(centers)
        ],
    }
