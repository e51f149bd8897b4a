"""Monte Carlo trajectories and martingale diagnostics.

Trajectories of the policy-induced chain are sampled in lockstep, block by
block.  Block ``b`` (trajectory indices ``b*BLOCK_SIZE ...``) draws from its
own Philox stream keyed by ``(seed, stream, b)`` and consumes exactly
``BLOCK_SIZE`` uniforms per step, one per slot, whether or not the slot's
path is still running.  The uniform used by trajectory ``j`` at step ``t`` is
therefore a function of ``(seed, j, t)`` alone: results do not depend on the
number of worker threads, and a larger ``n_traj`` extends a run without
changing its first trajectories.

The diagnostics evaluate, along sampled paths, the process

    ζ_0 = V(x_0),
    ζ_n = W_n + 1_{K\\O}(x_{(n-1)∧T}) (1_K V)(x_{n∧T}),   W_n = sum_{t<=(n-1)∧T} 1_O(x_t),

with ``T = τ ∧ τ'``.  For ``V = V*`` it is a supermartingale under every
policy and a martingale exactly under thrifty ones.
"""

from __future__ import annotations

import dataclasses
import enum
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any

import numpy as np

from . import linear
from .bellman import action_values, check_boundary_form
from .model import ReachAvoidModel, StateClass
from .rewards import evaluate_reward, make_variant

__all__ = [
    "BLOCK_SIZE",
    "DEFAULT_HORIZON",
    "MIN_SURVIVORS",
    "Outcome",
    "Trajectory",
    "TrajectorySet",
    "SampleResult",
    "MartingaleReport",
    "sample_trajectories",
    "zeta_process",
    "zeta_table",
    "martingale_diagnostics",
    "discounted_crosscheck_v1",
    "worker_count",
]

BLOCK_SIZE = 1024
DEFAULT_HORIZON = 100_000
MIN_SURVIVORS = 30
Z_THRESHOLD = 3.0
# absolute slack for deterministic statistics with zero standard error
_ATOL = 1e-12


class Outcome(enum.IntEnum):
    HIT_TARGET = 0
    HIT_CEMETERY = 1
    TRUNCATED = 2


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """One sampled path ``x_0..x_T`` with actions ``a_0..a_{T-1}``."""

    states: np.ndarray
    actions: np.ndarray
    outcome: Outcome

    @property
    def length(self) -> int:
        return len(self.states) - 1


@dataclasses.dataclass(frozen=True, eq=False)
class TrajectorySet:
    """Ragged storage: trajectory ``i`` is ``states[offsets[i]:offsets[i+1]]``."""

    states: np.ndarray
    offsets: np.ndarray
    actions: np.ndarray
    outcomes: np.ndarray

    @classmethod
    def empty(cls) -> "TrajectorySet":
        return cls(np.zeros(0, np.int32), np.zeros(1, np.int64), np.zeros(0, np.int32), np.zeros(0, np.int8))

    def __len__(self) -> int:
        return len(self.outcomes)

    def __getitem__(self, i: int) -> Trajectory:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        # actions are stored one per transition, i.e. offsets shifted by the index
        return Trajectory(self.states[lo:hi], self.actions[lo - i:hi - i - 1], Outcome(self.outcomes[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def lengths(self) -> np.ndarray:
        """Stopping index ``T_i`` (or the horizon for truncated paths)."""
        return np.diff(self.offsets) - 1

    def stopped(self, n: int) -> np.ndarray:
        """``x_{n ∧ T_i}`` for every trajectory."""
        return self.states[self.offsets[:-1] + np.minimum(n, self.lengths)]

    @property
    def final_states(self) -> np.ndarray:
        return self.states[self.offsets[1:] - 1]

    def step_index(self) -> np.ndarray:
        """Time index of every entry of ``states``."""
        owner = np.repeat(np.arange(len(self)), np.diff(self.offsets))
        return np.arange(len(self.states)) - self.offsets[owner]

    @staticmethod
    def concatenate(parts) -> "TrajectorySet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return TrajectorySet.empty()
        offsets = [parts[0].offsets]
        base = parts[0].offsets[-1]
        for p in parts[1:]:
            offsets.append(p.offsets[1:] + base)
            base += p.offsets[-1]
        return TrajectorySet(
            np.concatenate([p.states for p in parts]),
            np.concatenate(offsets),
            np.concatenate([p.actions for p in parts]),
            np.concatenate([p.outcomes for p in parts]),
        )


def worker_count() -> int:
    """Thread cap from ``REACHAVOID_THREADS`` (default: available CPUs)."""
    env = os.environ.get("REACHAVOID_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"REACHAVOID_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def block_rng(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one block of trajectory indices."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream), int(block)])))


def _sampling_table(chain: linear.InducedChain) -> np.ndarray:
    cdf = np.cumsum(chain.kernel, axis=1)
    cdf /= cdf[:, -1:]
    # past the last positive entry the cdf is exactly one, so rounding never
    # selects a zero-probability successor
    last = chain.kernel.shape[1] - 1 - np.argmax(chain.kernel[:, ::-1] > 0, axis=1)
    cols = np.arange(chain.kernel.shape[1])
    cdf[cols[None, :] >= last[:, None]] = 1.0
    return cdf


def _simulate_block(cdf, decision, policy, start, count, horizon, rng) -> TrajectorySet:
    idx = np.arange(count)
    cur = np.full(count, start, dtype=np.int64)
    rec_idx, rec_state, rec_step = [idx], [cur], [np.zeros(count, np.int64)]
    act_idx, act_val, act_step = [], [], []
    for t in range(horizon):
        alive = decision[cur]
        if not alive.any():
            break
        idx, cur = idx[alive], cur[alive]
        u = rng.random(BLOCK_SIZE)[idx]
        nxt = (cdf[cur] < u[:, None]).sum(axis=1)
        act_idx.append(idx)
        act_val.append(policy[cur])
        act_step.append(np.full(idx.size, t, np.int64))
        rec_idx.append(idx)
        rec_state.append(nxt)
        rec_step.append(np.full(idx.size, t + 1, np.int64))
        cur = nxt

    all_idx = np.concatenate(rec_idx)
    order = np.lexsort((np.concatenate(rec_step), all_idx))
    states = np.concatenate(rec_state)[order].astype(np.int32)
    offsets = np.zeros(count + 1, np.int64)
    offsets[1:] = np.cumsum(np.bincount(all_idx, minlength=count))
    if act_idx:
        a_idx = np.concatenate(act_idx)
        a_order = np.lexsort((np.concatenate(act_step), a_idx))
        actions = np.concatenate(act_val)[a_order].astype(np.int32)
    else:
        actions = np.zeros(0, np.int32)
    final = states[offsets[1:] - 1]
    outcomes = np.full(count, Outcome.TRUNCATED, np.int8)
    outcomes[~decision[final]] = Outcome.HIT_CEMETERY
    return TrajectorySet(states, offsets, actions, outcomes)


def _mark_targets(ts: TrajectorySet, target: np.ndarray) -> TrajectorySet:
    out = ts.outcomes.copy()
    out[(out == Outcome.HIT_CEMETERY) & target[ts.final_states]] = Outcome.HIT_TARGET
    return dataclasses.replace(ts, outcomes=out)


@dataclasses.dataclass
class SampleResult:
    """Trajectories plus the estimate of ``P(τ < τ', τ < ∞)`` with a 95% normal CI."""

    start: int
    n_traj: int
    seed: int
    horizon_cap: int
    estimate: float
    std_error: float
    ci: tuple[float, float]
    n_hit: int
    n_cemetery: int
    n_truncated: int
    trajectories: TrajectorySet

    @property
    def truncation_rate(self) -> float:
        return self.n_truncated / self.n_traj if self.n_traj else 0.0

    def to_dict(self, model: ReachAvoidModel | None = None) -> dict[str, Any]:
        start = model.states[self.start] if model is not None else self.start
        lengths = self.trajectories.lengths
        return {
            "start": start,
            "n_traj": self.n_traj,
            "seed": self.seed,
            "horizon_cap": self.horizon_cap,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "ci95": list(self.ci),
            "n_hit": self.n_hit,
            "n_cemetery": self.n_cemetery,
            "n_truncated": self.n_truncated,
            "truncation_rate": self.truncation_rate,
            "mean_exit_time": float(lengths.mean()) if len(lengths) else 0.0,
        }


def sample_trajectories(
    model: ReachAvoidModel,
    policy,
    start,
    n_traj: int,
    horizon_cap: int = DEFAULT_HORIZON,
    seed: int = 0,
    threads: int | None = None,
) -> SampleResult:
    """Simulate ``n_traj`` paths of the stationary policy from ``start``.

    A start on the target or cemetery gives the trivial estimate (1 or 0)
    without simulating anything.  Paths still in ``K \\ O`` after
    ``horizon_cap`` steps are marked truncated and count as misses.
    """
    x0 = model.state_index(start)
    if n_traj < 1:
        raise ValueError("n_traj must be positive")
    cls = model.classes[x0]
    if cls != StateClass.DECISION:
        p = 1.0 if cls == StateClass.TARGET else 0.0
        return SampleResult(x0, 0, seed, horizon_cap, p, 0.0, (p, p), 0, 0, 0, TrajectorySet.empty())

    chain = linear.induce_chain(model, policy)
    cdf = _sampling_table(chain)
    policy = np.asarray(policy, dtype=np.int64)
    decision = model.decision
    n_blocks = -(-n_traj // BLOCK_SIZE)

    def run(b):
        count = min(BLOCK_SIZE, n_traj - b * BLOCK_SIZE)
        return _simulate_block(cdf, decision, policy, x0, count, horizon_cap, block_rng(seed, b))

    threads = worker_count() if threads is None else threads
    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]
    ts = _mark_targets(TrajectorySet.concatenate(parts), model.target)

    n_hit = int(np.sum(ts.outcomes == Outcome.HIT_TARGET))
    n_cem = int(np.sum(ts.outcomes == Outcome.HIT_CEMETERY))
    n_trunc = int(np.sum(ts.outcomes == Outcome.TRUNCATED))
    p = n_hit / n_traj
    se = float(np.sqrt(p * (1 - p) / n_traj))
    ci = (max(0.0, p - 1.96 * se), min(1.0, p + 1.96 * se))
    return SampleResult(x0, n_traj, seed, horizon_cap, p, se, ci, n_hit, n_cem, n_trunc, ts)


# ---------------------------------------------------------------------------
# ζ-process
# ---------------------------------------------------------------------------


def zeta_process(model: ReachAvoidModel, value, trajectory: Trajectory, n_max: int | None = None) -> np.ndarray:
    """``ζ_0 .. ζ_{n_max}`` along one trajectory, using stopped indices.

    ``n_max`` defaults to the trajectory length.  Beyond the stopping index
    the stopped state is reused, so ζ stays constant; for truncated paths
    ``n_max`` cannot exceed the length.
    """
    value = np.asarray(value, dtype=float)
    xs = np.asarray(trajectory.states)
    T = len(xs) - 1
    n_max = T if n_max is None else n_max
    if trajectory.outcome == Outcome.TRUNCATED and n_max > T:
        raise ValueError("truncated trajectory has no states beyond its horizon")
    in_O = model.target[xs].astype(float)
    in_D = model.decision[xs]
    kv = value * model.safe
    zeta = np.empty(n_max + 1)
    zeta[0] = value[xs[0]]
    for n in range(1, n_max + 1):
        prev = min(n - 1, T)
        w = in_O[: prev + 1].sum()
        zeta[n] = w + (kv[xs[min(n, T)]] if in_D[prev] else 0.0)
    return zeta


def zeta_table(model: ReachAvoidModel, value, ts: TrajectorySet) -> np.ndarray:
    """ζ for every stored entry: ``out[offsets[i] + n] = ζ_n`` of trajectory ``i`` (``n <= T_i``)."""
    value = np.asarray(value, dtype=float)
    if not len(ts):
        return np.zeros(0)
    step = ts.step_index()
    owner = np.repeat(np.arange(len(ts)), np.diff(ts.offsets))
    xs = ts.states
    in_O = model.target[xs].astype(float)
    csum = np.cumsum(in_O)
    before = np.concatenate([[0.0], csum])[ts.offsets[:-1]][owner]
    pos = np.arange(len(xs))
    prev = np.where(step > 0, pos - 1, pos)
    w = csum[prev] - before
    kv = value * model.safe
    zeta = w + model.decision[xs[prev]] * kv[xs]
    zeta[step == 0] = value[xs[step == 0]]
    return zeta


def _verdict_le(stat: float, se: float) -> bool:
    return stat <= Z_THRESHOLD * se + _ATOL


@dataclasses.dataclass
class MartingaleReport:
    """Empirical martingale diagnostics for one policy from one start state."""

    mode: str
    start: int
    n_traj: int
    seed: int
    horizon_cap: int
    hit: dict
    drift: dict
    lambda_estimate: dict
    thrifty: dict
    equalizing: dict
    conserving: dict
    candidate: dict | None = None

    @property
    def verdicts(self) -> dict[str, bool]:
        if self.mode == "candidate":
            return {"martingale": self.drift["verdict"], "certified": self.candidate["verdict"]}
        return {
            "martingale": self.drift["verdict"],
            "thrifty": self.thrifty["verdict"],
            "equalizing": self.equalizing["verdict"],
            "conserving": self.conserving["verdict"],
        }

    @property
    def optimal(self) -> bool:
        return self.thrifty["verdict"] and self.equalizing["verdict"]

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self, model: ReachAvoidModel | None = None) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "start": model.states[self.start] if model is not None else self.start,
            "n_traj": self.n_traj,
            "seed": self.seed,
            "horizon_cap": self.horizon_cap,
            "z_threshold": Z_THRESHOLD,
            "min_survivors": MIN_SURVIVORS,
            "hit_probability": self.hit,
            "drift": self.drift,
            "lambda": self.lambda_estimate,
            "thrifty": self.thrifty,
            "equalizing": self.equalizing,
            "conserving": self.conserving,
            "candidate": self.candidate,
            "verdicts": self.verdicts,
            "passed": self.passed,
        }


def _mean_se(x: np.ndarray, resolution: float = 0.0) -> tuple[float, float]:
    """Sample mean and its standard error, floored at ``resolution / n``.

    The floor keeps a constant sample (e.g. no rare event observed) from
    claiming zero uncertainty; ``resolution`` is the range of one sample.
    """
    if x.size == 0:
        return 0.0, 0.0
    mean = float(x.mean())
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return mean, max(se, resolution / x.size)


def martingale_diagnostics(
    model: ReachAvoidModel,
    policy,
    value,
    start,
    n_traj: int = 100_000,
    seed: int = 0,
    horizon_cap: int = DEFAULT_HORIZON,
    mode: str = "optimal",
    conserve_tol: float = 1e-8,
    threads: int | None = None,
) -> MartingaleReport:
    """Check the martingale characterization of ``policy`` empirically.

    Parameters
    ----------
    value : array_like
        ``V*`` (``mode="optimal"``) or a candidate ``V'`` in boundary form
        (``mode="candidate"``).
    mode : {"optimal", "candidate"}
        In candidate mode the report certifies ``V'(start)`` as the success
        probability when the ζ'-process shows no drift.

    Notes
    -----
    Every verdict compares a statistic with three standard errors.  The
    per-step drift is conditional on the path not having stopped; steps with
    fewer than ``MIN_SURVIVORS`` paths are reported but marked unreliable and
    do not enter the verdict.  Λ is estimated as the mean of ζ_N at the
    largest N reached by at least ``MIN_SURVIVORS`` paths.  The equalizing
    tail uses the last observed state of each path, so it is nonzero only
    for truncated paths.  The conserving check uses exact one-step sums.
    """
    if mode not in ("optimal", "candidate"):
        raise ValueError("mode must be 'optimal' or 'candidate'")
    value = check_boundary_form(model, value, atol=1e-12)
    sample = sample_trajectories(model, policy, start, n_traj, horizon_cap, seed, threads)
    ts = sample.trajectories
    x0 = sample.start
    hit = {"estimate": sample.estimate, "std_error": sample.std_error, "ci95": list(sample.ci),
           "truncation_rate": sample.truncation_rate}

    if not len(ts):
        # start on the boundary: nothing to test, every statistic is exact
        trivial = {"verdict": True, "gap": 0.0, "std_error": 0.0}
        return MartingaleReport(
            mode, x0, 0, seed, horizon_cap, hit,
            {"verdict": True, "steps": [], "reliable_steps": 0, "worst_z": 0.0},
            {"N": 0, "estimate": float(value[x0]), "std_error": 0.0},
            dict(trivial), {"verdict": True, "tail": 0.0, "std_error": 0.0, "gap_to_estimate": 0.0},
            {"verdict": True, "violations": 0, "visits": 0, "fraction": 0.0, "tolerance": conserve_tol},
            {"verdict": abs(value[x0] - sample.estimate) <= _ATOL, "value": float(value[x0]),
             "gap": abs(float(value[x0]) - sample.estimate), "std_error": 0.0} if mode == "candidate" else None,
        )

    zeta = zeta_table(model, value, ts)
    step = ts.step_index()
    lengths = ts.lengths

    # per-step drift ζ_{n+1} - ζ_n on {T > n}
    has_prev = step > 0
    inc = zeta[has_prev] - zeta[np.flatnonzero(has_prev) - 1]
    n_of_inc = step[has_prev] - 1
    n_steps = int(lengths.max())
    count = np.bincount(n_of_inc, minlength=n_steps)
    total = np.bincount(n_of_inc, weights=inc, minlength=n_steps)
    total_sq = np.bincount(n_of_inc, weights=inc * inc, minlength=n_steps)
    steps = []
    verdict = True
    supermart = True
    worst = 0.0
    exact_nonzero = 0
    reliable_steps = 0
    for n in range(n_steps):
        c = int(count[n])
        mean = total[n] / c
        var = max(total_sq[n] - c * mean * mean, 0.0) / (c - 1) if c > 1 else 0.0
        se = float(np.sqrt(var / c))
        reliable = c >= MIN_SURVIVORS
        # z is undefined (null in JSON) when every survivor moved by the same amount
        z = float(mean / se) if se > 0 else None
        if reliable:
            reliable_steps += 1
            verdict &= _verdict_le(abs(mean), se)
            supermart &= _verdict_le(mean, se)
            if z is None:
                exact_nonzero += abs(mean) > _ATOL
            elif abs(z) > abs(worst):
                worst = z
        steps.append({"step": n, "mean": float(mean), "std_error": se, "survivors": c, "z": z,
                      "reliable": reliable})
    drift = {"verdict": bool(verdict), "supermartingale": bool(supermart), "reliable_steps": reliable_steps,
             "worst_z": worst, "exact_nonzero_steps": int(exact_nonzero), "steps": steps}

    # Λ: E[ζ_N] at the largest N reached by MIN_SURVIVORS paths
    reached = np.bincount(lengths, minlength=n_steps + 1)[::-1].cumsum()[::-1]
    ok = np.flatnonzero(reached >= MIN_SURVIVORS)
    N = int(ok.max()) if ok.size else 0
    zeta_N = zeta[ts.offsets[:-1] + np.minimum(N, lengths)]
    lam, lam_se = _mean_se(zeta_N, 1.0)
    lambda_estimate = {"N": N, "estimate": lam, "std_error": lam_se}

    thrifty_gap = abs(float(value[x0]) - lam)
    thrifty = {"verdict": _verdict_le(thrifty_gap, lam_se), "gap": thrifty_gap, "std_error": lam_se,
               "threshold": Z_THRESHOLD * lam_se}

    last = ts.final_states
    prev_last = ts.states[ts.offsets[1:] - 2 + (lengths == 0)]
    tail_terms = model.decision[prev_last] * (value * model.safe)[last]
    tail_terms = np.where(ts.outcomes == Outcome.TRUNCATED, tail_terms, 0.0)
    tail, tail_se = _mean_se(tail_terms, 1.0)
    equalizing = {"verdict": _verdict_le(tail, tail_se), "tail": tail, "std_error": tail_se,
                  "threshold": Z_THRESHOLD * tail_se, "gap_to_estimate": abs(lam - sample.estimate)}

    in_play = step < np.repeat(lengths, np.diff(ts.offsets))
    visited_x = ts.states[in_play]
    visited_a = ts.actions
    q = action_values(model, value)
    gaps = np.abs(q[visited_x, visited_a] - value[visited_x])
    violations = int(np.sum(gaps > conserve_tol))
    conserving = {"verdict": violations == 0, "violations": violations, "visits": int(gaps.size),
                  "fraction": violations / gaps.size if gaps.size else 0.0, "tolerance": conserve_tol,
                  "max_gap": float(gaps.max()) if gaps.size else 0.0}

    candidate = None
    if mode == "candidate":
        gap = abs(float(value[x0]) - sample.estimate)
        se = max(sample.std_error, 1.0 / sample.n_traj)
        candidate = {"verdict": bool(drift["verdict"] and _verdict_le(gap, se)),
                     "value": float(value[x0]), "gap": gap, "std_error": se,
                     "threshold": Z_THRESHOLD * se}

    return MartingaleReport(mode, x0, sample.n_traj, seed, horizon_cap, hit, drift, lambda_estimate,
                            thrifty, equalizing, conserving, candidate)


# ---------------------------------------------------------------------------
# discounted reach: three estimators of V1
# ---------------------------------------------------------------------------


def discounted_crosscheck_v1(
    model: ReachAvoidModel,
    policy,
    alpha: float,
    start,
    n_traj: int = 100_000,
    seed: int = 0,
    horizon_cap: int = DEFAULT_HORIZON,
    threads: int | None = None,
) -> dict[str, Any]:
    """Estimate ``E[α^τ; τ < τ']`` three ways and compare them.

    ``direct``: mean of ``α^τ 1{τ<τ'}`` over sampled paths.
    ``geometric_kill``: ``(1-α)^{-1} P(τ̃ = τ, τ < τ')`` with an independent
    ``τ̃ ~ Geometric`` (``P(τ̃ = n) = (1-α) α^n``).
    ``geometric_horizon``: ``E[sum_{t<=τ̃∧τ∧τ'} 1_O(x_t)]``, the other
    representation through ``τ̃``.
    ``solver``: linear evaluation of the discounted reward ``1_O`` for the policy.

    Agreement between two Monte Carlo estimators uses the standard error of
    their paired difference; agreement with the solver uses the estimator's own.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    x0 = model.state_index(start)
    spec = make_variant("V1", model, alpha=alpha)
    solver = float(evaluate_reward(model, spec, policy)[x0])
    if not model.decision[x0]:
        exact = 1.0 if model.target[x0] else 0.0
        ests = {k: {"estimate": exact, "std_error": 0.0} for k in ("direct", "geometric_kill", "geometric_horizon")}
        ests["solver"] = {"estimate": solver, "std_error": 0.0}
        return {"alpha": alpha, "start": model.states[x0], "n_traj": 0, "estimates": ests,
                "agreement": {}, "agree": solver == exact}

    sample = sample_trajectories(model, policy, x0, n_traj, horizon_cap, seed, threads)
    ts = sample.trajectories
    T = ts.lengths
    hit = ts.outcomes == Outcome.HIT_TARGET
    n_blocks = -(-n_traj // BLOCK_SIZE)
    tau_tilde = np.concatenate([
        block_rng(seed, b, stream=1).geometric(1.0 - alpha, size=BLOCK_SIZE) - 1 for b in range(n_blocks)
    ])[:n_traj]
    samples = {
        "direct": np.where(hit, alpha ** T.astype(float), 0.0),
        "geometric_kill": np.where(hit & (tau_tilde == T), 1.0 / (1.0 - alpha), 0.0),
        "geometric_horizon": np.where(hit & (T <= tau_tilde), 1.0, 0.0),
    }
    span = {"direct": 1.0, "geometric_kill": 1.0 / (1.0 - alpha), "geometric_horizon": 1.0}
    ests = {}
    for k, s in samples.items():
        mean, se = _mean_se(s, span[k])
        ests[k] = {"estimate": mean, "std_error": se}
    ests["solver"] = {"estimate": solver, "std_error": 0.0}

    agreement = {}
    names = list(samples)
    for i, a in enumerate(names):
        gap = abs(ests[a]["estimate"] - solver)
        se = ests[a]["std_error"]
        agreement[f"{a}~solver"] = {"gap": gap, "std_error": se, "agree": _verdict_le(gap, se)}
        for b in names[i + 1:]:
            diff_mean, diff_se = _mean_se(samples[a] - samples[b], span[a] + span[b])
            agreement[f"{a}~{b}"] = {"gap": abs(diff_mean), "std_error": diff_se,
                                     "agree": _verdict_le(abs(diff_mean), diff_se)}
    return {
        "alpha": alpha,
        "start": model.states[x0],
        "n_traj": n_traj,
        "estimates": ests,
        "agreement": agreement,
        "agree": all(v["agree"] for v in agreement.values()),
    }
