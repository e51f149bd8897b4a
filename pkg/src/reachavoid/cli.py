"""Command-line front end: ``reachavoid {solve,simulate,verify,discretize,plot}``.

Exit codes: 0 success, 1 error, 2 value iteration did not converge,
3 a verification verdict failed.  Every JSON output carries a ``manifest``
recording the command, inputs (with SHA-256 digests), parameters, tool
version and a timestamp; apart from the timestamp, repeating a command
with the same manifest reproduces the output byte for byte.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .bellman import (
    BoundaryFormError,
    SolveResult,
    policy_from_dict,
    value_from_dict,
    value_iteration,
)
from .discretize import Linear1DSystem, build_grid_model, oracle_sidecar
from .linear import SingularChainError
from .model import InvalidModelError, ModelFormatError, ReachAvoidModel, load_model, model_to_dict, validate_model
from .plotting import plot_result
from .rewards import UnboundedRewardError, load_reward_spec, reward_spec_to_dict, reward_value_iteration
from .simulate import DEFAULT_HORIZON, martingale_diagnostics, sample_trajectories

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_ERROR", "EXIT_NOT_CONVERGED", "EXIT_VERIFY_FAILED"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_VERIFY_FAILED = 3


class CLIError(Exception):
    """Reported on stderr and mapped to exit code 1."""


def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_manifest(command: str, inputs: dict[str, str], parameters: dict[str, Any]) -> dict[str, Any]:
    return {
        "command": command,
        "inputs": {k: {"path": str(p), "sha256": _digest(p)} for k, p in inputs.items()},
        "parameters": parameters,
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }


def dumps(doc: Any) -> str:
    # json writes floats with repr, the shortest string that round-trips exactly
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _emit(doc: dict[str, Any], out: str | None) -> None:
    text = dumps(doc)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _read_json(path: str) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CLIError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_model(path: str) -> ReachAvoidModel:
    try:
        return load_model(path)
    except OSError as exc:
        raise CLIError(f"{path}: {exc.strerror}") from None
    except ModelFormatError as exc:
        raise CLIError(f"{path}: {exc}") from None


def _require_valid(model: ReachAvoidModel, path: str) -> None:
    report = validate_model(model)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not report.ok:
        lines = "\n".join(f"  {v}" for v in report.violations)
        raise CLIError(f"{path}: invalid model\n{lines}")


def _section(doc: Any, key: str, path: str) -> dict:
    """``doc[key]`` if ``doc`` is a command output, else ``doc`` itself."""
    if not isinstance(doc, dict):
        raise CLIError(f"{path}: expected a JSON object")
    inner = doc.get(key, doc)
    if not isinstance(inner, dict):
        raise CLIError(f"{path}: '{key}' must be an object")
    return inner


def _load_policy(model: ReachAvoidModel, path: str) -> np.ndarray:
    try:
        return policy_from_dict(model, _section(_read_json(path), "policy", path))
    except KeyError as exc:
        raise CLIError(f"{path}: unknown id {exc.args[0]!r}") from None
    except ValueError as exc:
        raise CLIError(f"{path}: {exc}") from None


def _load_value(model: ReachAvoidModel, path: str) -> np.ndarray:
    try:
        return value_from_dict(model, _section(_read_json(path), "value", path))
    except BoundaryFormError as exc:
        raise CLIError(f"{path}: value not in boundary form: {exc}") from None
    except KeyError as exc:
        raise CLIError(f"{path}: unknown state {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise CLIError(f"{path}: {exc}") from None


def _start_index(model: ReachAvoidModel, start: str) -> int:
    if start not in model.states:
        raise CLIError(f"unknown start state {start!r}")
    return model.state_index(start)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    model = _load_model(args.model)
    _require_valid(model, args.model)
    inputs = {"model": args.model}
    params: dict[str, Any] = {"tolerance": args.tol, "max_iter": args.max_iter}
    if args.reward:
        inputs["reward"] = args.reward
        try:
            spec = load_reward_spec(model, args.reward)
        except OSError as exc:
            raise CLIError(f"{args.reward}: {exc.strerror}") from None
        result = reward_value_iteration(model, spec, tolerance=args.tol, max_iter=args.max_iter)
    else:
        spec = None
        result = value_iteration(model, tolerance=args.tol, max_iter=args.max_iter)
    doc = {"manifest": make_manifest("solve", inputs, params), **_solve_doc(model, result)}
    if spec is not None:
        doc["reward"] = reward_spec_to_dict(model, spec)
    _emit(doc, args.out)
    if not result.converged:
        print(f"not converged after {result.iterations} sweeps (residual {result.residual:.3g})", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _solve_doc(model: ReachAvoidModel, result: SolveResult) -> dict[str, Any]:
    doc = result.to_dict(model)
    if model.coordinates is not None:
        doc["coordinates"] = {s: float(c) for s, c in zip(model.states, model.coordinates)}
    return doc


def cmd_simulate(args) -> int:
    model = _load_model(args.model)
    _require_valid(model, args.model)
    policy = _load_policy(model, args.policy)
    x0 = _start_index(model, args.start)
    params = {"start": args.start, "n_traj": args.n, "seed": args.seed, "horizon_cap": args.horizon}
    res = sample_trajectories(model, policy, x0, args.n, horizon_cap=args.horizon, seed=args.seed)
    manifest = make_manifest("simulate", {"model": args.model, "policy": args.policy}, params)
    _emit({"manifest": manifest, **res.to_dict(model)}, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    model = _load_model(args.model)
    _require_valid(model, args.model)
    policy = _load_policy(model, args.policy)
    value = _load_value(model, args.value)
    x0 = _start_index(model, args.start)
    mode = "candidate" if args.candidate else "optimal"
    params = {"start": args.start, "n_traj": args.n, "seed": args.seed, "horizon_cap": args.horizon,
              "mode": mode, "conserve_tol": args.conserve_tol}
    report = martingale_diagnostics(model, policy, value, x0, n_traj=args.n, seed=args.seed,
                                    horizon_cap=args.horizon, mode=mode, conserve_tol=args.conserve_tol)
    inputs = {"model": args.model, "policy": args.policy, "value": args.value}
    _emit({"manifest": make_manifest("verify", inputs, params), **report.to_dict(model)}, args.out)
    failed = [k for k, ok in report.verdicts.items() if not ok]
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def cmd_discretize(args) -> int:
    try:
        system = Linear1DSystem(
            action_range=tuple(args.action_range),
            noise_std=args.noise_std,
            target_interval=tuple(args.target),
            safe_interval=tuple(args.safe),
            grid_step=args.grid_step,
            action_grid_count=args.action_count,
        )
    except ValueError as exc:
        raise CLIError(f"invalid system: {exc}") from None
    model = build_grid_model(system)
    manifest = make_manifest("discretize", {}, system.to_dict())
    _emit({"manifest": manifest, **model_to_dict(model)}, args.out)
    sidecar = args.sidecar
    if sidecar is None and args.out not in (None, "-"):
        out = Path(args.out)
        sidecar = str(out.with_name(out.stem + ".oracle.json"))
    if sidecar is not None:
        _emit({"manifest": manifest, **oracle_sidecar(system, model)}, sidecar)
    return EXIT_OK


def cmd_plot(args) -> int:
    doc = _read_json(args.result)
    if not isinstance(doc, dict) or not isinstance(doc.get("value"), dict):
        raise CLIError(f"{args.result}: expected a result with a 'value' object")
    manifest = make_manifest("plot", {"result": args.result}, {"title": args.title})
    manifest.pop("timestamp")
    plot_result(doc, args.out, title=args.title, description=dumps(manifest))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _nonneg_int(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reachavoid", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="optimal value and policy by value iteration")
    s.add_argument("model")
    s.add_argument("--reward", help="reward spec JSON (default: hitting probability)")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--max-iter", type=_nonneg_int, default=1_000_000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    def sampling(sp):
        sp.add_argument("--start", required=True, help="start state id")
        sp.add_argument("--n", type=_positive_int, default=100_000, help="number of trajectories")
        sp.add_argument("--seed", type=_nonneg_int, default=0)
        sp.add_argument("--horizon", type=_positive_int, default=DEFAULT_HORIZON, help="truncation horizon")
        sp.add_argument("--out")

    s = sub.add_parser("simulate", help="Monte Carlo estimate of the hitting probability")
    s.add_argument("model")
    s.add_argument("policy", help="policy JSON ({state: action}) or a solve output")
    sampling(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify", help="martingale diagnostics of a policy")
    s.add_argument("model")
    s.add_argument("policy", help="policy JSON ({state: action}) or a solve output")
    s.add_argument("value", help="value JSON ({state: prob}) or a solve output")
    s.add_argument("--candidate", action="store_true",
                   help="treat the value as a candidate to certify instead of the optimal value")
    s.add_argument("--conserve-tol", type=float, default=1e-8)
    sampling(s)
    s.set_defaults(func=cmd_verify)

    d = Linear1DSystem()
    s = sub.add_parser("discretize", help="grid model of x' = x + a + w")
    s.add_argument("--action-range", type=float, nargs=2, default=list(d.action_range), metavar=("LO", "HI"))
    s.add_argument("--noise-std", type=float, default=d.noise_std)
    s.add_argument("--target", type=float, nargs=2, default=list(d.target_interval), metavar=("LO", "HI"),
                   help="open target interval")
    s.add_argument("--safe", type=float, nargs=2, default=list(d.safe_interval), metavar=("LO", "HI"),
                   help="closed safe interval")
    s.add_argument("--grid-step", type=float, default=d.grid_step)
    s.add_argument("--action-count", type=int, default=d.action_grid_count)
    s.add_argument("--out")
    s.add_argument("--sidecar", help="oracle JSON path (default: <out>.oracle.json)")
    s.set_defaults(func=cmd_discretize)

    s = sub.add_parser("plot", help="SVG of a value function and policy")
    s.add_argument("result", help="solve output or {'value': ..., 'policy': ...}")
    s.add_argument("--out", required=True)
    s.add_argument("--title")
    s.set_defaults(func=cmd_plot)
    return p


_EXPECTED = (
    CLIError,
    ModelFormatError,
    InvalidModelError,
    BoundaryFormError,
    SingularChainError,
    UnboundedRewardError,
    ValueError,
    OSError,
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _EXPECTED as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
