"""Static SVG rendering of a value function and its policy."""

from __future__ import annotations

import math
from typing import Any

import matplotlib
from matplotlib.figure import Figure

__all__ = ["plot_result", "layout_positions"]


def _as_float(s) -> float | None:
    try:
        x = float(s)
    except (TypeError, ValueError):
        return None
    return x if math.isfinite(x) else None


def layout_positions(states, coordinates: dict | None = None) -> list[float] | None:
    """Positions on a line when the layout is one-dimensional, else ``None``.

    Explicit coordinates win; otherwise every state id must parse as a number.
    """
    if coordinates:
        pos = [_as_float(coordinates.get(s)) for s in states]
    else:
        pos = [_as_float(s) for s in states]
    if any(p is None for p in pos):
        return None
    return pos


def plot_result(result: dict[str, Any], out, title: str | None = None, description: str | None = None) -> str:
    """Write value-by-state and chosen actions to ``out`` as SVG.

    ``result`` holds ``value`` (``{state: prob}``), optionally ``policy``
    (``{state: action}``) and ``coordinates`` (``{state: x}``).  A 1-D
    layout is drawn as a line; anything else falls back to a bar chart.
    Returns ``"line"`` or ``"bar"``.
    """
    value = result["value"]
    policy = result.get("policy") or {}
    states = list(value)
    pos = layout_positions(states, result.get("coordinates"))
    kind = "bar" if pos is None else "line"

    fig = Figure(figsize=(7.0, 5.0))
    ax_v, ax_a = fig.subplots(2, 1, sharex=True)
    if kind == "line":
        order = sorted(range(len(states)), key=lambda i: pos[i])
        xs = [pos[i] for i in order]
        ax_v.plot(xs, [value[states[i]] for i in order], marker=".", drawstyle="steps-mid")
    else:
        xs = list(range(len(states)))
        order = xs
        ax_v.bar(xs, [value[s] for s in states])
        ax_a.set_xticks(xs, states, rotation=90 if len(states) > 12 else 0)
    ax_v.set_ylabel("value")
    ax_v.set_ylim(-0.05, 1.05)

    chosen = [i for i in order if states[i] in policy]
    if chosen:
        acts = [policy[states[i]] for i in chosen]
        numeric = [_as_float(a) for a in acts]
        px = [xs[order.index(i)] for i in chosen]
        if all(a is not None for a in numeric):
            ax_a.plot(px, numeric, marker=".", linestyle="none")
        else:
            labels = sorted(set(acts))
            ax_a.plot(px, [labels.index(a) for a in acts], marker="o", linestyle="none")
            ax_a.set_yticks(range(len(labels)), labels)
    else:
        ax_a.text(0.5, 0.5, "no decision states", ha="center", va="center", transform=ax_a.transAxes)
    ax_a.set_ylabel("action")
    ax_a.set_xlabel("state" if kind == "bar" else "position")
    if title:
        ax_v.set_title(title)
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "reachavoid", "svg.fonttype": "path"}):
        metadata = {"Date": None}
        if description:
            metadata["Description"] = description
        fig.savefig(out, format="svg", metadata=metadata)
    return kind
