"""Figure rendering for emitted JSON artifacts.

Dispatches on the artifact's ``schema`` field and writes PNG figures next to
the input (or into ``--out-dir``).  Imported lazily by the CLI so matplotlib
never loads during computational runs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

from .errors import InvalidArgumentError


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _ratio(pair) -> float:
    return int(pair[0]) / int(pair[1])


def render(input_path: str, out_dir: Optional[str] = None) -> list[Path]:
    """Render figures for one artifact or every .json file in a directory."""
    path = Path(input_path)
    if path.is_dir():
        produced: list[Path] = []
        for child in sorted(path.glob("*.json")):
            produced.extend(render(str(child), out_dir))
        return produced
    doc = json.loads(path.read_text(encoding="utf-8"))
    schema = doc.get("schema", "")
    target_dir = Path(out_dir) if out_dir else path.parent
    target_dir.mkdir(parents=True, exist_ok=True)
    target = target_dir / (path.stem + ".png")
    renderer = _RENDERERS.get(schema.split("/")[0])
    if renderer is None:
        return []
    renderer(doc, target)
    return [target]


def _render_delta_measures(doc: dict, target: Path) -> None:
    plt = _plt()
    qs = [row["q"] for row in doc["rows"]]
    ms = [row["measure_float"] for row in doc["rows"]]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.loglog(qs, ms, lw=0.8)
    ax.set_xlabel("q")
    ax.set_ylabel("measure of the approximation set")
    ax.set_title(doc.get("delta", ""))
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def _render_montecarlo(doc: dict, target: Path) -> None:
    plt = _plt()
    hist = {int(k): v for k, v in doc["histogram"].items()}
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(list(hist.keys()), list(hist.values()), width=0.8)
    ax.axvline(doc["expected_float"], color="C1", ls="--", label="expected mean")
    ax.axvline(doc["mean_float"], color="C2", ls=":", label="observed mean")
    ax.set_xlabel("solved count per sample")
    ax.set_ylabel("frequency")
    ax.legend()
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def _render_trace(doc: dict, target: Path) -> None:
    plt = _plt()
    steps = doc["trace"]["steps"] if "trace" in doc else doc["steps"]
    if not steps:
        return
    idx = list(range(len(steps)))
    lo = [float(s["quality_after"]["float"]) for s in steps]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogy(idx, lo, marker="o", ms=3, lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("quality after step")
    labels = [s["case"] for s in steps]
    for i, lbl in zip(idx, labels):
        ax.annotate(lbl, (i, lo[i]), fontsize=6, rotation=45, xytext=(2, 4),
                    textcoords="offset points")
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def _render_window(doc: dict, target: Path) -> None:
    plt = _plt()
    if not doc.get("found", True):
        return
    names = ["sum_meas", "pair_sum", "cs_bound", "union_meas"]
    values = [_ratio(doc[n]) for n in names]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, values)
    ax.set_title(f"window [{doc['Q']}, {doc['R']}]")
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def _render_special_case(doc: dict, target: Path) -> None:
    plt = _plt()
    ts = [_ratio(e["t"]) for e in doc["ladder"]]
    ratios = [e["ratio_float"] for e in doc["ladder"]]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.loglog(ts, [max(r, 1e-30) for r in ratios], marker="s", ms=4)
    ax.set_xlabel("t")
    ax.set_ylabel("mu(B_t) * t / N^2")
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def _render_cf(doc: dict, target: Path) -> None:
    plt = _plt()
    qs, errs = [], []
    for row in doc["rows"]:
        if row["err"] is None:
            continue
        err = row["err"]["float"]
        if err > 0:
            qs.append(int(row["q"]))
            errs.append(err)
    if not qs:
        return
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.loglog(qs, errs, marker="o", ms=4, lw=0.8, label="|x - a/q|")
    ax.loglog(qs, [1.0 / (q * q) for q in qs], ls="--", lw=0.8, label="1/q^2")
    ax.set_xlabel("denominator q")
    ax.set_ylabel("convergent error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def _render_counterexample(doc: dict, target: Path) -> None:
    plt = _plt()
    js = [lvl["j"] for lvl in doc["levels"]]
    partial = [lvl["partial_sum_float"] for lvl in doc["levels"]]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(js, partial, marker="o")
    ax.set_xlabel("level j")
    ax.set_ylabel("partial sum of primorial-member masses")
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


_RENDERERS = {
    "delta-measures": _render_delta_measures,
    "montecarlo": _render_montecarlo,
    "compression-trace": _render_trace,
    "window-report": _render_window,
    "special-case": _render_special_case,
    "cf-table": _render_cf,
    "counterexample": _render_counterexample,
}
