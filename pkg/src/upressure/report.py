"""Figures and delimited artifacts written by the CLI.

Figures use the Agg backend with fixed metadata and a fixed SVG hash salt, so
repeated runs produce identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "upressure"
matplotlib.rcParams["path.simplify"] = False

GRID_HEADER = ("base_index", "eps", "n", "offset", "log_sum_sep", "log_sum_span")


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path: Path, header, rows, meta: dict) -> Path:
    """CSV with ``# key: value`` metadata lines, a header row and '\\n' line endings."""
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), newline="")
    return path


def write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _save(fig, path: Path, meta: dict):
    path = Path(path)
    desc = ", ".join(f"{k}={v}" for k, v in meta.items())
    if path.suffix == ".svg":
        md = {"Date": None, "Description": desc}
    else:
        md = {"Software": "upressure", "Description": desc}
    fig.savefig(path, metadata=md, dpi=100)
    plt.close(fig)
    return path


def growth_figure(estimates: dict, path: Path, meta: dict) -> Path:
    """``log`` of the best weighted sum against ``n``, one line per ``eps``."""
    fig, axes = plt.subplots(1, len(estimates), figsize=(4.5 * len(estimates), 3.6), squeeze=False)
    for ax, (name, est) in zip(axes[0], estimates.items()):
        n = est.params.n_values
        best = est.log_sep.max(axis=(0, 3))
        for e, eps in enumerate(est.params.eps_list):
            ax.plot(n, best[e], marker="o", ms=3, label=f"eps={eps:g}")
        ax.set_title(f"{name}: P ~ {est.value:.4f}")
        ax.set_xlabel("n")
        ax.set_ylabel("log weighted sum")
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path, meta)


def derivative_figure(probe, path: Path, meta: dict) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    ax.errorbar(probe.t_grid, probe.values, yerr=probe.spreads, marker="o", ms=3, capsize=2)
    ax.set_xlabel("t")
    ax.set_ylabel("P(phi + t psi)")
    ax.set_title(f"d+ = {probe.d_plus:.4f}, d- = {probe.d_minus:.4f}")
    fig.tight_layout()
    return _save(fig, path, meta)


def scale_figure(probe: dict, path: Path, meta: dict) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    ax.plot(probe["t"], probe["values"], marker="o", ms=3)
    ax.axvline(1.0, color="0.6", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("P(t phi^u) - t int phi^u dmu")
    fig.tight_layout()
    return _save(fig, path, meta)


def leaf_figure(leaf, path: Path, meta: dict) -> Path:
    """Traced leaf as a polyline in the unit square, split where it wraps."""
    pts = leaf.points[:, :2]
    jumps = np.nonzero(np.any(np.abs(np.diff(pts, axis=0)) > 0.5, axis=1))[0] + 1
    fig, ax = plt.subplots(figsize=(4, 4))
    for piece in np.split(pts, jumps):
        ax.plot(piece[:, 0], piece[:, 1], lw=1.0, color="C0")
    ax.plot(*leaf.base[:2], marker="o", ms=4, color="C3")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    fig.tight_layout()
    return _save(fig, path, meta)
