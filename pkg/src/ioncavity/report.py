"""Delimited output and figure rendering for the scenario commands.

Every CSV is self-describing: a '#'-prefixed metadata block embeds the full
resolved configuration (and any summary quantities), followed by the column
header and the data rows. Floats are rendered with 12 significant digits and
no timestamps are written, so identical runs produce identical bytes.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FLOAT_FORMAT = "%.12g"


def _render(value) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def write_csv(path, metadata: dict, columns, rows, summary: dict | None = None):
    lines = ["# ioncavity output"]
    for key in metadata:
        lines.append(f"# {key} = {_render(metadata[key])}")
    if summary:
        for key in summary:
            lines.append(f"# summary.{key} = {_render(summary[key])}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_render(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_xy_csv(path):
    """Two-column CSV reader with line/column diagnostics; '#' lines skipped."""
    xs, ys = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            body = line.strip()
            if not body or body.startswith("#"):
                continue
            parts = body.split(",")
            if len(parts) < 2:
                raise ValueError(
                    f"{path}: line {line_no}: expected two comma-separated "
                    f"columns, got {body!r}"
                )
            try:
                xs.append(float(parts[0]))
            except ValueError:
                if line_no == 1 or (not xs and _looks_like_header(parts)):
                    continue           # tolerate a single header row
                raise ValueError(
                    f"{path}: line {line_no}, column 1: not a number: "
                    f"{parts[0]!r}"
                ) from None
            try:
                ys.append(float(parts[1]))
            except ValueError:
                raise ValueError(
                    f"{path}: line {line_no}, column 2: not a number: "
                    f"{parts[1]!r}"
                ) from None
    if not xs:
        raise ValueError(f"{path}: no data rows found")
    return np.asarray(xs), np.asarray(ys)


def _looks_like_header(parts) -> bool:
    try:
        float(parts[0])
        return False
    except ValueError:
        return True


def figure_path(out_path) -> str:
    base = str(out_path)
    if base.endswith(".csv"):
        base = base[:-4]
    return base + ".png"


def plot_sweep(records, variable: str, out_png: str):
    x = np.array([getattr(r, f"{variable}_mhz") for r in records])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(x, [r.p_cavity_norm for r in records], label="cavity output")
    ax.plot(x, [r.p_free_norm for r in records], label="free space")
    ax.plot(x, [r.p_total_norm for r in records], label="total", ls="--")
    ax.axhline(1.0, color="0.6", lw=0.8)
    ax.set_xlabel(f"{variable} / 2pi (MHz)")
    ax.set_ylabel("emission rate / bare-atom rate")
    ax.legend()
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_g2(tau, ideal, convolved, out_png: str):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    t_ns = np.asarray(tau) * 1e9
    ax.plot(t_ns, ideal, label="ideal")
    ax.plot(t_ns, convolved, label="with detector jitter")
    ax.axhline(1.0, color="0.6", lw=0.8)
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("g2")
    ax.legend()
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_minima(rows, out_png: str):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    da = [r["delta_a_mhz"] for r in rows]
    ax.plot(da, [r["delta_c_min_numeric_mhz"] for r in rows], "o",
            label="numeric minimum")
    ax.plot(da, [r["delta_c_min_eq_interference_mhz"] for r in rows], "-",
            label="interference condition")
    ax.plot(da, [r["delta_c_min_linear_text_mhz"] for r in rows], ":",
            label="linear (1 + 2 C0)")
    ax.plot(da, [r["delta_c_min_linear_series_mhz"] for r in rows], "--",
            label="linear (1 + C0)")
    ax.set_xlabel("delta_a / 2pi (MHz)")
    ax.set_ylabel("delta_c of free-space minimum / 2pi (MHz)")
    ax.legend()
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
