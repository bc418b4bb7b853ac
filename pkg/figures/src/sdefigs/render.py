"""Figure builders for drift traces and convergence tables."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import check_schema, harness_slopes, merge_columns, read_csv  # noqa: E402

#: defects at machine zero are floored here so log axes stay finite
DEFECT_FLOOR = 1e-16

_LINESTYLES = ("-", ":", "--", "-.")


@dataclass
class FigureSpec:
    inputs: list
    kind: str  # "drift" or "convergence"
    out: str
    styles: dict = field(default_factory=dict)  # method -> color override
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in ("drift", "convergence"):
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _color_cycle(styles: dict):
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    assigned = {}

    def color_for(method):
        if method in styles:
            return styles[method]
        if method not in assigned:
            assigned[method] = cycle[len(assigned) % len(cycle)]
        return assigned[method]

    return color_for


def _render_drift(ax, columns, styles):
    color_for = _color_cycle(styles)
    defect_cols = sorted(c for c in columns if c.startswith("defect"))
    methods = list(dict.fromkeys(columns["method"]))
    for method in methods:
        sel = columns["method"] == method
        color = color_for(method)
        for di, col in enumerate(defect_cols):
            style = _LINESTYLES[di % len(_LINESTYLES)]
            label = method if len(defect_cols) == 1 else f"{method} {col}"
            first = True
            for pid in np.unique(columns["path_id"][sel]):
                mask = sel & (columns["path_id"] == pid)
                order = np.argsort(columns["t"][mask])
                t = columns["t"][mask][order]
                d = np.maximum(columns[col][mask][order], DEFECT_FLOOR)
                (line,) = ax.plot(
                    t, d, style, color=color, lw=0.8, alpha=0.8,
                    label=label if first else None,
                )
                line.set_gid(f"{method}:{col}:{int(pid)}")
                first = False
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("manifold defect")
    ax.legend(loc="best", fontsize=8)


def _render_convergence(ax, columns, styles):
    color_for = _color_cycle(styles)
    slopes = {}
    for method in dict.fromkeys(columns["method"]):
        sel = columns["method"] == method
        h = columns["h"][sel]
        rmse = columns["rmse"][sel]
        order = np.argsort(h)
        h, rmse = h[order], rmse[order]
        good = np.isfinite(rmse) & (rmse > 0)
        slope = float("nan")
        if good.sum() >= 2:
            slope = float(np.polyfit(np.log2(h[good]), np.log2(rmse[good]), 1)[0])
        slopes[method] = slope
        (line,) = ax.plot(
            h, np.maximum(rmse, DEFECT_FLOOR), "o-",
            color=color_for(method), label=f"{method} (slope {slope:.3f})",
        )
        line.set_gid(f"{method}")
        if "stderr" in columns:
            err = columns["stderr"][sel][order]
            ax.errorbar(h, np.maximum(rmse, DEFECT_FLOOR), yerr=err, fmt="none",
                        ecolor=color_for(method), alpha=0.5)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("step size h")
    ax.set_ylabel("strong error at T")
    ax.legend(loc="best", fontsize=8)
    return slopes


def render(spec: FigureSpec):
    """Build and write the figure; returns (figure, computed slopes).

    An empty CSV produces empty axes and a warning rather than an error.
    """
    parts = []
    meta = []
    for path in spec.inputs:
        m, cols = read_csv(path)
        meta.extend(m)
        check_schema(cols, spec.kind, path)
        parts.append(cols)
    columns = merge_columns(parts)

    fig, ax = plt.subplots(figsize=(7.0, 4.2), dpi=spec.dpi)
    slopes = {}
    if len(next(iter(columns.values()))) == 0:
        warnings.warn(f"no data rows in {spec.inputs}; rendering empty axes",
                      stacklevel=2)
        ax.set_title("no data")
    elif spec.kind == "drift":
        _render_drift(ax, columns, spec.styles)
    else:
        slopes = _render_convergence(ax, columns, spec.styles)
    fig.tight_layout()
    metadata = {"Software": "sdefigs"}
    if spec.out.endswith(".pdf"):
        metadata = {"CreationDate": None}
    fig.savefig(spec.out, metadata=metadata)
    plt.close(fig)
    return fig, {"slopes": slopes, "harness_slopes": harness_slopes(meta)}
