"""SVG figures of sweep results.

The x-axis is I_XY / ln n with reference lines at 1 (partial recovery) and
2 (exact recovery).  Each file embeds the plotted numbers as a CSV block
inside ``<metadata id="gaussalign-data">`` so they stay machine-readable.
"""

from __future__ import annotations

import csv
import io
import re
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import MultipleLocator  # noqa: E402

from .fileio import fmt_float  # noqa: E402

KINDS = ("success-vs-I", "errors-vs-I")

_RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "svg.hashsalt": "gaussalign",
    "svg.fonttype": "none",
}


def _data_island(cells, kind: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "success-vs-I":
        w.writerow(["n", "d", "info_ratio", "map_success_rate", "map_success_halfwidth"])
        for c in cells:
            w.writerow([c.n, c.d, fmt_float(c.info_ratio), _num(c.map_success_rate), _num(c.map_success_halfwidth)])
    else:
        w.writerow(["n", "d", "tau", "info_ratio", "bht_mean_fn", "bht_mean_fn_halfwidth", "bht_mean_fp", "bht_mean_fp_halfwidth"])
        for c in cells:
            w.writerow(
                [c.n, c.d, _num(c.tau), fmt_float(c.info_ratio), _num(c.bht_mean_fn), _num(c.bht_mean_fn_halfwidth),
                 _num(c.bht_mean_fp), _num(c.bht_mean_fp_halfwidth)]
            )
    return buf.getvalue()


def _num(x) -> str:
    return "" if x is None else fmt_float(float(x))


def _hw(x):
    return 0.0 if x is None or x != x else x


def read_data_island(path) -> list[dict]:
    """Parse the embedded CSV block back out of an SVG written by :func:`emit_plot`."""
    text = Path(path).read_text()
    m = re.search(r'<metadata id="gaussalign-data"><!\[CDATA\[\n(.*?)\]\]></metadata>', text, re.S)
    if m is None:
        raise ValueError(f"{path} has no embedded data table")
    return list(csv.DictReader(io.StringIO(m.group(1))))


def emit_plot(cells: Sequence, kind: str, path) -> Path:
    if not cells:
        raise ValueError("nothing to plot")
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    path = Path(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        by_n: dict[int, list] = {}
        for c in cells:
            by_n.setdefault(c.n, []).append(c)
        for n, group in sorted(by_n.items()):
            group = sorted(group, key=lambda c: (c.info_ratio, c.tau if c.tau is not None else 0.0))
            x = [c.info_ratio for c in group]
            if kind == "success-vs-I":
                pts = [(xi, c) for xi, c in zip(x, group) if c.map_success_rate is not None]
                ax.errorbar(
                    [p[0] for p in pts],
                    [p[1].map_success_rate for p in pts],
                    yerr=[_hw(p[1].map_success_halfwidth) for p in pts],
                    marker="o", ms=4, lw=1.2, capsize=2, label=f"MAP, n={n}",
                )
            else:
                pts = [(xi, c) for xi, c in zip(x, group) if c.bht_mean_fn is not None]
                for attr, marker, name in (("fn", "v", "false negatives"), ("fp", "^", "false positives")):
                    ax.errorbar(
                        [p[0] for p in pts],
                        [getattr(p[1], f"bht_mean_{attr}") for p in pts],
                        yerr=[_hw(getattr(p[1], f"bht_mean_{attr}_halfwidth")) for p in pts],
                        marker=marker, ms=4, lw=1.0, capsize=2, label=f"{name}, n={n}",
                    )
        for ref, label in ((1.0, "I = ln n"), (2.0, "I = 2 ln n")):
            ax.axvline(ref, color="0.4", ls="--", lw=0.8)
            ax.annotate(label, (ref, 1.0), xycoords=("data", "axes fraction"), xytext=(3, -10),
                        textcoords="offset points", fontsize=7, color="0.3")
        ax.xaxis.set_major_locator(MultipleLocator(0.5))
        ax.set_xlabel("I_XY / ln n")
        if kind == "success-vs-I":
            ax.set_ylabel("exact recovery rate")
            ax.set_ylim(-0.05, 1.05)
        else:
            ax.set_ylabel("mean error count")
            ax.set_yscale("symlog", linthresh=1.0)
        lo = min(min(c.info_ratio for c in cells), 1.0) - 0.25
        hi = max(max(c.info_ratio for c in cells), 2.0) + 0.25
        ax.set_xlim(lo, hi)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "gaussalign"})
        plt.close(fig)
    svg = buf.getvalue()
    island = f'<metadata id="gaussalign-data"><![CDATA[\n{_data_island(cells, kind)}]]></metadata>\n'
    tag_end = svg.index(">", svg.index("<svg")) + 1
    svg = svg[:tag_end] + "\n" + island + svg[tag_end:]
    path.write_text(svg)
    return path
