"""Write a scenario report as a table, a text summary and an SVG figure."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

TABLE_COLUMNS = ("exact", "empirical_exit", "reweighted_resurrected")
TABLE_HEADER = ("label_or_bin_left", "bin_right") + TABLE_COLUMNS


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _support(dists: dict):
    """Shared support of the report's distributions, as (left, right) cells."""
    ref = next(iter(dists.values()))
    for name, d in dists.items():
        if not d.same_support(ref):
            raise ValueError(f"distribution {name!r} has a different support")
    if ref.binned:
        return [(_fmt(a), _fmt(b)) for a, b in zip(ref.edges[:-1], ref.edges[1:])]
    return [(_fmt(l), "") for l in ref.labels]


def write_table(report, path: Path):
    dists = report.distributions()
    cells = _support(dists)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for i, (left, right) in enumerate(cells):
            row = [left, right]
            for col in TABLE_COLUMNS:
                row.append(_fmt(dists[col].mass[i]) if col in dists else "")
            w.writerow(row)


def summary_text(report) -> str:
    lines = [f"scenario: {report.name}", f"model: {report.model}", f"seed: {report.seed}", ""]
    if report.values:
        lines.append("statistics:")
        for k, v in report.values.items():
            if isinstance(v, float):
                v = f"{v:.10g}"
            lines.append(f"  {k}: {v}")
        lines.append("")
    lines.append("checks:")
    lines += ["  " + c.line() for c in report.checks]
    for w in report.warnings:
        lines.append(f"WARNING: {w}")
    for n in report.notes:
        lines.append(f"note: {n}")
    if report.timings:
        lines.append("")
        lines.append("timings (s): " + ", ".join(f"{k}={v:.3f}" for k, v in report.timings.items()))
    lines.append("")
    lines.append("OVERALL: " + ("PASS" if report.passed else "FAIL"))
    return "\n".join(lines) + "\n"


def write_figure(report, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    dists = report.distributions()
    ref = next(iter(dists.values()))
    with matplotlib.rc_context({"svg.hashsalt": report.name, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4))
        if ref.binned:
            finite = np.isfinite(ref.edges[1:])
            left = ref.edges[:-1][finite]
            width = np.diff(ref.edges)[finite]
            for name, style in (("empirical_exit", dict(alpha=0.45, color="C0")),
                                ("reweighted_resurrected", dict(alpha=0.35, color="C1"))):
                if name in dists:
                    ax.bar(left, dists[name].mass[finite] / width, width=width, align="edge",
                           label=name.replace("_", " "), **style)
            if "exact" in dists:
                ax.step(np.append(left, left[-1] + width[-1]),
                        np.append(dists["exact"].mass[finite] / width,
                                  dists["exact"].mass[finite][-1] / width[-1]),
                        where="post", color="k", lw=1.2, label="exact")
            ax.set_xlabel("exit position")
            ax.set_ylabel("density")
        else:
            # long truncations carry negligible mass far out; plot the visible window only
            peak = np.max([d.mass for d in dists.values()], axis=0)
            shown = np.flatnonzero(peak > 1e-4 * peak.max())
            window = slice(shown[0], shown[-1] + 1)
            labels = ref.labels[window]
            pos = np.arange(labels.size)
            if "empirical_exit" in dists:
                ax.bar(pos - 0.2, dists["empirical_exit"].mass[window], width=0.4, alpha=0.6,
                       label="empirical exit")
            if "reweighted_resurrected" in dists:
                ax.bar(pos + 0.2, dists["reweighted_resurrected"].mass[window], width=0.4,
                       alpha=0.6, label="reweighted resurrected")
            if "exact" in dists:
                ax.plot(pos, dists["exact"].mass[window], "k.-", lw=1, label="exact")
            ticks = pos[:: max(1, -(-labels.size // 20))]
            ax.set_xticks(ticks, [str(labels[t]) for t in ticks])
            ax.set_xlabel("exit state")
            ax.set_ylabel("probability")
        ax.set_title(report.name)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def emit_outputs(report, out_dir) -> list:
    """Write ``{name}_table.csv``, ``{name}_summary.txt`` and ``{name}_figure.svg``.

    Every distribution is validated before any file is touched.
    """
    dists = report.distributions()
    if not dists:
        raise ValueError("report has no distributions to write")
    for d in dists.values():
        d.validate()
    if report.resurrected is not None:
        report.resurrected.validate()
    _support(dists)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{report.name}_{kind}" for kind in ("table.csv", "summary.txt", "figure.svg")]
    write_table(report, paths[0])
    paths[1].write_text(summary_text(report))
    write_figure(report, paths[2])
    return paths
