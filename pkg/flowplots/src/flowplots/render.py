"""Figure and summary rendering.

Rendering never reinterprets numbers: the summary table echoes the CSV
terminal rows verbatim.  Log axes clip at the 1e-16 floor (residuals span
many decades).
"""

from __future__ import annotations

import os

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bundle import classify, load_refinement, load_series  # noqa: E402

FLOOR = 1e-16

RESIDUAL_FAMILIES = [
    ("structure_residuals", ["r1", "r2", "r3"]),
    ("integrability", ["compat_p", "compat_m", "norm_Np", "norm_Nm", "j2_defect"]),
    ("field_norms", ["norm_Rc", "norm_H", "norm_dH"]),
    ("gauge_and_positivity", ["norm_Xp", "norm_Xm", "min_eig_g"]),
]


def _clip(vals):
    arr = np.asarray(vals, dtype=float)
    return np.where(np.abs(arr) < FLOOR, FLOOR, np.abs(arr))


def render_series_figures(bundle, outdir):
    written = []
    t = bundle.columns["t"]
    for family, names in RESIDUAL_FAMILIES:
        present = [n for n in names if n in bundle.columns
                   and np.any(np.isfinite(bundle.columns[n]))]
        if not present:
            continue
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for name in present:
            vals = np.asarray(bundle.columns[name], dtype=float)
            mask = np.isfinite(vals)
            ax.semilogy(np.asarray(t)[mask], _clip(vals[mask]), label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("max-norm (floor clipped at 1e-16)")
        ax.set_title("%s: %s" % (bundle.scenario, family))
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        path = os.path.join(outdir, "%s_%s.png" % (bundle.scenario, family))
        fig.tight_layout()
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written


def fit_slope(resolutions, errors):
    """Least-squares order on log-log refinement data."""
    r = np.log2(np.asarray(resolutions, dtype=float))
    e = np.log2(_clip(errors))
    return float(-np.polyfit(r, e, 1)[0])


def render_refinement_figure(table, outdir, name="refinement"):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    slopes = {}
    for op, pairs in sorted(table.items()):
        res = [p[0] for p in pairs]
        err = [p[1] for p in pairs]
        slope = fit_slope(res, err)
        slopes[op] = slope
        ax.loglog(res, _clip(err), marker="o",
                  label="%s (order %.2f)" % (op, slope))
    ax.set_xlabel("resolution")
    ax.set_ylabel("max-norm error")
    ax.set_title("refinement orders (fitted slopes annotated)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    path = os.path.join(outdir, "%s.png" % name)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path, slopes


def render_report(csv_paths, outdir):
    """Render every input CSV; returns a manifest dict.

    Series CSVs get one figure per residual family; refinement CSVs are
    merged into one order figure with fitted slopes.  A text summary table
    echoes each series' terminal row exactly as stored.
    """
    if not csv_paths:
        raise ValueError("no input CSVs given")
    os.makedirs(outdir, exist_ok=True)
    figures = []
    slopes = {}
    summary_lines = []
    refinement = {}
    for path in csv_paths:
        if not os.path.exists(path):
            raise ValueError("no such file: %s" % path)
        kind = classify(path)
        if kind == "refinement":
            table = load_refinement(path)
            for op, pairs in table.items():
                refinement.setdefault(op, []).extend(pairs)
        else:
            bundle = load_series(path)
            figures.extend(render_series_figures(bundle, outdir))
            terminal = bundle.terminal_row()
            summary_lines.append("# terminal row of %s (scenario %s)"
                                 % (path, bundle.scenario))
            for key in terminal:
                summary_lines.append("%s,%s" % (key, terminal[key]))
            summary_lines.append("")
    if refinement:
        for op in refinement:
            refinement[op].sort()
        path, slopes = render_refinement_figure(refinement, outdir)
        figures.append(path)
        summary_lines.append("# fitted refinement orders")
        for op, slope in sorted(slopes.items()):
            summary_lines.append("%s,%.17g" % (op, slope))
        summary_lines.append("")
    summary_path = os.path.join(outdir, "summary.txt")
    with open(summary_path, "w") as fh:
        fh.write("\n".join(summary_lines))
    return {"figures": figures, "summary": summary_path, "orders": slopes}
