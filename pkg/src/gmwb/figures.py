"""Render the fee/value panels from emitted series data.

One figure per market condition (r, sigma): a grid of panels over penalty
rates and maturities, fair fees in percent on the left axis (dark lines) and
policy values on the right axis (gray lines), both as functions of the
management fee rate. Rendering consumes the same series files `figures`
writes, so plots always match the delimited output next to them.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import ConfigurationError


def _read_series(path: Path) -> dict[str, list[float]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols: dict[str, list[float]] = {name: [] for name in reader.fieldnames or []}
        for row in reader:
            for name, raw in row.items():
                cols[name].append(float(raw))
    if "alpha_m" not in cols:
        raise ConfigurationError(f"{path} is not a figure series file")
    return cols


def render_market_condition(
    series_paths: dict[tuple[float, float], Path],
    r: float,
    sigma: float,
    out_path: Path,
) -> Path:
    """Render one (r, sigma) figure; ``series_paths`` maps (beta, T) panels to
    their series files, laid out with maturities down the rows."""
    betas = sorted({b for b, _ in series_paths})
    maturities = sorted({t for _, t in series_paths})
    fig, axes = plt.subplots(
        len(maturities),
        len(betas),
        figsize=(4.2 * len(betas), 2.9 * len(maturities)),
        squeeze=False,
    )
    for row, t_mat in enumerate(maturities):
        for col, beta in enumerate(betas):
            ax = axes[row][col]
            data = _read_series(series_paths[(beta, t_mat)])
            am_pct = [a * 100 for a in data["alpha_m"]]
            ax.plot(am_pct, data["fee_liability_pct"], color="k", lw=1.4,
                    label="fee, liability max")
            ax.plot(am_pct, data["fee_value_pct"], color="k", lw=1.4, ls="--",
                    label="fee, value max")
            ax.set_ylabel("fair fee (%)")
            ax2 = ax.twinx()
            ax2.plot(am_pct, data["V0_liability"], color="0.6", lw=1.2,
                     label="value, liability max")
            ax2.plot(am_pct, data["V0_value"], color="0.6", lw=1.2, ls="--",
                     label="value, value max")
            ax2.set_ylabel("policy value")
            ax.set_xlabel("management fee (%)")
            ax.set_title(f"beta={beta * 100:g}%, T={t_mat:g}y", fontsize=10)
            if row == 0 and col == 0:
                lines1, labels1 = ax.get_legend_handles_labels()
                lines2, labels2 = ax2.get_legend_handles_labels()
                ax.legend(lines1 + lines2, labels1 + labels2, fontsize=7,
                          loc="upper left")
    fig.suptitle(f"r={r * 100:g}%, sigma={sigma * 100:g}%", fontsize=12)
    fig.tight_layout(rect=(0, 0, 1, 0.97))
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_all(
    out_dir: str | Path,
    panel_index: dict[tuple[float, float, float, float], Path],
) -> list[Path]:
    """Render one PNG per market condition found in ``panel_index``, which maps
    (r, sigma, beta, T) to series files."""
    out = Path(out_dir)
    conditions = sorted({(r, s) for r, s, _, _ in panel_index})
    rendered = []
    for r, s in conditions:
        series = {
            (b, t): path
            for (rr, ss, b, t), path in panel_index.items()
            if (rr, ss) == (r, s)
        }
        name = f"figure_r{r * 100:g}_sigma{s * 100:g}.png"
        rendered.append(render_market_condition(series, r, s, out / name))
    return rendered
