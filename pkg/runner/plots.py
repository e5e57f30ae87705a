"""
SVG-графики результатов (необязательные, тесты их не читают)
"""
import logging
from pathlib import Path
from typing import Any, Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

# детерминированные id элементов SVG
matplotlib.rcParams["svg.hashsalt"] = "tcdpp"


def _save(fig, file_path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(file_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Plot written to {file_path}")
    return file_path


def _markers(ax, rows: List[Dict[str, Any]], key: str, label: str) -> None:
    x0 = [row["x0"] for row in rows]
    ax.errorbar(
        x0, [row[key] for row in rows], yerr=[3 * row["stderr"] for row in rows],
        fmt="o", capsize=3, label=label,
    )


def plot_diffusion(plots: Dict[str, Any], file_path: Path) -> Path:
    """v(0, ·) по сетке против MC-оценок с ±3σ"""
    grid = plots["grid"]
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    left.plot(grid.x, grid.values[0], label="finite differences")
    _markers(left, plots["rows"], "v_mc", "Monte Carlo")
    left.set_xlabel("x0")
    left.set_ylabel("v(0, x0)")
    left.legend()
    right.bar([f"{row['x0']:g}" for row in plots["rows"]], [row["z"] for row in plots["rows"]])
    right.axhline(3, color="grey", linestyle="--")
    right.axhline(-3, color="grey", linestyle="--")
    right.set_xlabel("x0")
    right.set_ylabel("DPP z-score")
    return _save(fig, file_path)


def plot_follower(plots: Dict[str, Any], file_path: Path) -> Path:
    """V_0(d) и оптимальный толчок DP-оракула"""
    oracle = plots["oracle"]
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    left.plot(oracle.d_grid, oracle.values[0], label="DP oracle")
    _markers(left, plots["rows"], "v_mc", "Monte Carlo")
    left.set_xlabel("W - L")
    left.set_ylabel("V_0")
    left.legend()
    right.step(oracle.d_grid, oracle.pushes[0], where="mid")
    right.set_xlabel("W - L")
    right.set_ylabel("push at t=0")
    return _save(fig, file_path)


PLOTTERS = {
    "diffusion": plot_diffusion,
    "follower": plot_follower,
}
