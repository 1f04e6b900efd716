"""Plot the fig3 CSVs: solid lines without loss, dotted lines with gamma = g.

Usage: python scripts/plot_fig3.py OUT_DIR [--save fig3.png]
Needs the `plot` extra (matplotlib).
"""

from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def _load(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--save", type=Path, default=None)
    args = parser.parse_args()

    header, lossless = _load(args.out_dir / "fig3_lossless.csv")
    _, lossy = _load(args.out_dir / "fig3_lossy.csv")

    fig, ax = plt.subplots(1, 1, figsize=(4.0, 3.0), dpi=150)
    for column, label in enumerate(header[1:], start=1):
        (line,) = ax.plot(lossless[:, 0], lossless[:, column], label=f"$P_{label[1:]}$")
        ax.plot(lossy[:, 0], lossy[:, column], linestyle=":", color=line.get_color())
    ax.set_xlabel("gt")
    ax.set_ylabel("probability")
    ax.set_xlim(lossless[0, 0], lossless[-1, 0])
    ax.set_ylim(0.0, 1.0)
    ax.legend(frameon=False)
    fig.tight_layout()

    if args.save:
        fig.savefig(args.save)
    else:
        plt.show()


if __name__ == "__main__":
    main()
