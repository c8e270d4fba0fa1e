#!/usr/bin/env python3
"""Plot the CSV artifacts of a `gridsec all` run.

    python3 scripts/plot.py out/pjm5 [--save DIR]

Needs matplotlib. Not part of the tested surface.
"""
import argparse
import csv
from pathlib import Path

import matplotlib.pyplot as plt


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def costs(out, ax):
    data = rows(out / "costs_plot.csv")
    ax.bar([r["line"] for r in data], [float(r["cost"]) for r in data])
    ax.set_xlabel("line")
    ax.set_ylabel("line-loss cost")
    ax.set_title("Line-loss cost per line")


def sweep(out, ax_value, ax_gain):
    data = rows(out / "ch_sweep.csv")
    tau = [float(r["tau"]) for r in data]
    ax_value.plot(tau, [float(r["ch_value"]) for r in data], label="CH best response")
    ax_value.plot(tau, [float(r["ne_value"]) for r in data], "--", label="NE mix")
    ax_value.set_xscale("log")
    ax_value.set_xlabel("tau")
    ax_value.set_ylabel("defender expected utility")
    ax_value.legend()
    cross = out / "crossover.csv"
    if cross.exists():
        for r in rows(cross):
            t = float(r["tau"])
            if tau[0] <= t <= tau[-1]:
                ax_value.axvline(t, color="grey", lw=0.8)
    ax_gain.plot(tau, [float(r["gain"]) for r in data])
    ax_gain.set_xscale("log")
    ax_gain.set_xlabel("tau")
    ax_gain.set_ylabel("relative gain over NE")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=Path)
    ap.add_argument("--save", type=Path, help="write PNGs here instead of showing")
    args = ap.parse_args()

    figs = {}
    if (args.out / "costs_plot.csv").exists():
        fig, ax = plt.subplots()
        costs(args.out, ax)
        figs["costs"] = fig
    if (args.out / "ch_sweep.csv").exists():
        fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
        sweep(args.out, a, b)
        figs["sweep"] = fig
    if not figs:
        raise SystemExit(f"no plottable artifacts in {args.out}")

    if args.save:
        args.save.mkdir(parents=True, exist_ok=True)
        for name, fig in figs.items():
            fig.tight_layout()
            fig.savefig(args.save / f"{name}.png", dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
