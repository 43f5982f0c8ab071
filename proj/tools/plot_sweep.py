#!/usr/bin/env python3
"""Plot a sweep CSV written by `sarprec run`: EE per scheme against the swept variable."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

LABELS = {"pmax": "P_max (dBm)", "sar": "SAR limit (W/kg)"}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="sweep CSV")
    parser.add_argument("--out", default="sweep.png", help="output image (format from extension)")
    parser.add_argument("--mc", action="store_true", help="plot the Monte-Carlo EE with error bars instead")
    args = parser.parse_args()

    df = pd.read_csv(args.csv)
    failed = df[df["status"] != "ok"]
    if not failed.empty:
        print(f"skipping {len(failed)} failed rows")
    df = df[df["status"] == "ok"]

    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme, rows in df.groupby("scheme", sort=False):
        rows = rows.sort_values("sweep_value")
        if args.mc:
            ax.errorbar(rows["sweep_value"], rows["ee_mc_bits_per_joule"] / 1e6,
                        yerr=rows["ee_mc_stderr"] / 1e6, marker="o", capsize=2, label=scheme)
        else:
            ax.plot(rows["sweep_value"], rows["ee_asymptotic_bits_per_joule"] / 1e6, marker="o", label=scheme)
    ax.set_xlabel(LABELS.get(df["sweep_var"].iloc[0], "sweep value"))
    ax.set_ylabel("EE (Mbit/J)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
