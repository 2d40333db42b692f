"""Reproduce the Gaussian cost comparison table."""
import sys

from app.design.cost_table import max_deviation, reproduce_both, reproduce_table
from app.utils.report_writer import render_table

if __name__ == "__main__":
    printed_constants = "--paper-rounding" in sys.argv[1:]
    print(f"🚀 Reproducing cost table ({'printed constants' if printed_constants else 'full precision and printed constants'})...")
    print()

    rows = reproduce_table(printed_constants=True) if printed_constants else reproduce_both()
    print(render_table([r.as_dict() for r in rows]))

    print(f"\n📊 Max deviation from printed values:")
    for mode in dict.fromkeys(r.mode for r in rows):
        np_dev, opt_dev = max_deviation([r for r in rows if r.mode == mode])
        print(f"   {mode}")
        print(f"     NP cost:      {np_dev:.3g}")
        print(f"     optimal cost: {opt_dev:.3g}")
