#!/usr/bin/env python3
"""Print the receptive-field comparison of the two built-in extra-layer
designs: per-layer tables, basic-map RF expansion ratios, ratio spread,
and total parameters."""

from detkit.rfcalc import BUILTIN_CHAINS, analyze_builtin, expansion_ratios, ratio_spread


def main() -> None:
    for name in BUILTIN_CHAINS:
        analysis, rfs = analyze_builtin(name)
        ratios = expansion_ratios(rfs)
        print(f"== {name}")
        print(analysis.to_csv())
        print(f"basic-map RFs: {rfs}")
        print(f"expansion ratios: {[round(r, 4) for r in ratios]} (spread {ratio_spread(ratios):.4f})")
        print(f"total parameters: {analysis.total_parameters}\n")


if __name__ == "__main__":
    main()
