"""The translation orbit of |x - 1/2|^(-1/(2p)) has no common regulator.

On finer grids the sampled maxima grow like (2n)^(1/(2p)), so any fixed
regulator is eventually exceeded.  The growth per decade is 10^(1/(2p)),
which is below 2 once p > log(10)/log(4).
"""
import argparse

from latticeflow import lp_counterexample_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--grids", type=int, nargs="+", default=[1000, 10000, 100000])
    args = ap.parse_args()

    for p in args.p:
        tab = lp_counterexample_probe(p, 0.25, args.grids)
        print(f"p = {p:g}")
        for n, m, mass in zip(tab.grid_n, tab.max_value, tab.lp_mass):
            print(f"  n = {n:>7d}  max = {m:12.4f}  sampled L^p mass = {mass:10.4f}")
        print("  growth per refinement:", ", ".join(f"{g:.3f}" for g in tab.growth),
              "(>= 2)" if tab.diverging else "(below 2)")


if __name__ == "__main__":
    main()
