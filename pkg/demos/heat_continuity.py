"""How fast does the heat semigroup return to a Lipschitz function?

Prints the measured delta(eps) next to the guaranteed delta from the
kernel's first absolute moment, for a clipped ``1+|x|``.
"""
import argparse

from latticeflow import GridSpec, closed, heat_guaranteed_delta, make_heat, one, test_ruc_at_zero


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 0.1, 0.05, 0.01])
    ap.add_argument("--radius", type=float, default=5.0, help="clip radius")
    args = ap.parse_args()

    grid = GridSpec()
    f = closed(f"clip(1+|x|,{args.radius})", grid)
    rep = test_ruc_at_zero(make_heat(), f, one(), sorted(args.eps, reverse=True), grid)
    print(f"f = {f.label}, L = {f.lipschitz:g}, grid = {grid}")
    print(f"{'eps':>8} {'measured':>12} {'guaranteed':>12} {'ratio':>8}")
    for r in rep.rows:
        g = heat_guaranteed_delta(r.eps, f.lipschitz)
        print(f"{r.eps:8g} {r.threshold:12.4e} {g:12.4e} {r.threshold / g:8.2f}")


if __name__ == "__main__":
    main()
