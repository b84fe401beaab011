"""Small-eps behaviour of the Evans root and of the slope at lam = 1.

Prints the root residual table with its fitted slope and second-order
coefficient, both predictions of that coefficient, and the eps**(1/nu)
correction to dEv/dlam at lam = 1 against its closed form.

    python scripts/expansion_sweep.py --nu 2 --points 8
"""

import argparse

import numpy as np

from rtevans.evans import b0_first_order, b0_matched, evans_value, expansion_fit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nu", type=float, default=2.0)
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--eps-min", type=float, default=1e-6)
    ap.add_argument("--eps-max", type=float, default=1e-3)
    args = ap.parse_args()
    nu = args.nu

    fit = expansion_fit(nu, np.geomspace(args.eps_min, args.eps_max, args.points))
    print(f"{'eps':>12} {'lambda':>20} {'delta':>14} {'delta/eps':>12}")
    for e, lam, d in zip(fit["eps"], fit["lambda"], fit["delta"]):
        print(f"{e:12.4e} {lam:20.15f} {d:14.6e} {d / e:12.6f}")
    print(f"slope               {fit['slope']:.5f}")
    print(f"c2 (fit)            {fit['c2_fit']:.6f}")
    print(f"c2 (five integrals) {fit['c2_from_c0_one']:.6f}   C0 = {fit['c0_one']:.6f}")
    print(f"c2 (closed form)    {fit['c2_from_closed_form']:.6f}   C0 = {fit['c0_closed_form']:.6f}")

    b0 = b0_matched(nu)
    print(f"B0 derivative route {b0['derivative']:.10f}")
    print(f"B0 root route       {b0['root']:.10f}")
    print(f"B0 closed form      {b0['closed_form']:.10f}")

    h = 1e-4
    eps = np.geomspace(1e-12, 1e-5, 8)
    d = [(evans_value(1 + h, e, nu) - evans_value(1 - h, e, nu)) / (2 * h) for e in eps]
    A = np.column_stack([np.ones_like(eps), eps ** (1 / nu), eps ** (2 / nu), eps])
    coef = np.linalg.lstsq(A, d, rcond=None)[0]
    print(f"slope correction    {coef[1]:.6f} (closed form {b0_first_order(nu):.6f})")


if __name__ == "__main__":
    main()
