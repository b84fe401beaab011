"""Growth rate gamma(k) from three independent routes.

Evans root, spectral eigenproblem and time-domain evolution from the
spectral eigenmode, with the first-order asymptotic rate and the cap.

    python scripts/dispersion_compare.py --nu 2 --L0 0.01 --k 1,5,10,50
"""

import argparse
import math

from rtevans.evans import RootError, find_lambda, gamma_asymptotic
from rtevans.linevolve import eigen_state, evolve, measure_growth
from rtevans.profile import PhysicalParams, l_eff_and_cap
from rtevans.spectral import SpectralError, gamma_spectral


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nu", type=float, default=2.0)
    ap.add_argument("--g", type=float, default=1.0)
    ap.add_argument("--L0", type=float, default=1e-2)
    ap.add_argument("--k", default="1,5,10,50,100,500")
    args = ap.parse_args()
    params = PhysicalParams(nu=args.nu, g=args.g, L0=args.L0)
    cap = l_eff_and_cap(params)[1]
    print(f"Lambda = {cap:.8f}")
    print(f"{'k':>8} {'evans':>12} {'spectral':>12} {'evolve':>12} {'asymptotic':>12}")
    for k in (float(v) for v in args.k.split(",")):
        try:
            lam = find_lambda(k * params.L0, params)
            g_ev = f"{math.sqrt(params.g * k / lam):12.8f}"
        except (RootError, RuntimeError) as exc:
            g_ev = f"{type(exc).__name__[:12]:>12}"
        try:
            res = gamma_spectral(k, params)
            g_sp = f"{res.gamma:12.8f}"
            fit = measure_growth(evolve(eigen_state(res), 5.0 / res.gamma, params))
            g_tv = f"{fit.gamma_measured:12.8f}"
        except SpectralError as exc:
            g_sp = g_tv = f"{type(exc).__name__[:12]:>12}"
        print(f"{k:8g} {g_ev} {g_sp} {g_tv} {gamma_asymptotic(k, params):12.8f}")


if __name__ == "__main__":
    main()
