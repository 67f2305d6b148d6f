"""Desk-scale energy, delta-function and hyperfine tables for both isotopes.

    python scripts/reproduce_tables.py --ns 100 200 400 800 --out results/

Solves nested prefixes of one optimized basis per isotope, then feeds the
largest-N delta functions into the hyperfine model. Writes one JSON file
per isotope and prints aligned tables.
"""

import argparse
import json
import time
from pathlib import Path

import gmpy2

from fbhfs.basis import preset_boxes, to_decimal
from fbhfs.hyperfine import hfs_report
from fbhfs.observables import expectation_report
from fbhfs.precision import make_context
from fbhfs.solver import convergence_study
from fbhfs.system import system_by_name

REFERENCE_E = {"he4": "-402.637263035135454018941", "he3": "-399.042336832862534827009"}


def run_isotope(name, ns, digits):
    system = system_by_name(name)
    ctx = make_context(digits)
    t0 = time.time()
    states = convergence_study(system, ns, ctx, boxes=preset_boxes("optimized", name, ns[-1]))
    elapsed = time.time() - t0
    rows = []
    reports = []
    for k, st in enumerate(states):
        rep = expectation_report(st, states[: k + 1] if k >= 2 else None)
        reports.append(rep)
        with ctx.local():
            err = st.energy - gmpy2.mpfr(REFERENCE_E[name])
        rows.append({
            "N": st.N, "energy": to_decimal(st.energy), "energy_minus_reference": to_decimal(err),
            **{k2: to_decimal(getattr(rep, k2)) for k2 in
               ("delta21", "delta31", "delta32", "delta321", "cusp21", "cusp31", "cusp32", "virial_ratio")},
        })
    top = reports[-1]
    deltas = {p: float(v) for p, v in top.deltas().items()}
    spreads = {p: float(top.uncertainties.get(f"delta{p}", 0)) for p in deltas}
    hfs = hfs_report(deltas, name, spreads=spreads)
    return {"system": name, "digits": digits, "seconds": round(elapsed, 1), "rows": rows,
            "hfs_MHz": hfs.splitting_MHz, "hfs_sigma_MHz": hfs.uncertainty_MHz,
            "hfs_levels_MHz": [[lv.label, lv.degeneracy, lv.energy_MHz] for lv in hfs.levels]}


def print_tables(res):
    print(f"\n{res['system']}  ({res['seconds']} s at {res['digits']} digits)")
    print(f"{'N':>5}  {'E':<34} {'E - ref':>10}  {'<d21>':<16} {'<d31>':<16} {'<d32>':<18} {'<d321>':<14}")
    for r in res["rows"]:
        print(f"{r['N']:>5}  {r['energy'][:34]:<34} {float(r['energy_minus_reference']):>10.2e}  "
              f"{r['delta21'][:16]:<16} {r['delta31'][:16]:<16} {r['delta32'][:18]:<18} {r['delta321'][:14]:<14}")
    print(f"hyperfine splitting {res['hfs_MHz']:.5f} +- {res['hfs_sigma_MHz']:.1e} MHz")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--ns", type=int, nargs="+", default=[100, 200, 400, 800])
    p.add_argument("--digits", type=int, default=64)
    p.add_argument("--systems", nargs="+", default=["he4", "he3"])
    p.add_argument("--out", default="results")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.systems:
        res = run_isotope(name, sorted(args.ns), args.digits)
        (out / f"tables_{name}.json").write_text(json.dumps(res, indent=1, sort_keys=True) + "\n")
        print_tables(res)


if __name__ == "__main__":
    main()
