"""Compare candidate box sets on energy, electron-muon density and cusps.

Each candidate is solved on nested prefixes (N/2, N) of one basis and
scored against the large-basis reference values. This is how the
``optimized`` preset in fbhfs.basis was chosen; rerun with

    python scripts/tune_boxes.py --system he4 --n 200 --digits 50
"""

import argparse
import time

import gmpy2

from fbhfs.basis import ParameterBox, preset_boxes
from fbhfs.observables import expectation_report
from fbhfs.precision import make_context
from fbhfs.solver import convergence_study, scale_boxes
from fbhfs.system import system_by_name

REFERENCE = {
    "he4": ("-402.637263035135454018941", 3.13760535832e-1, 2.07001373517002e7),
    "he3": ("-399.042336832862534827009", 3.13682319465e-1, 2.01499388452232e7),
}

ELECTRON = ("0.3", "2.5", "0.3", "2.5", "350", "450")
CORRELATION = ("0.3", "6", "0.3", "6", "300", "550")
SCREENED = ("-1.5", "-0.5", "1.5", "3", "350", "450")
CORE = ("2", "60", "2", "60", "350", "450")
CORE_NEG = ("-60", "-2", "3", "61", "350", "450")
CORE_WIDE = ("2", "200", "2", "200", "350", "450")
CORE_DEEP = ("60", "600", "60", "600", "300", "550")

# name -> [(endpoints, share)]
CANDIDATES = {
    "default": [(ELECTRON, 1), (CORRELATION, 1)],
    "+screened": [(ELECTRON, 1), (CORRELATION, 1), (SCREENED, 1)],
    "+core": [(ELECTRON, 1), (CORRELATION, 1), (SCREENED, 1), (CORE, 1)],
    "+core-wide": [(ELECTRON, 1), (CORRELATION, 1), (SCREENED, 1), (CORE_WIDE, 1)],
    "+core+deep": [(ELECTRON, 1), (CORRELATION, 1), (SCREENED, 1), (CORE, 1), (CORE_DEEP, 1)],
    "+core+neg": [(ELECTRON, 1), (CORRELATION, 1), (SCREENED, 1), (CORE, 1), (CORE_NEG, 1)],
    "+core+neg x2": [(ELECTRON, 1), (CORRELATION, 1), (SCREENED, 1), (CORE, 2), (CORE_NEG, 2)],
}


def boxes_for(spec, n):
    raw = [ParameterBox.from_endpoints(ends, share) for ends, share in spec]
    return scale_boxes(raw, n)


def score(name, boxes, system, ctx):
    e_ref, d21_ref, d32_ref = REFERENCE[system.name]
    n = sum(b.count for b in boxes)
    t0 = time.time()
    states = convergence_study(system, [n // 2, n], ctx, boxes=boxes)
    top = states[-1]
    rep = expectation_report(top)
    with ctx.local():
        de = float(top.energy - gmpy2.mpfr(e_ref))
        cusps = [float(getattr(rep, f"cusp{p}") / system.kato_cusp(p) - 1) for p in ("21", "31", "32")]
    print(f"{name:<14} N={n:<4} dE={de:.2e}  d21={float(rep.delta21) / d21_ref - 1:+.1e}  "
          f"d32={float(rep.delta32) / d32_ref - 1:+.1e}  cusp21={cusps[0]:+.1e}  cusp31={cusps[1]:+.1e}  "
          f"cusp32={cusps[2]:+.1e}  virial={float(rep.virial_ratio) + 2:+.1e}  {time.time() - t0:.0f}s",
          flush=True)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--system", default="he4", choices=("he3", "he4"))
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--digits", type=int, default=50)
    p.add_argument("--only", nargs="*", help="candidate names to run")
    args = p.parse_args()
    system = system_by_name(args.system)
    ctx = make_context(args.digits)
    for name, spec in CANDIDATES.items():
        if args.only and name not in args.only:
            continue
        score(name, boxes_for(spec, args.n), system, ctx)
    score("preset", preset_boxes("optimized", args.system, args.n), system, ctx)


if __name__ == "__main__":
    main()
