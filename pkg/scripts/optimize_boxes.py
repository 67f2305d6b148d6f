"""Energy-driven coordinate search over box endpoints, starting from a preset.

    python scripts/optimize_boxes.py --system he4 --n 150 --budget 100 --digits 40

Prints the improved boxes in the tuple layout used by OPTIMIZED_BOXES.
"""

import argparse
import logging

from fbhfs.basis import preset_boxes
from fbhfs.precision import make_context
from fbhfs.solver import optimize_boxes
from fbhfs.system import system_by_name


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--system", default="he4", choices=("he3", "he4"))
    p.add_argument("--preset", default="optimized", choices=("default", "optimized"))
    p.add_argument("--n", type=int, default=150)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--digits", type=int, default=40)
    p.add_argument("--step", default="0.1", help="initial step as a fraction of each interval width")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    system = system_by_name(args.system)
    ctx = make_context(args.digits)
    res = optimize_boxes(preset_boxes(args.preset, args.system, args.n), system, ctx,
                         budget=args.budget, step_fraction=args.step)
    print(f"evaluations {res.evaluations}  E = {res.state.energy}")
    for b in res.boxes:
        (a1, a2), (b1, b2), (c1, c2) = b.ranges
        print(f'    (("{a1}", "{a2}"), ("{b1}", "{b2}"), ("{c1}", "{c2}"), {b.count}),')


if __name__ == "__main__":
    main()
