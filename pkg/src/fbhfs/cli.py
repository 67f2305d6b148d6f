"""Command-line pipeline: solve, convergence, expect, hfs, oracle, all.

Every subcommand computes all of its results first and only then writes
artifacts (each via a temporary file and an atomic rename), so a failing
run leaves the output directory untouched. Structured outputs are JSON
with sorted keys and full-precision numbers as decimal strings; they carry
no timestamps or thread counts, so identical configs give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from decimal import Decimal
from pathlib import Path

import gmpy2

from . import __version__
from .basis import BasisSet, ParameterBox, generate_basis, preset_boxes, read_basis, save_basis, to_decimal
from .config import RunConfig, load_config, parse_config, with_cli
from .errors import ConfigError, FbhfsError
from .hyperfine import hfs_report
from .integrals import gamma_lmn, quadrature_oracle
from .observables import expectation_report
from .precision import make_context
from .solver import BoundState, assemble, optimize_boxes, scale_boxes, solve_operators

log = logging.getLogger("fbhfs")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_IO = 4

SUBCOMMANDS = ("solve", "convergence", "expect", "hfs", "oracle", "all")
REPORT_FORMAT = "fbhfs-report 1"


def _dec(x) -> str:
    if isinstance(x, (int, Decimal)):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return to_decimal(x)


class Run:
    """One configured pipeline; results are cached so ``all`` shares work."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.ctx = make_context(cfg.digits)
        self.sys = cfg.particle_system()
        self.artifacts: dict[str, str] = {}
        self._basis: BasisSet | None = None
        self._basis_note: dict = {}
        self._states: list[BoundState] | None = None

    # -- provenance -------------------------------------------------------
    def provenance(self) -> dict:
        cfg = self.cfg
        prov = {
            "format": REPORT_FORMAT,
            "package": f"fbhfs {__version__}",
            "config_hash": cfg.digest(),
            "config": cfg.as_dict(),
            "system": self.sys.descriptor(),
            "precision_digits": cfg.digits,
            "constants": {k: repr(v) for k, v in sorted(cfg.constants_table().as_dict().items())},
        }
        if self._basis is not None:
            prov["basis"] = dict(self._basis_note)
        return prov

    # -- basis ------------------------------------------------------------
    def boxes(self, n: int) -> list[ParameterBox]:
        cfg = self.cfg
        if cfg.boxes:
            shaped = [ParameterBox.from_endpoints(b[:6], 0) for b in cfg.boxes]
            raw = [ParameterBox.from_endpoints(b[:6], int(b[6] * 10 ** 6)) for b in cfg.boxes]
            return [s.with_count(r.count) for s, r in zip(shaped, scale_boxes(raw, n))]
        return preset_boxes(cfg.preset, self.sys.name, n)

    def basis(self) -> BasisSet:
        if self._basis is not None:
            return self._basis
        cfg = self.cfg
        if cfg.basis_file:
            doc = read_basis(cfg.basis_file)
            if doc.basis.N < cfg.n:
                raise ConfigError(f"basis.file has {doc.basis.N} functions, basis.n = {cfg.n}")
            basis = doc.basis.truncate(cfg.n)
            note = {"source": "file", "path": cfg.basis_file}
        else:
            boxes = self.boxes(cfg.n)
            note = {"source": f"preset:{cfg.preset}" if not cfg.boxes else "config boxes"}
            if cfg.optimize_budget:
                n_opt = cfg.optimize_n or min(cfg.n, 100)
                res = optimize_boxes(scale_boxes(boxes, n_opt), self.sys, self.ctx, cfg.optimize_budget)
                boxes = scale_boxes(res.boxes, cfg.n)
                note["optimized"] = {"n": n_opt, "evaluations": res.evaluations,
                                     "energy": _dec(res.state.energy)}
            basis = generate_basis(boxes, self.ctx)
        note.update({
            "N": basis.N,
            "file": "basis.fbvs",
            "boxes": [[str(v) for v in b.endpoints()] + [b.count] for b in basis.boxes],
        })
        self._basis, self._basis_note = basis, note
        text = save_basis(basis, self.sys)
        note["checksum"] = int(text.rsplit("checksum", 1)[1])
        self.artifacts["basis.fbvs"] = text
        return basis

    def states(self) -> list[BoundState]:
        """Ground states on the nested prefixes listed by the config."""
        if self._states is None:
            basis = self.basis()
            ops = assemble(basis, self.sys, self.ctx)
            tol = self.cfg.tol
            self._states = []
            for n in self.cfg.study_ns():
                st = solve_operators(ops.truncate(n), basis.truncate(n), self.sys, self.ctx, tol=tol)
                log.info("N = %d  E = %s", n, st.energy)
                self._states.append(st)
        return self._states

    def _emit(self, name: str, payload: dict, table: str | None = None):
        payload = dict(payload, provenance=self.provenance())
        self.artifacts[f"{name}.json"] = json.dumps(payload, sort_keys=True, indent=1) + "\n"
        if table is not None:
            self.artifacts[f"{name}.txt"] = table

    # -- subcommands ------------------------------------------------------
    def solve(self):
        st = self.states()[-1]
        # rewrite the basis file with coefficients and energy of the top state
        self.artifacts["basis.fbvs"] = save_basis(st.basis, self.sys, st.coefficients, st.energy)
        self._basis_note["checksum"] = int(self.artifacts["basis.fbvs"].rsplit("checksum", 1)[1])
        with self.ctx.local():
            ratio = st.v_expect / st.t_expect
        self._emit("solve", {
            "N": st.N,
            "energy": _dec(st.energy),
            "residual": _dec(st.residual),
            "iterations": st.iterations,
            "dropped": list(st.dropped),
            "t_expect": _dec(st.t_expect),
            "v_expect": _dec(st.v_expect),
            "virial_ratio": _dec(ratio),
        })

    def convergence(self):
        rows, lines = [], [f"{'N':>6}  {'E (Hartree)':<42}  {'E(N) - E(prev)':>12}"]
        prev = None
        for st in self.states():
            with self.ctx.local():
                diff = None if prev is None else st.energy - prev
            rows.append({"N": st.N, "energy": _dec(st.energy),
                         "difference": None if diff is None else _dec(diff)})
            lines.append(f"{st.N:>6}  {to_decimal(st.energy)[:42]:<42}  "
                         f"{'' if diff is None else format(float(diff), '.3e'):>12}")
            prev = st.energy
        self._emit("convergence", {"rows": rows}, "\n".join(lines) + "\n")

    def _expectations(self):
        states = self.states()
        return expectation_report(states[-1], states if len(states) >= 3 else None)

    def expect(self):
        rep = self._expectations()
        names = ("delta21", "delta31", "delta32", "delta321", "cusp21", "cusp31", "cusp32",
                 "t_expect", "v_expect", "virial_ratio", "norm")
        values = {k: _dec(getattr(rep, k)) for k in names}
        unc = {k: _dec(v) for k, v in sorted(rep.uncertainties.items())}
        with self.ctx.local():
            kato = {p: _dec(self.sys.kato_cusp(p)) for p in ("21", "31", "32")}
        lines = [f"N = {self.states()[-1].N}"]
        for k in names:
            u = rep.uncertainties.get(k)
            lines.append(f"{k:<13} {to_decimal(getattr(rep, k))[:24]:<24}"
                         + ("" if u is None else f"  +- {float(u):.2e}"))
        self._emit("expect", {"N": self.states()[-1].N, "values": values, "uncertainties": unc,
                              "kato_cusps": kato}, "\n".join(lines) + "\n")
        return rep

    def hfs(self):
        cfg = self.cfg
        if cfg.system == "custom":
            raise ConfigError("hfs needs system.name = he3 or he4")
        species = cfg.species()
        need = ("21",) if species == "he4" else ("21", "31", "32")
        given = dict(cfg.deltas)
        if all(p in given for p in need):
            deltas = {p: float(v) for p, v in given.items()}
            spreads = {p: float(v) for p, v in cfg.spreads}
            source = "config"
        else:
            rep = self._expectations()
            deltas = {p: float(v) for p, v in rep.deltas().items()}
            spreads = {p: float(rep.uncertainties.get(f"delta{p}", 0)) for p in deltas}
            source = "computed"
        res = hfs_report(deltas, species, cfg.constants_table(), spreads)
        levels = [{"energy_MHz": repr(lv.energy_MHz), "degeneracy": lv.degeneracy, "label": lv.label}
                  for lv in res.levels]
        lines = [f"{species} hyperfine splitting {res.splitting_MHz:.5f} +- {res.uncertainty_MHz:.1e} MHz"]
        lines += [f"  {lv.label:<12} x{lv.degeneracy}  {lv.energy_MHz:.6f} MHz" for lv in res.levels]
        self._emit("hfs", {
            "species": species,
            "deltas": {p: repr(v) for p, v in sorted(deltas.items())},
            "delta_source": source,
            "splitting_MHz": repr(res.splitting_MHz),
            "uncertainty_MHz": repr(res.uncertainty_MHz),
            "levels": levels,
        }, "\n".join(lines) + "\n")

    def oracle(self):
        rows = []
        triples = [("1", "1", "1"), ("0.5", "2", "3"), ("-0.5", "1.5", "400"), ("2", "0.1", "10")]
        with self.ctx.local():
            for a, b, c in triples:
                for lmn in ((0, 0, 0), (1, 1, 1), (2, 0, 1), (0, 3, 0), (1, 2, 2)):
                    exact = gamma_lmn(*lmn, gmpy2.mpfr(a), gmpy2.mpfr(b), gmpy2.mpfr(c))
                    quad = quadrature_oracle(*lmn, float(a), float(b), float(c))
                    rel = abs(float(exact) - quad) / abs(float(exact))
                    rows.append({"lmn": list(lmn), "exponents": [a, b, c], "closed_form": _dec(exact),
                                 "quadrature": repr(quad), "relative_difference": f"{rel:.3e}"})
        worst = max(float(r["relative_difference"]) for r in rows)
        lines = [f"{len(rows)} Gamma integrals, worst relative difference {worst:.2e}"]
        self._emit("oracle", {"gamma": rows, "worst_relative_difference": f"{worst:.3e}"},
                   "\n".join(lines) + "\n")

    def run(self, command: str):
        if command == "all":
            self.solve()
            self.convergence()
            self.expect()
            self.hfs()
            self.oracle()
        else:
            getattr(self, command)()
        return self.artifacts


def write_artifacts(out: str, artifacts: dict[str, str]) -> list[str]:
    """Write every artifact via a temporary file and ``os.replace``."""
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in sorted(artifacts.items()):
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=outdir)
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, outdir / name))
    except OSError:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, dest in staged:
        os.replace(tmp, dest)
    return [str(dest) for _, dest in staged]


def _diagnostic(status: str, exc: BaseException) -> str:
    return json.dumps({"status": status, "error": type(exc).__name__, "message": str(exc)}, sort_keys=True)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbhfs", description="Muonic helium bound states and hyperfine splittings.")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--system", choices=("he3", "he4"))
    p.add_argument("--n", type=int, help="basis size")
    p.add_argument("--digits", type=int, help="working precision in decimal digits")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        cfg = with_cli(cfg, args.system, args.n, args.digits, args.out)
    except ConfigError as exc:
        print(_diagnostic("config error", exc), file=sys.stderr)
        return EXIT_CONFIG
    try:
        artifacts = Run(cfg).run(args.command)
    except ConfigError as exc:
        print(_diagnostic("config error", exc), file=sys.stderr)
        return EXIT_CONFIG
    except (FbhfsError, ValueError, ArithmeticError) as exc:
        print(_diagnostic("computation error", exc), file=sys.stderr)
        return EXIT_COMPUTE
    try:
        written = write_artifacts(cfg.out, artifacts)
    except OSError as exc:
        print(_diagnostic("io error", exc), file=sys.stderr)
        return EXIT_IO
    for name in sorted(artifacts):
        if name.endswith(".txt"):
            sys.stdout.write(artifacts[name])
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
