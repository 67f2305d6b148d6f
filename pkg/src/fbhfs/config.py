"""Run configuration: flat ``key = value`` files with dotted sections.

Example::

    # 4He, nested study
    system.name = he4
    basis.n = 400
    basis.ns = 100 200 400
    basis.preset = optimized
    precision.digits = 64
    hfs.alpha_fs = 7.2973525698e-3

Unknown keys and unparseable values raise :class:`ConfigError` before any
computation starts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .basis import ParameterBox
from .errors import ConfigError
from .hyperfine import ConstantsTable
from .precision import MIN_DIGITS
from .system import ParticleSystem, system_by_name

PRESETS = ("default", "optimized")
_CONSTANT_KEYS = {f.name for f in fields(ConstantsTable)}
_PAIR_KEYS = ("21", "31", "32")


@dataclass(frozen=True)
class RunConfig:
    system: str = "he4"
    masses: tuple[Decimal, ...] | None = None
    charges: tuple[Decimal, ...] | None = None
    n: int = 100
    ns: tuple[int, ...] | None = None
    preset: str = "optimized"
    boxes: tuple[tuple[Decimal, ...], ...] = ()  # six endpoints + relative share
    basis_file: str | None = None
    optimize_budget: int = 0
    optimize_n: int | None = None
    digits: int = 64
    tol: Decimal | None = None
    constants: tuple[tuple[str, Decimal], ...] = ()
    deltas: tuple[tuple[str, Decimal], ...] = ()
    spreads: tuple[tuple[str, Decimal], ...] = ()
    out: str = "fbhfs-out"
    source: str = field(default="", compare=False)

    def particle_system(self) -> ParticleSystem:
        if self.system == "custom":
            return ParticleSystem(self.masses, self.charges, name="custom")
        return system_by_name(self.system)

    def species(self) -> str:
        return "he4" if self.system == "he4" else "he3"

    def study_ns(self) -> list[int]:
        """Nested sizes ending at ``n``; defaults to n/4, n/2, n."""
        if self.ns:
            return sorted(set(self.ns) | {self.n})
        return sorted({k for k in (self.n // 4, self.n // 2, self.n) if k >= 1})

    def constants_table(self) -> ConstantsTable:
        return ConstantsTable().with_overrides(**{k: v for k, v in self.constants})

    def canonical(self) -> str:
        """Stable text form used for hashing; output paths are excluded."""
        lines = []
        for f in fields(self):
            if f.name in ("out", "source"):
                continue
            lines.append(f"{f.name}={_canon(getattr(self, f.name))}")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def as_dict(self) -> dict:
        return {f.name: _canon(getattr(self, f.name)) for f in fields(self)
                if f.name not in ("out", "source")}


def _canon(v):
    if v is None:
        return None
    if isinstance(v, tuple):
        return [_canon(x) for x in v]
    if isinstance(v, Decimal):
        return str(v)
    return v


def _decimal(key, text) -> Decimal:
    try:
        d = Decimal(text)
    except InvalidOperation:
        raise ConfigError(f"{key}: not a number: {text!r}") from None
    if not d.is_finite():
        raise ConfigError(f"{key}: not finite: {text!r}")
    return d


def _int(key, text) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {text!r}") from None


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    values: dict = {}
    boxes: dict[int, tuple] = {}
    consts, deltas, spreads = {}, {}, {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        where = f"{source}:{lineno}: {key}"
        if key == "system.name":
            values["system"] = val.lower()
        elif key in ("system.masses", "system.charges"):
            nums = tuple(_decimal(where, t) for t in val.split())
            if len(nums) != 3:
                raise ConfigError(f"{where}: need three values")
            values[key.split(".")[1]] = nums
        elif key == "basis.n":
            values["n"] = _int(where, val)
        elif key == "basis.ns":
            values["ns"] = tuple(_int(where, t) for t in val.split())
        elif key == "basis.preset":
            values["preset"] = val
        elif key.startswith("basis.box."):
            idx = _int(where, key.rsplit(".", 1)[1])
            nums = tuple(_decimal(where, t) for t in val.split())
            if len(nums) != 7:
                raise ConfigError(f"{where}: need six endpoints and a share")
            boxes[idx] = nums
        elif key == "basis.file":
            values["basis_file"] = val
        elif key == "basis.optimize_budget":
            values["optimize_budget"] = _int(where, val)
        elif key == "basis.optimize_n":
            values["optimize_n"] = _int(where, val)
        elif key == "precision.digits":
            values["digits"] = _int(where, val)
        elif key == "precision.tol":
            values["tol"] = _decimal(where, val)
        elif key.startswith("hfs.delta."):
            deltas[key.rsplit(".", 1)[1]] = _decimal(where, val)
        elif key.startswith("hfs.spread."):
            spreads[key.rsplit(".", 1)[1]] = _decimal(where, val)
        elif key.startswith("hfs.") and key[4:] in _CONSTANT_KEYS:
            consts[key[4:]] = _decimal(where, val)
        elif key == "output.dir":
            values["out"] = val
        else:
            raise ConfigError(f"{where}: unknown key")
    for name, table in (("hfs.delta", deltas), ("hfs.spread", spreads)):
        bad = set(table) - set(_PAIR_KEYS)
        if bad:
            raise ConfigError(f"{name}.*: pairs must be among {_PAIR_KEYS}, got {sorted(bad)}")
    cfg = RunConfig(
        **values,
        boxes=tuple(boxes[k] for k in sorted(boxes)),
        constants=tuple(sorted(consts.items())),
        deltas=tuple(sorted(deltas.items())),
        spreads=tuple(sorted(spreads.items())),
        source=source,
    )
    return validate(cfg)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def with_cli(cfg: RunConfig, system=None, n=None, digits=None, out=None) -> RunConfig:
    """Command-line flags win over file values."""
    kw = {}
    if system is not None:
        kw["system"] = system.lower()
    if n is not None:
        kw["n"] = n
    if digits is not None:
        kw["digits"] = digits
    if out is not None:
        kw["out"] = out
    return validate(replace(cfg, **kw))


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.system not in ("he3", "he4", "custom"):
        raise ConfigError(f"system.name must be he3, he4 or custom, got {cfg.system!r}")
    if cfg.system == "custom":
        if cfg.masses is None or cfg.charges is None:
            raise ConfigError("custom systems need system.masses and system.charges")
        try:
            cfg.particle_system()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif cfg.masses is not None or cfg.charges is not None:
        raise ConfigError("system.masses/charges are only allowed with system.name = custom")
    if cfg.n < 1:
        raise ConfigError(f"basis.n must be positive, got {cfg.n}")
    if cfg.ns is not None and (not cfg.ns or min(cfg.ns) < 1 or max(cfg.ns) > cfg.n):
        raise ConfigError(f"basis.ns must lie in [1, basis.n = {cfg.n}]")
    if cfg.preset not in PRESETS:
        raise ConfigError(f"basis.preset must be one of {PRESETS}, got {cfg.preset!r}")
    for k, b in enumerate(cfg.boxes, 1):
        try:
            ParameterBox.from_endpoints(b[:6], 0)
        except ValueError as exc:
            raise ConfigError(f"basis.box.{k}: {exc}") from None
        if b[6] <= 0:
            raise ConfigError(f"basis.box.{k}: share must be positive")
    if cfg.digits < MIN_DIGITS:
        raise ConfigError(f"precision.digits must be >= {MIN_DIGITS}, got {cfg.digits}")
    if cfg.tol is not None and not 0 < cfg.tol < 1:
        raise ConfigError("precision.tol must lie in (0, 1)")
    if cfg.optimize_budget < 0:
        raise ConfigError("basis.optimize_budget must be >= 0")
    if cfg.optimize_n is not None and cfg.optimize_n < 1:
        raise ConfigError("basis.optimize_n must be positive")
    return cfg
