"""Run configuration in a flat ``key = value`` text format.

Keys are namespaced with dots (``f_u.family``, ``gain.beta``, ``solver.inner_tol``);
``#`` starts a comment. Every key is optional and defaults to the reference
setting: power-law values x**0.33 for users and CPs, demand w**alpha with
alpha = 1, gain 1 - phi**(1/beta) with beta = 1, capacity 1/phi, c = k = 0.2.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from peerflow.equilibrium import SolverSettings
from peerflow.errors import ConfigError
from peerflow.families import CAPACITIES, DISTRIBUTIONS, GAINS
from peerflow.market import MarketModel

AXES = ("alpha", "beta", "c")
DEFAULT_RANGES = {"alpha": (0.25, 4.0), "beta": (0.25, 4.0), "c": (0.05, 0.8)}


@dataclass(frozen=True)
class FamilySpec:
    family: str
    params: tuple[tuple[str, float], ...] = ()

    def get(self, name: str) -> float:
        return dict(self.params)[name]

    def with_param(self, name: str, value: float) -> "FamilySpec":
        d = dict(self.params)
        d[name] = float(value)
        return FamilySpec(self.family, tuple(sorted(d.items())))

    def build(self, registry: dict, role: str):
        if self.family not in registry:
            raise ConfigError(f"{role}.family: unknown family {self.family!r} (choose from {sorted(registry)})")
        cls = registry[self.family]
        allowed = {f.name for f in dataclasses.fields(cls)}
        extra = set(dict(self.params)) - allowed
        if extra:
            raise ConfigError(f"{role}: parameter(s) {sorted(extra)} not accepted by family {self.family!r}")
        try:
            return cls(**dict(self.params))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{role}: {exc}") from exc


def _power(a: float) -> FamilySpec:
    return FamilySpec("power", (("exponent", a),))


@dataclass(frozen=True)
class RunConfig:
    f_u: FamilySpec = field(default_factory=lambda: _power(0.33))
    f_v: FamilySpec = field(default_factory=lambda: _power(0.33))
    f_w: FamilySpec = field(default_factory=lambda: _power(1.0))
    gain: FamilySpec = field(default_factory=lambda: FamilySpec("power", (("beta", 1.0),)))
    capacity: FamilySpec = field(default_factory=lambda: FamilySpec("inverse-power", (("gamma", 1.0),)))
    c: float = 0.2
    k: float = 0.2
    inner_tol: float = 1e-12
    outer_tol: float = 1e-10
    t_clamp: float = 1e-9
    max_iter: int = 200
    method: str = "brent"
    sweep_axis: str = "alpha"
    sweep_from: float | None = None
    sweep_to: float | None = None
    sweep_points: int = 8
    output: str = ""
    seed: int = 0

    # -- model construction -------------------------------------------------

    def model(self) -> MarketModel:
        try:
            return MarketModel(
                f_u=self.f_u.build(DISTRIBUTIONS, "f_u"),
                f_v=self.f_v.build(DISTRIBUTIONS, "f_v"),
                f_w=self.f_w.build(DISTRIBUTIONS, "f_w"),
                gain=self.gain.build(GAINS, "gain"),
                capacity=self.capacity.build(CAPACITIES, "capacity"),
                c=self.c,
                k=self.k,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def settings(self) -> SolverSettings:
        try:
            return SolverSettings(
                inner_tol=self.inner_tol, outer_tol=self.outer_tol, t_clamp=self.t_clamp,
                max_iter=self.max_iter, method=self.method,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def with_axis(self, axis: str, value: float) -> "RunConfig":
        """Copy with the swept parameter set: alpha is the demand exponent, beta the gain parameter."""
        if axis == "alpha":
            if self.f_w.family != "power":
                raise ConfigError("the alpha axis needs f_w.family = power")
            return dataclasses.replace(self, f_w=self.f_w.with_param("exponent", value))
        if axis == "beta":
            if self.gain.family != "power":
                raise ConfigError("the beta axis needs gain.family = power")
            return dataclasses.replace(self, gain=self.gain.with_param("beta", value))
        if axis == "c":
            return dataclasses.replace(self, c=float(value))
        raise ConfigError(f"unknown sweep axis {axis!r}")

    def sweep_range(self) -> tuple[float, float]:
        lo, hi = DEFAULT_RANGES[self.sweep_axis]
        return (lo if self.sweep_from is None else self.sweep_from, hi if self.sweep_to is None else self.sweep_to)

    # -- text format ----------------------------------------------------------

    def emit(self) -> str:
        lines = []
        for role in ("f_u", "f_v", "f_w", "gain", "capacity"):
            spec: FamilySpec = getattr(self, role)
            lines.append(f"{role}.family = {spec.family}")
            lines.extend(f"{role}.{name} = {value!r}" for name, value in spec.params)
        lines += [f"c = {self.c!r}", f"k = {self.k!r}"]
        lines += [
            f"solver.inner_tol = {self.inner_tol!r}",
            f"solver.outer_tol = {self.outer_tol!r}",
            f"solver.t_clamp = {self.t_clamp!r}",
            f"solver.max_iter = {self.max_iter}",
            f"solver.method = {self.method}",
            f"sweep.axis = {self.sweep_axis}",
        ]
        if self.sweep_from is not None:
            lines.append(f"sweep.from = {self.sweep_from!r}")
        if self.sweep_to is not None:
            lines.append(f"sweep.to = {self.sweep_to!r}")
        lines += [f"sweep.points = {self.sweep_points}", f"output = {self.output}", f"seed = {self.seed}"]
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        scalars = {
            "c": ("c", float), "k": ("k", float),
            "solver.inner_tol": ("inner_tol", float), "solver.outer_tol": ("outer_tol", float),
            "solver.t_clamp": ("t_clamp", float), "solver.max_iter": ("max_iter", int),
            "solver.method": ("method", str), "sweep.axis": ("sweep_axis", str),
            "sweep.from": ("sweep_from", float), "sweep.to": ("sweep_to", float),
            "sweep.points": ("sweep_points", int), "output": ("output", str), "seed": ("seed", int),
        }
        values: dict = {}
        families: dict[str, str] = {}
        params: dict[str, dict[str, float]] = {}
        seen = set()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in seen:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            seen.add(key)
            role, _, name = key.partition(".")
            try:
                if key in scalars:
                    attr, typ = scalars[key]
                    values[attr] = typ(value)
                elif role in ("f_u", "f_v", "f_w", "gain", "capacity") and name:
                    if name == "family":
                        families[role] = value
                    else:
                        params.setdefault(role, {})[name] = float(value)
                else:
                    raise ConfigError(f"line {lineno}: unknown key {key!r}")
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
        default = cls()
        for role in ("f_u", "f_v", "f_w", "gain", "capacity"):
            base: FamilySpec = getattr(default, role)
            fam = families.get(role, base.family)
            given = params.get(role, {})
            merged = dict(base.params) if fam == base.family else {}
            merged.update(given)
            values[role] = FamilySpec(fam, tuple(sorted(merged.items())))
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.parse(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc

    def validate(self) -> None:
        if self.sweep_axis not in AXES:
            raise ConfigError(f"sweep.axis must be one of {AXES}, got {self.sweep_axis!r}")
        if self.sweep_points < 2:
            raise ConfigError("sweep.points must be at least 2")
        if self.method not in ("brent", "bisect"):
            raise ConfigError(f"solver.method must be brent or bisect, got {self.method!r}")
        self.model()
        self.settings()
