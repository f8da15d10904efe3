"""Flat key-value run configuration with line-precise validation."""

from dataclasses import dataclass, field

from .domain import DomainConfig
from .errors import ConfigError
from .multipliers import MultiplierParams


@dataclass
class DataFamilySpec:
    kind: str = "noisy"          # smooth | noisy
    q: float = 2.0               # coefficient decay exponent <|xi|>^(-q)
    band: int = 8                # max index magnitude per direction
    seed: int = 42
    sigma: float = 5.0           # normalization norm H^sigma


@dataclass
class SimConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    nu: float = 1e-3
    sigma: float = 5.0
    cfl: float = 0.5
    dt_max: float = 0.05
    quad_dt: float = 0.01
    horizon_multiple: float = 3.0
    out_interval: float = 0.5
    kappa: float = 0.25
    c_window: float = 1000.0
    data: DataFamilySpec = field(default_factory=DataFamilySpec)
    c_trans: float = 10.0
    decay_fraction: float = 0.5
    bisect_tol: float = 1.2
    run_budget: int = 40
    nus: tuple = (5e-3, 2e-3, 1e-3)
    max_workers: int = 0         # 0 = COUETTE_LAB_THREADS / cpu count
    wall_budget: float = 0.0     # per-run seconds; 0 = unlimited

    @property
    def N(self):
        return self.sigma - 2.0

    def multiplier_params(self, nu=None):
        return MultiplierParams(nu=self.nu if nu is None else nu,
                                kappa=self.kappa, c_window=self.c_window)

    def validate(self):
        if self.sigma <= 4.5:
            raise ConfigError(
                f"sigma must exceed 9/2 (threshold regularity hypothesis), got {self.sigma}")
        if self.N <= 2.5:
            raise ConfigError(f"sigma - 2 must exceed 5/2, got {self.N}")
        if not 0.0 < self.nu < 1.0:
            raise ConfigError(f"nu must lie in (0,1), got {self.nu}")
        for name in ("cfl", "dt_max", "quad_dt", "horizon_multiple", "out_interval",
                     "c_trans", "c_window"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.decay_fraction < 1.0:
            raise ConfigError("decay_fraction must lie in (0,1)")
        if self.bisect_tol <= 1.0:
            raise ConfigError("bisect_tol must exceed 1")
        if self.run_budget < 3:
            raise ConfigError("run_budget must be at least 3")
        if self.wall_budget < 0:
            raise ConfigError("wall_budget must be nonnegative (0 = unlimited)")
        if not 0.0 < self.kappa < 0.5:
            raise ConfigError(f"kappa must lie strictly in (0,1/2), got {self.kappa}")
        if self.data.band < 1:
            raise ConfigError("data.band must be >= 1")
        if self.data.kind not in ("smooth", "noisy"):
            raise ConfigError(f"data.kind must be smooth or noisy, got {self.data.kind!r}")
        if any(n <= 0 for n in self.nus):
            raise ConfigError("threshold.nus must be positive")
        # domain invariants re-checked through the dataclass
        DomainConfig(self.domain.Lx, self.domain.Ly, self.domain.Lz,
                     self.domain.Nx, self.domain.Ny, self.domain.Nz)
        return self


def _parse_nus(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


_SCHEMA = {
    # key: (section attr path, parser)
    "domain.Lx": ("domain.Lx", float),
    "domain.Ly": ("domain.Ly", float),
    "domain.Lz": ("domain.Lz", float),
    "domain.Nx": ("domain.Nx", int),
    "domain.Ny": ("domain.Ny", int),
    "domain.Nz": ("domain.Nz", int),
    "solver.nu": ("nu", float),
    "solver.sigma": ("sigma", float),
    "solver.cfl": ("cfl", float),
    "solver.dt_max": ("dt_max", float),
    "solver.quad_dt": ("quad_dt", float),
    "solver.horizon_multiple": ("horizon_multiple", float),
    "solver.out_interval": ("out_interval", float),
    "multiplier.kappa": ("kappa", float),
    "multiplier.c_window": ("c_window", float),
    "data.kind": ("data.kind", str),
    "data.q": ("data.q", float),
    "data.band": ("data.band", int),
    "data.seed": ("data.seed", int),
    "threshold.c_trans": ("c_trans", float),
    "threshold.decay_fraction": ("decay_fraction", float),
    "threshold.bisect_tol": ("bisect_tol", float),
    "threshold.run_budget": ("run_budget", int),
    "threshold.nus": ("nus", _parse_nus),
    "resources.max_workers": ("max_workers", int),
    "resources.wall_budget": ("wall_budget", float),
}


def parse_config(text) -> SimConfig:
    """Parse `key = value` lines; unknown or duplicate keys are rejected."""
    values = {}
    lines_seen = {}
    domain_kw = {}
    cfg = SimConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in lines_seen:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first set on line {lines_seen[key]})")
        lines_seen[key] = lineno
        attr, parser = _SCHEMA[key]
        try:
            parsed = parser(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: cannot parse {key} = {val!r}: {exc}") from None
        values[attr] = (parsed, lineno)

    for attr, (parsed, lineno) in values.items():
        if attr.startswith("domain."):
            domain_kw[attr.split(".", 1)[1]] = parsed
        elif attr.startswith("data."):
            setattr(cfg.data, attr.split(".", 1)[1], parsed)
        else:
            setattr(cfg, attr, parsed)
    if domain_kw:
        base = cfg.domain
        merged = {k: getattr(base, k) for k in ("Lx", "Ly", "Lz", "Nx", "Ny", "Nz")}
        merged.update(domain_kw)
        try:
            cfg.domain = DomainConfig(**merged)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    cfg.data.sigma = cfg.sigma
    try:
        cfg.validate()
    except ConfigError:
        raise
    return cfg


def serialize_config(cfg: SimConfig) -> str:
    """Emit the full key set; parse_config round-trips the result."""
    lines = []
    for key, (attr, parser) in _SCHEMA.items():
        if attr.startswith("domain."):
            val = getattr(cfg.domain, attr.split(".", 1)[1])
        elif attr.startswith("data."):
            val = getattr(cfg.data, attr.split(".", 1)[1])
        else:
            val = getattr(cfg, attr)
        if parser is _parse_nus:
            val = ",".join(repr(v) for v in val)
        elif parser is float:
            val = repr(val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"
