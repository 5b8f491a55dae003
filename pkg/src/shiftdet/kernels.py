"""Kernel evaluators and problem configuration.

Builds every kernel in the factorization chain -- the generalized sine
kernel S~, its shifted companion S, the general V with shift table, the
one-dimensional reduction W, the loop/line matrix kernels M and N, and the
asymptotic kernels U+/U-/M0 -- from a small registry of admissible
amplitude/phase functions.

All evaluators are vectorized: scalar kernels map broadcastable complex
arrays (lam, mu) to a broadcast array; matrix kernels append a trailing
(N, N) axis.  Near-diagonal removable singularities are evaluated through
divided-difference forms that carry no cancellation, switched on at
|lam - mu| < delta0 = 1e-4 * (b - a).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import ceil, pi
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ConfigError", "NumericError",
    "FunctionSpec", "ShiftSpec", "VectorPairSpec",
    "NumericsConfig", "ToleranceConfig", "ProblemConfig",
    "problem_config_from_json",
    "eval_e", "gsk_kernel", "shift_kernel",
    "gsk_vector_pair", "gsk_shift_spec", "general_kernel_V",
    "W_kernel", "M_kernel", "N_kernel",
    "U_plus_kernel", "U_minus_kernel", "M0_kernel",
    "near_diagonal_mask",
]

# fraction of (b - a) below which the divided-difference branch takes over
DIAG_SWITCH_FRACTION = 1e-4


class ConfigError(ValueError):
    """A problem configuration violates a validation rule."""


class NumericError(RuntimeError):
    """A numerical computation failed (singular system, non-finite result)."""


def _sinc(w):
    """sin(w)/w, complex-safe, series near 0."""
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < 1e-4
    wd = np.where(small, 1.0, w)
    return np.where(small, 1.0 - w * w / 6.0, np.sin(wd) / wd)


def _sinhc(w):
    """sinh(w)/w, complex-safe, series near 0."""
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < 1e-4
    wd = np.where(small, 1.0, w)
    return np.where(small, 1.0 + w * w / 6.0, np.sinh(wd) / wd)


def near_diagonal_mask(lam, mu, delta0: float):
    """Boolean mask selecting pairs handled by the divided-difference branch."""
    return np.abs(np.asarray(lam) - np.asarray(mu)) < delta0


# --------------------------------------------------------------------------
# function registry
# --------------------------------------------------------------------------

_KINDS = ("constant", "polynomial", "scaled_gaussian_entire")


@dataclass(frozen=True)
class FunctionSpec:
    """An admissible amplitude or phase function.

    Only entire kinds are registered, so every shifted evaluation point
    mu +- ic, lam +- ic/2 is automatically inside the domain of holomorphy.
    """

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown function kind {self.kind!r}; "
                              f"registered kinds: {', '.join(_KINDS)}")
        if self.kind == "polynomial" and not self.params.get("coeffs"):
            raise ConfigError("polynomial needs a nonempty 'coeffs' list")

    # -- constructors ------------------------------------------------------
    @staticmethod
    def constant(value) -> "FunctionSpec":
        return FunctionSpec("constant", {"value": complex(value)})

    @staticmethod
    def polynomial(coeffs: Sequence[complex]) -> "FunctionSpec":
        return FunctionSpec("polynomial", {"coeffs": [complex(c) for c in coeffs]})

    @staticmethod
    def identity() -> "FunctionSpec":
        return FunctionSpec.polynomial([0.0, 1.0])

    @staticmethod
    def scaled_gaussian(amplitude, center, scale) -> "FunctionSpec":
        return FunctionSpec("scaled_gaussian_entire", {
            "amplitude": complex(amplitude),
            "center": complex(center),
            "scale": complex(scale),
        })

    # -- evaluation --------------------------------------------------------
    def value(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "constant":
            return np.broadcast_to(self.params["value"], z.shape).copy()
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(z, np.asarray(self.params["coeffs"]))
        A, mu0, s = (self.params["amplitude"], self.params["center"],
                     self.params["scale"])
        return A * np.exp(-s * (z - mu0) ** 2)

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "constant":
            return np.zeros(z.shape, dtype=complex)
        if self.kind == "polynomial":
            c = np.polynomial.polynomial.polyder(np.asarray(self.params["coeffs"]))
            return np.polynomial.polynomial.polyval(z, c) + np.zeros(z.shape, complex)
        A, mu0, s = (self.params["amplitude"], self.params["center"],
                     self.params["scale"])
        return -2.0 * s * (z - mu0) * self.value(z)

    def divided_difference(self, z1, z2):
        """(f(z1) - f(z2)) / (z1 - z2), exact and cancellation-free.

        Well-defined on the diagonal, where it returns f'(z1).
        """
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        if self.kind == "constant":
            return np.zeros(np.broadcast(z1, z2).shape, dtype=complex)
        if self.kind == "polynomial":
            # h_k = (z1^k - z2^k)/(z1 - z2) satisfies h_k = z1*h_{k-1} + z2^(k-1)
            coeffs = self.params["coeffs"]
            h = np.zeros(np.broadcast(z1, z2).shape, dtype=complex)
            out = np.zeros_like(h)
            p2 = np.ones_like(h)  # z2^(k-1) running power
            for k in range(1, len(coeffs)):
                h = z1 * h + p2
                p2 = p2 * z2
                out = out + coeffs[k] * h
            return out
        A, mu0, s = (self.params["amplitude"], self.params["center"],
                     self.params["scale"])
        al, be = z1 - mu0, z2 - mu0
        return (-A * s * (al + be) * np.exp(-0.5 * s * (al * al + be * be))
                * _sinhc(0.5 * s * (al + be) * (al - be)))

    # -- serialization -----------------------------------------------------
    @staticmethod
    def from_json(obj: dict, where: str = "function") -> "FunctionSpec":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ConfigError(f"{where}: expected an object with a 'kind' field")
        kind = obj["kind"]
        if kind == "constant":
            if "value" not in obj:
                raise ConfigError(f"{where}: constant needs 'value'")
            return FunctionSpec.constant(_parse_scalar(obj["value"], where))
        if kind == "polynomial":
            if "coeffs" not in obj:
                raise ConfigError(f"{where}: polynomial needs 'coeffs'")
            return FunctionSpec.polynomial(
                [_parse_scalar(c, where) for c in obj["coeffs"]])
        if kind == "scaled_gaussian_entire":
            missing = {"amplitude", "center", "scale"} - set(obj)
            if missing:
                raise ConfigError(f"{where}: scaled_gaussian_entire needs "
                                  f"{sorted(missing)}")
            return FunctionSpec.scaled_gaussian(
                _parse_scalar(obj["amplitude"], where),
                _parse_scalar(obj["center"], where),
                _parse_scalar(obj["scale"], where))
        raise ConfigError(f"{where}: unknown function kind {kind!r}")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for k, v in self.params.items():
            if isinstance(v, list):
                out[k] = [_emit_scalar(c) for c in v]
            else:
                out[k] = _emit_scalar(v)
        return out


def _parse_scalar(v, where: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, dict) and set(v) <= {"_re", "_im"}:
        return complex(v.get("_re", 0.0), v.get("_im", 0.0))
    raise ConfigError(f"{where}: expected a number or {{_re, _im}} pair, got {v!r}")


def _emit_scalar(v: complex):
    v = complex(v)
    if v.imag == 0.0:
        return v.real
    return {"_re": v.real, "_im": v.imag}


# --------------------------------------------------------------------------
# shift table and vector pair
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ShiftSpec:
    """The shift table {gamma_a, c_a, v_a}, a = 1..N (v is 1-based)."""

    gamma: np.ndarray
    c: np.ndarray
    v: np.ndarray

    @staticmethod
    def make(gamma, c, v) -> "ShiftSpec":
        gamma = np.asarray(gamma, dtype=complex)
        c = np.asarray(c, dtype=float)
        v = np.asarray(v, dtype=int)
        spec = ShiftSpec(gamma, c, v)
        spec.validate()
        return spec

    @property
    def N(self) -> int:
        return len(self.gamma)

    @property
    def v0(self) -> np.ndarray:
        """0-based row selectors."""
        return self.v - 1

    def validate(self):
        n = self.N
        if not (len(self.c) == n and len(self.v) == n):
            raise ConfigError("shift table lists gamma, c, v must have equal length")
        if np.any(self.c == 0.0):
            raise ConfigError("every shift c_a must be nonzero")
        if np.any((self.v < 1) | (self.v > n)):
            raise ConfigError(f"shift indices v must lie in 1..{n}")


@dataclass(frozen=True)
class VectorPairSpec:
    """Left/right vector evaluators defining an integrable kernel.

    E_L and E_R map a complex array of shape S to an array of shape S+(N,).
    The bilinear bracket <E_L(lam), E_R(lam)> must vanish identically on
    [a, b] (regularity), which makes the kernel bracket/(lam - mu) smooth
    on the diagonal.  ``bracket_dd`` is the divided difference of the
    bracket in its second argument; the default central-difference fallback
    is overridden with an exact form where one is known.
    """

    N: int
    E_L: Callable[[np.ndarray], np.ndarray]
    E_R: Callable[[np.ndarray], np.ndarray]
    dd_scale: float = 1e-5
    exact_bracket_dd: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def bracket(self, lam, mu):
        """<E_L(lam), E_R(mu)> (plain bilinear pairing, no conjugation)."""
        return np.einsum("...a,...a->...", self.E_L(np.asarray(lam, complex)),
                         self.E_R(np.asarray(mu, complex)))

    def bracket_dd(self, lam, mu):
        """bracket(lam, mu)/(lam - mu), finite on the diagonal.

        Uses regularity: bracket(lam, lam) = 0, so the quotient equals
        -d/dmu bracket(lam, mu)|_{mu=lam} - (mu-lam)/2 * d2/dmu2 ... with
        the derivatives taken by central differences of step dd_scale.
        """
        if self.exact_bracket_dd is not None:
            return self.exact_bracket_dd(lam, mu)
        lam = np.asarray(lam, dtype=complex)
        mu = np.asarray(mu, dtype=complex)
        d = self.dd_scale
        qp = self.bracket(lam, lam + d)
        qm = self.bracket(lam, lam - d)
        dq = (qp - qm) / (2.0 * d)
        d2q = (qp + qm) / (d * d)          # bracket(lam, lam) = 0
        return -(dq + 0.5 * (mu - lam) * d2q)

    def validate_regularity(self, a: float, b: float, tol: float = 1e-12,
                            n_grid: int = 257):
        grid = np.linspace(a, b, n_grid)
        worst = np.max(np.abs(self.bracket(grid, grid)))
        scale = max(np.max(np.abs(self.E_L(grid))) * np.max(np.abs(self.E_R(grid))), 1.0)
        if worst > tol * scale:
            raise ConfigError(
                f"vector pair violates the regularity condition: "
                f"max |<E_L, E_R>| = {worst:.3e} on [{a}, {b}]")


# --------------------------------------------------------------------------
# problem configuration
# --------------------------------------------------------------------------

@dataclass
class NumericsConfig:
    n_interval: Optional[int] = None     # None: resolved from x (8 pts/period)
    m_loop: int = 256
    m_line: int = 400
    h: Optional[float] = None            # None: min(c/2, rho)/2
    rho: float = 1.0                     # analyticity margin for F and p
    map_scale: float = 1.0
    line_rule: str = "tan"               # or "truncated" (cross-check only)
    line_truncation: float = 100.0


@dataclass
class ToleranceConfig:
    r1: float = 1e-8
    r2: float = 1e-8
    r3: float = 1e-4
    slope_min: float = -1.3
    slope_max: float = -0.7


@dataclass
class ProblemConfig:
    """Everything needed to pose one determinant problem."""

    a: float
    b: float
    x: float
    c: float
    F: FunctionSpec
    p: FunctionSpec
    shift: Optional[ShiftSpec] = None     # None: canonical two-shift table
    N: int = 2
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)

    def __post_init__(self):
        if self.shift is None:
            self.shift = gsk_shift_spec(self)
        self.N = self.shift.N

    # -- resolved numerics ---------------------------------------------------
    @property
    def delta0(self) -> float:
        return DIAG_SWITCH_FRACTION * (self.b - self.a)

    def max_phase_slope(self) -> float:
        grid = np.linspace(self.a, self.b, 512)
        return float(np.max(np.real(self.p.deriv(grid))))

    def resolved_n(self, x: Optional[float] = None) -> int:
        """Interval resolution: >= 8 nodes per oscillation period, floor 64."""
        if self.numerics.n_interval is not None:
            return self.numerics.n_interval
        x = self.x if x is None else x
        return max(64, ceil(8.0 * x * self.max_phase_slope()
                            * (self.b - self.a) / (2.0 * pi)))

    def resolved_h(self) -> float:
        if self.numerics.h is not None:
            return self.numerics.h
        return min(self.c / 2.0, self.numerics.rho) / 2.0

    # -- validation ----------------------------------------------------------
    def validate(self):
        if not self.a < self.b:
            raise ConfigError(f"need a < b, got a={self.a}, b={self.b}")
        if self.x <= 0:
            raise ConfigError(f"need x > 0, got {self.x}")
        if self.c <= 0:
            raise ConfigError(f"need c > 0, got {self.c}")
        self.shift.validate()
        h = self.resolved_h()
        half_strip = float(np.min(np.abs(self.shift.c))) / 2.0
        if h >= half_strip:
            raise ConfigError(
                f"loop half-height h={h} violates the strip constraint "
                f"h < min|c_a|/2 = {half_strip}: the contour must stay inside "
                f"|Im z| < min|c_a|/2")
        nm = self.numerics
        for name in ("m_loop", "m_line", "rho", "map_scale", "line_truncation"):
            if getattr(nm, name) <= 0:
                raise ConfigError(f"numerics.{name} must be positive")
        if nm.n_interval is not None and nm.n_interval < 2:
            raise ConfigError("numerics.n_interval must be >= 2")
        if nm.line_rule not in ("tan", "truncated"):
            raise ConfigError("numerics.line_rule must be 'tan' or 'truncated'")
        self._validate_amplitude(h)
        self._validate_phase()

    def _validate_amplitude(self, h: float):
        # |F| < 1 on a grid covering the closed stadium of radius 2h around [a,b]
        margin = 2.0 * h
        u = np.linspace(self.a - margin, self.b + margin, 81)
        v = np.linspace(-margin, margin, 25)
        grid = u[:, None] + 1j * v[None, :]
        mags = np.abs(self.F.value(grid))
        peak = float(np.max(mags))
        if peak >= 1.0:
            raise ConfigError(
                f"amplitude F reaches |F| = {peak:.4g} >= 1 on the validation "
                f"region around [{self.a}, {self.b}]")
        if peak > 0.9:
            warnings.warn(
                f"amplitude F reaches |F| = {peak:.4g} > 0.9 on the validation "
                f"region; determinant conditioning may degrade", RuntimeWarning)

    def _validate_phase(self):
        grid = np.linspace(self.a, self.b, 512)
        slopes = np.real(self.p.deriv(grid))
        if np.min(slopes) <= 0.0:
            raise ConfigError(
                f"phase p must satisfy p' > 0 on [{self.a}, {self.b}]; "
                f"min p' = {np.min(slopes):.4g}")

    # -- serialization -------------------------------------------------------
    def to_json(self) -> dict:
        nm, tl = self.numerics, self.tolerances
        out = {
            "interval": {"a": self.a, "b": self.b},
            "x": self.x,
            "c": self.c,
            "F": self.F.to_json(),
            "p": self.p.to_json(),
            "shifts": {
                "gamma": [_emit_scalar(g) for g in self.shift.gamma],
                "c": [float(v) for v in self.shift.c],
                "v": [int(v) for v in self.shift.v],
            },
            "numerics": {
                "m_loop": nm.m_loop, "m_line": nm.m_line, "rho": nm.rho,
                "map_scale": nm.map_scale, "line_rule": nm.line_rule,
                "line_truncation": nm.line_truncation,
            },
            "tolerances": {
                "r1": tl.r1, "r2": tl.r2, "r3": tl.r3,
                "slope_min": tl.slope_min, "slope_max": tl.slope_max,
            },
        }
        if nm.n_interval is not None:
            out["numerics"]["n_interval"] = nm.n_interval
        if nm.h is not None:
            out["numerics"]["h"] = nm.h
        return out


def _require_number(obj: dict, key: str, where: str) -> float:
    if key not in obj:
        raise ConfigError(f"{where}: missing required field {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: field {key!r} must be a number, got {v!r}")
    return float(v)


def problem_config_from_json(obj: dict) -> ProblemConfig:
    """Parse and validate the config-file layout into a ProblemConfig.

    Layout: {interval: {a, b}, x, c, F, p, shifts?, numerics?, tolerances?}.
    Raises ConfigError with a field-specific message on any violation.
    """
    if not isinstance(obj, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = set(obj) - {"interval", "x", "c", "F", "p", "shifts",
                          "numerics", "tolerances"}
    if unknown:
        raise ConfigError(f"config: unknown top-level fields {sorted(unknown)}")
    if "interval" not in obj or not isinstance(obj["interval"], dict):
        raise ConfigError("config: missing 'interval' object with fields a, b")
    a = _require_number(obj["interval"], "a", "config.interval")
    b = _require_number(obj["interval"], "b", "config.interval")
    x = _require_number(obj, "x", "config")
    c = _require_number(obj, "c", "config")
    if "F" not in obj:
        raise ConfigError("config: missing amplitude function 'F'")
    if "p" not in obj:
        raise ConfigError("config: missing phase function 'p'")
    F = FunctionSpec.from_json(obj["F"], "config.F")
    p = FunctionSpec.from_json(obj["p"], "config.p")

    shift = None
    if "shifts" in obj:
        sh = obj["shifts"]
        if not isinstance(sh, dict) or {"gamma", "c", "v"} - set(sh):
            raise ConfigError("config.shifts: needs lists 'gamma', 'c', 'v'")
        try:
            shift = ShiftSpec.make(
                [_parse_scalar(g, "config.shifts.gamma") for g in sh["gamma"]],
                sh["c"], sh["v"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"config.shifts: {exc}") from exc

    nm = NumericsConfig()
    if "numerics" in obj:
        raw = obj["numerics"]
        if not isinstance(raw, dict):
            raise ConfigError("config.numerics: must be an object")
        known = {"n_interval", "m_loop", "m_line", "h", "rho", "map_scale",
                 "line_rule", "line_truncation"}
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"config.numerics: unknown fields {sorted(bad)}")
        for key in ("n_interval", "m_loop", "m_line"):
            if key in raw:
                if not isinstance(raw[key], int) or isinstance(raw[key], bool):
                    raise ConfigError(f"config.numerics.{key} must be an integer")
                setattr(nm, key, raw[key])
        for key in ("h", "rho", "map_scale", "line_truncation"):
            if key in raw:
                setattr(nm, key, _require_number(raw, key, "config.numerics"))
        if "line_rule" in raw:
            nm.line_rule = raw["line_rule"]

    tl = ToleranceConfig()
    if "tolerances" in obj:
        raw = obj["tolerances"]
        if not isinstance(raw, dict):
            raise ConfigError("config.tolerances: must be an object")
        known = {"r1", "r2", "r3", "slope_min", "slope_max"}
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"config.tolerances: unknown fields {sorted(bad)}")
        for key in known:
            if key in raw:
                setattr(tl, key, _require_number(raw, key, "config.tolerances"))
        for key in ("r1", "r2", "r3"):
            if getattr(tl, key) <= 0:
                raise ConfigError(f"config.tolerances.{key} must be positive")

    cfg = ProblemConfig(a=a, b=b, x=x, c=c, F=F, p=p, shift=shift,
                        numerics=nm, tolerances=tl)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# oscillatory factors and the sine-kernel family
# --------------------------------------------------------------------------

def eval_e(lam, cfg: ProblemConfig):
    """e(lam) = exp(i x p(lam) / 2)."""
    return np.exp(0.5j * cfg.x * cfg.p.value(lam))


def _phase_parts(lam, mu, cfg: ProblemConfig):
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    phi = 0.5 * cfg.x * (cfg.p.value(lam) - cfg.p.value(mu))
    ddp = cfg.p.divided_difference(lam, mu)
    return lam, mu, phi, ddp


def gsk_kernel(lam, mu, cfg: ProblemConfig):
    """Generalized sine kernel F(lam)[e(lam)/e(mu) - e(mu)/e(lam)]/(2i pi (lam-mu)).

    The numerator vanishes on the diagonal; for |lam - mu| < delta0 the
    kernel is evaluated as F * (x/2) * dd_p * sinc(phi) / pi, which is the
    same analytic function written without cancellation.  Exactly on the
    diagonal this reduces to F(lam) * x * p'(lam) / (2 pi).
    """
    lam, mu, phi, ddp = _phase_parts(lam, mu, cfg)
    F = cfg.F.value(lam)
    near = F * (0.5 * cfg.x) * ddp * _sinc(phi) / pi
    mask = near_diagonal_mask(lam, mu, cfg.delta0)
    d = np.where(mask, 1.0, lam - mu)
    direct = F * np.sin(phi) / (pi * d)
    return np.where(mask, near, direct)


def shift_kernel(lam, mu, cfg: ProblemConfig):
    """Shifted sine kernel with denominators lam - mu +- ic.

    S = ic F(lam)/(2i pi (lam-mu)) * { e(lam)/e(mu)/(lam-mu+ic)
                                       + e(mu)/e(lam)/(lam-mu-ic) };
    the brace vanishes at lam = mu, so the diagonal is removable with value
    F(lam) (x p'(lam) + 2/c) / (2 pi).
    """
    lam, mu, phi, ddp = _phase_parts(lam, mu, cfg)
    c = cfg.c
    d = lam - mu
    pole = min(np.min(np.abs(d + 1j * c)), np.min(np.abs(d - 1j * c)))
    if pole < 1e-12 * (abs(c) + 1.0):
        raise ValueError("shift_kernel evaluated at a pole lam - mu = -+ ic")
    F = cfg.F.value(lam)
    near = (F * c * (np.cos(phi) + c * (0.5 * cfg.x) * ddp * _sinc(phi))
            / (pi * (d * d + c * c)))
    mask = near_diagonal_mask(lam, mu, cfg.delta0)
    dsafe = np.where(mask, 1.0, d)
    direct = (1j * c * F / (2j * pi * dsafe)
              * (np.exp(1j * phi) / (d + 1j * c) + np.exp(-1j * phi) / (d - 1j * c)))
    return np.where(mask, near, direct)


def gsk_shift_spec(cfg: ProblemConfig) -> ShiftSpec:
    """Canonical two-shift table: gamma = (1, 1), c = (-c, c), v = (1, 2)."""
    return ShiftSpec.make([1.0, 1.0], [-cfg.c, cfg.c], [1, 2])


def gsk_vector_pair(cfg: ProblemConfig) -> VectorPairSpec:
    """The N = 2 pair generating the generalized sine kernel.

    E_L = (F/2i pi) (-1/e, e),  E_R = (e, 1/e); the bracket
    <E_L(lam), E_R(mu)> = F(lam) [e(lam)/e(mu) - e(mu)/e(lam)] / (2i pi)
    vanishes identically at mu = lam.
    """
    def E_L(z):
        z = np.asarray(z, dtype=complex)
        e = eval_e(z, cfg)
        pref = cfg.F.value(z) / (2j * pi)
        return np.stack([-pref / e, pref * e], axis=-1)

    def E_R(z):
        z = np.asarray(z, dtype=complex)
        e = eval_e(z, cfg)
        return np.stack([e, 1.0 / e], axis=-1)

    def exact_dd(lam, mu):
        # bracket/(lam - mu) = F(lam) (x/2) dd_p sinc(phi) / pi, exactly
        lam2, mu2, phi, ddp = _phase_parts(lam, mu, cfg)
        return cfg.F.value(lam2) * (0.5 * cfg.x) * ddp * _sinc(phi) / pi

    return VectorPairSpec(N=2, E_L=E_L, E_R=E_R, exact_bracket_dd=exact_dd)


def general_kernel_V(lam, mu, pair: VectorPairSpec, shift: ShiftSpec,
                     delta0: float = 1e-4):
    """V(lam,mu) = <E_L(lam),E_R(mu)>/(lam-mu) - sum_a gamma_a f_a(lam) e_{v_a}(mu)/(lam-mu+ic_a).

    Only the lam = mu singularity of the leading term is removable (via the
    regularity condition); the shifted denominators must stay away from
    their poles.
    """
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    d = lam - mu
    mask = near_diagonal_mask(lam, mu, delta0)
    dsafe = np.where(mask, 1.0, d)
    out = np.where(mask, pair.bracket_dd(lam, mu), pair.bracket(lam, mu) / dsafe)
    EL = pair.E_L(lam)
    ER = pair.E_R(mu)
    for a_idx in range(shift.N):
        den = d + 1j * shift.c[a_idx]
        if np.min(np.abs(den)) < 1e-12 * (abs(shift.c[a_idx]) + 1.0):
            raise ValueError(
                f"general_kernel_V evaluated at the shifted pole lam - mu = "
                f"-i c_{a_idx + 1}")
        out = out - (shift.gamma[a_idx] * EL[..., a_idx]
                     * ER[..., shift.v0[a_idx]] / den)
    return out


# --------------------------------------------------------------------------
# reduction kernels built on the resolvent solution
# --------------------------------------------------------------------------
# `chi` below is a ChiSolution (rhp module); only its evaluation surface is
# used, so there is no import cycle.

def W_kernel(lam, mu, chi, pair: VectorPairSpec, shift: ShiftSpec):
    """Residual one-dimensional kernel of the factorization det(I+V) = det(I+V~) det(I+W).

    W(lam,mu) = -sum_n gamma_n <F_L(lam), chi(mu - i c_n) e_n>
                               <e_{v_n}, E_R(mu)> / (lam - mu + i c_n)
    for real lam, mu in [a, b].
    """
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    FL = chi.FL_at(lam)                       # (..., N)
    ER = pair.E_R(mu)
    out = np.zeros(np.broadcast(lam, mu).shape, dtype=complex)
    for n_idx in range(shift.N):
        Cn = chi.chi_at(mu - 1j * shift.c[n_idx])     # (..., N, N)
        g = np.einsum("...a,...a->...", FL, Cn[..., :, n_idx])
        out = out - (shift.gamma[n_idx] * g * ER[..., shift.v0[n_idx]]
                     / (lam - mu + 1j * shift.c[n_idx]))
    return out


def M_kernel(lam, mu, chi, shift: ShiftSpec):
    """Loop-representation matrix kernel.

    M_{k,l}(lam,mu) = gamma_k [chi^{-1}(lam) chi(mu - i c_l)]_{v_k, l}
                      / (2 i pi (lam - mu + i c_l)),
    for lam, mu on a loop inside the strip |Im z| < min|c_l|/2.
    """
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    N = shift.N
    Ainv = chi.chi_inv_at(lam)[..., shift.v0, :]   # (..., k, r)
    Bcol = np.stack([chi.chi_at(mu - 1j * shift.c[l])[..., :, l]
                     for l in range(N)], axis=-2)   # (..., l, r)
    numer = np.einsum("...kr,...lr->...kl", Ainv, Bcol)
    den = (lam[..., None, None] - mu[..., None, None]
           + 1j * shift.c[None, :])                 # (..., 1, l) broadcast over k
    if np.min(np.abs(den)) < 1e-10:
        raise ValueError("loop kernel denominator vanished: contour violates "
                         "the strip |Im z| < min|c_l|/2")
    return (shift.gamma[:, None] * numer / (2j * pi * den))


def N_kernel(lam, mu, chi, shift: ShiftSpec, delta0: float = 1e-4):
    """Line-representation matrix kernel on the real axis.

    N_{k,l}(lam,mu) = sgn(c_k) gamma_k [I - chi^{-1}(lam + i c_k/2) chi(mu - i c_l/2)]_{v_k, l}
                      / (2 i pi (lam - mu + i (c_k + c_l)/2)).

    For compensated pairs c_k + c_l = 0 the denominator vanishes on the
    diagonal; there the entry is the exact divided difference
    sgn(c_k) gamma_k [chi^{-1}(z) dchi(z, z')]_{v_k, l} / (2 i pi) with
    z = lam + i c_k/2, z' = mu - i c_l/2 on the same horizontal line.
    """
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    N = shift.N
    shape = np.broadcast(lam, mu).shape
    Ainv = np.stack([chi.chi_inv_at(lam + 0.5j * shift.c[k])[..., shift.v0[k], :]
                     for k in range(N)], axis=-2)   # (..., k, r)
    Bcol = np.stack([chi.chi_at(mu - 0.5j * shift.c[l])[..., :, l]
                     for l in range(N)], axis=-2)   # (..., l, r)
    prod = np.einsum("...kr,...lr->...kl", Ainv, Bcol)
    eye_kl = (shift.v0[:, None] == np.arange(N)[None, :]).astype(complex)
    brack = eye_kl - prod
    csum = 0.5 * (shift.c[:, None] + shift.c[None, :])
    den = (lam[..., None, None] - mu[..., None, None] + 1j * csum)
    sgn = np.sign(shift.c)
    pref = sgn[:, None] * shift.gamma[:, None] / (2j * pi)
    compensated = np.abs(csum) < 1e-14
    with np.errstate(divide="ignore", invalid="ignore"):
        out = pref * brack / den
    # exact divided-difference branch for compensated pairs near the diagonal
    dmask = near_diagonal_mask(lam, mu, delta0)
    for k in range(N):
        for l in range(N):
            if not compensated[k, l]:
                continue
            if not np.any(dmask):
                continue
            idx = np.broadcast_to(dmask, shape)
            lam_b = np.broadcast_to(lam, shape)[idx]
            mu_b = np.broadcast_to(mu, shape)[idx]
            z = lam_b + 0.5j * shift.c[k]
            zp = mu_b - 0.5j * shift.c[l]
            # [I - chi^-1(z) chi(z')]/(z - z') == chi^-1(z) * dchi(z, z')
            dchi = chi.delta_chi(z, zp)                        # (M, N, N)
            cinv = chi.chi_inv_at(z)                           # (M, N, N)
            vals = pref[k, 0] * np.matmul(cinv, dchi)[:, shift.v0[k], l]
            sub = np.array(out[..., k, l], copy=True)
            sub[idx] = vals
            out[..., k, l] = sub
    return out


# --------------------------------------------------------------------------
# asymptotic comparison kernels
# --------------------------------------------------------------------------

def U_plus_kernel(lam, mu, alpha, c: float):
    """U+(lam,mu) = alpha(mu - ic) / alpha(lam) / (2 i pi (lam - mu + ic))."""
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    return (alpha.alpha_at(mu - 1j * c) / alpha.alpha_at(lam)
            / (2j * pi * (lam - mu + 1j * c)))


def U_minus_kernel(lam, mu, alpha, c: float):
    """U-(lam,mu) = alpha(lam) / alpha(mu + ic) / (2 i pi (lam - mu - ic))."""
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    return (alpha.alpha_at(lam) / alpha.alpha_at(mu + 1j * c)
            / (2j * pi * (lam - mu - 1j * c)))


def M0_kernel(lam, mu, alpha, c: float):
    """Block-diagonal comparison kernel diag(U-, U+) (2x2).

    The leading large-x substitute for M: replacing chi by the diagonal
    alpha-matrix in M collapses the off-diagonal entries and leaves U- in
    the (1,1) slot and U+ in the (2,2) slot.
    """
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    shape = np.broadcast(lam, mu).shape
    out = np.zeros(shape + (2, 2), dtype=complex)
    out[..., 0, 0] = U_minus_kernel(lam, mu, alpha, c)
    out[..., 1, 1] = U_plus_kernel(lam, mu, alpha, c)
    return out
