"""Domain types shared by every other module: potentials on the cylinder and
torus, exact scalars for the shifted-parabola family, smooth compactly
supported perturbations, and solver tolerances.

Everything here is an immutable value object; all operations are pure
functions, safe to call concurrently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

__all__ = [
    "GrushinError",
    "PotentialSyntaxError",
    "InvariantViolation",
    "ConvergenceError",
    "PreconditionError",
    "IntegerOverflowError",
    "RankDeficientBasis",
    "MultiplicityError",
    "ExactScalar",
    "StructuredProfile",
    "ExactFamilyProfile",
    "SampledProfile",
    "CallableProfile",
    "Potential",
    "Perturbation",
    "Tolerances",
    "parse_potential",
    "render_potential",
    "parse_exact_scalar",
    "render_exact_scalar",
    "eval_potential",
    "base_factor",
    "mollified_indicator",
    "sup_on_interval",
    "sampled_norm_estimate",
    "validate_potential",
]


class GrushinError(Exception):
    """Base class for all library errors."""


class PotentialSyntaxError(GrushinError):
    """Bad potential text. Carries the character position of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class InvariantViolation(GrushinError):
    """A declared data invariant failed validation."""


class ConvergenceError(GrushinError):
    """A numerical routine exhausted its budget. Best estimates, when
    available, are attached as ``best``."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class PreconditionError(GrushinError):
    """A documented precondition of an operation does not hold."""


class IntegerOverflowError(GrushinError):
    """Exact integer arithmetic would exceed the 64-bit guard."""


class RankDeficientBasis(GrushinError):
    """Basis vectors handed to a projected eigenproblem are not independent."""


class MultiplicityError(GrushinError):
    """A spectral line violates a multiplicity hypothesis."""


# Named constants usable as irrational scalar tags.
IRRATIONAL_TAGS: dict[str, float] = {
    "sqrt2": math.sqrt(2.0),
    "sqrt3": math.sqrt(3.0),
    "sqrt5": math.sqrt(5.0),
    "golden": (1.0 + math.sqrt(5.0)) / 2.0,
    "pi": math.pi,
    "e": math.e,
}


@dataclass(frozen=True)
class ExactScalar:
    """A scalar that supports exact comparisons: either a reduced rational or
    a tagged named irrational (used only through pair arithmetic, never
    through float equality).  ``approx`` is the numeric evaluation."""

    rational: Fraction | None
    label: str | None
    approx: float

    @classmethod
    def from_rational(cls, p: int, q: int = 1) -> "ExactScalar":
        frac = Fraction(p, q)  # reduces and normalizes the sign of q
        return cls(rational=frac, label=None, approx=float(frac))

    @classmethod
    def from_fraction(cls, frac: Fraction) -> "ExactScalar":
        return cls(rational=Fraction(frac), label=None, approx=float(frac))

    @classmethod
    def irrational(cls, label: str) -> "ExactScalar":
        if label not in IRRATIONAL_TAGS:
            raise InvariantViolation(
                f"unknown irrational tag {label!r}; known: {sorted(IRRATIONAL_TAGS)}"
            )
        return cls(rational=None, label=label, approx=IRRATIONAL_TAGS[label])

    @property
    def is_rational(self) -> bool:
        return self.rational is not None

    def __float__(self) -> float:
        return self.approx


def parse_exact_scalar(text: str) -> ExactScalar:
    """Parse ``"p"``, ``"p/q"``, or ``"irr:<tag>"``."""
    text = text.strip()
    if text.startswith("irr:"):
        return ExactScalar.irrational(text[4:])
    try:
        if "/" in text:
            p_str, q_str = text.split("/", 1)
            return ExactScalar.from_rational(int(p_str), int(q_str))
        return ExactScalar.from_rational(int(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise PotentialSyntaxError(f"bad exact scalar {text!r}: {exc}", 0) from None


def render_exact_scalar(s2: ExactScalar) -> str:
    if s2.is_rational:
        frac = s2.rational
        return f"{frac.numerator}" if frac.denominator == 1 else f"{frac.numerator}/{frac.denominator}"
    return f"irr:{s2.label}"


@dataclass(frozen=True)
class StructuredProfile:
    """V = base(x) * w_tilde(x) with w_tilde >= 1 bounded continuous.
    ``w_tilde is None`` means the constant function 1 (the parseable case)."""

    w_tilde: Callable[[np.ndarray], np.ndarray] | None = None
    sup_bound: float = 1.0


@dataclass(frozen=True)
class ExactFamilyProfile:
    """V = x^2 + s2 on the cylinder; the closed-form spectral family."""

    s2: ExactScalar


@dataclass(frozen=True)
class SampledProfile:
    """Piecewise-linear data with power-law extrapolation beyond the nodes.

    Beyond the node range the value is v_end * (|x|/|x_end|)^ext, which keeps
    the potential confining for ext > 0.
    """

    nodes: tuple[tuple[float, float], ...]
    extrapolation_exponent: float
    source: str | None = None

    def __post_init__(self):
        xs = [x for x, _ in self.nodes]
        if len(xs) < 2:
            raise InvariantViolation("sampled potential needs at least two nodes")
        if any(not math.isfinite(x) or not math.isfinite(v) for x, v in self.nodes):
            raise InvariantViolation("sampled potential nodes must be finite")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvariantViolation("sampled potential x values must be strictly increasing")
        bad = next((x for x, v in self.nodes if v < 0), None)
        if bad is not None:
            raise InvariantViolation(f"sampled potential must satisfy V >= 0; violated at x={bad}")
        if not (self.extrapolation_exponent > 0):
            raise InvariantViolation("extrapolation exponent must be > 0 (confinement)")


@dataclass(frozen=True)
class CallableProfile:
    """Direct tabulation-free evaluation, used internally for perturbed
    potentials. Not representable in the potential grammar."""

    fn: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Potential:
    geometry: str  # "cylinder" | "torus"
    gamma: float
    profile: StructuredProfile | ExactFamilyProfile | SampledProfile | CallableProfile

    def __post_init__(self):
        if self.geometry not in ("cylinder", "torus"):
            raise InvariantViolation(f"unknown geometry {self.geometry!r}")
        if not (self.gamma > 0):
            raise InvariantViolation("gamma must be positive")
        if isinstance(self.profile, ExactFamilyProfile):
            if self.geometry != "cylinder" or self.gamma != 1.0:
                raise InvariantViolation("exact family is the cylinder with gamma=1")


def base_factor(potential: Potential, x) -> np.ndarray:
    """The degenerate weight in front of the bounded part: |x|^(2*gamma) on
    the cylinder, (4 sin^2(x/2))^gamma on the torus. Both vanish only at the
    degeneracy x = 0 and match |x|^(2*gamma) there."""
    x = np.asarray(x, dtype=float)
    g = potential.gamma
    if potential.geometry == "cylinder":
        return np.abs(x) ** (2.0 * g)
    return (4.0 * np.sin(x / 2.0) ** 2) ** g


def _wrap_angle(x: np.ndarray) -> np.ndarray:
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def eval_potential(potential: Potential, x) -> np.ndarray | float:
    """Evaluate V at x (scalar or array). Total on the reals; torus input is
    wrapped into [-pi, pi]."""
    scalar = np.isscalar(x)
    x = np.asarray(x, dtype=float)
    if potential.geometry == "torus":
        x = _wrap_angle(x)
    prof = potential.profile
    if isinstance(prof, StructuredProfile):
        v = base_factor(potential, x)
        if prof.w_tilde is not None:
            v = v * np.asarray(prof.w_tilde(x), dtype=float)
    elif isinstance(prof, ExactFamilyProfile):
        v = x * x + prof.s2.approx
    elif isinstance(prof, SampledProfile):
        xs = np.array([p for p, _ in prof.nodes])
        vs = np.array([q for _, q in prof.nodes])
        v = np.interp(x, xs, vs)
        ext = prof.extrapolation_exponent
        lo, hi = xs[0], xs[-1]
        left = x < lo
        right = x > hi
        if np.any(left):
            v = np.where(left, vs[0] * (np.abs(x) / max(abs(lo), 1e-300)) ** ext, v)
        if np.any(right):
            v = np.where(right, vs[-1] * (np.abs(x) / max(abs(hi), 1e-300)) ** ext, v)
    elif isinstance(prof, CallableProfile):
        v = np.asarray(prof.fn(x), dtype=float)
    else:  # pragma: no cover - the union is closed
        raise TypeError(f"unknown profile {type(prof)}")
    return float(v) if scalar else v


# ---------------------------------------------------------------------------
# Potential mini-grammar
#
#   power:gamma=<g>            cylinder, V = |x|^(2g)
#   torus:gamma=<g>            torus,    V = (4 sin^2(x/2))^(g/2)
#   shifted:s2=<p[/q]|irr:tag> cylinder, V = x^2 + s2 (exact family)
#   table:<path>,ext=<e>[,gamma=<g>]   sampled CSV with header x,v
# ---------------------------------------------------------------------------

def _parse_kv(parts: list[str], text: str, offset: int) -> dict[str, tuple[str, int]]:
    out: dict[str, tuple[str, int]] = {}
    pos = offset
    for part in parts:
        if "=" not in part:
            raise PotentialSyntaxError(f"expected key=value, got {part!r}", pos)
        key, value = part.split("=", 1)
        if key in out:
            raise PotentialSyntaxError(f"duplicate key {key!r}", pos)
        out[key] = (value, pos + len(key) + 1)
        pos += len(part) + 1
    return out


def _float_field(kv, key, text_pos_default=0) -> float:
    value, pos = kv[key]
    try:
        return float(value)
    except ValueError:
        raise PotentialSyntaxError(f"bad number {value!r} for {key}", pos) from None


def _load_table(path: str) -> tuple[tuple[float, float], ...]:
    try:
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise PotentialSyntaxError(f"cannot read table {path!r}: {exc}", 0) from None
    if not rows or [c.strip() for c in rows[0]] != ["x", "v"]:
        raise PotentialSyntaxError(f"table {path!r} must start with header 'x,v'", 0)
    nodes = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise PotentialSyntaxError(f"table {path!r} line {lineno}: expected two columns", 0)
        try:
            nodes.append((float(row[0]), float(row[1])))
        except ValueError:
            raise PotentialSyntaxError(f"table {path!r} line {lineno}: bad number", 0) from None
    return tuple(nodes)


def parse_potential(spec: str) -> Potential:
    """Parse the potential mini-grammar into a validated Potential.

    Syntax errors carry the character position; invariant violations name the
    offending value.
    """
    text = spec.strip()
    if ":" not in text:
        raise PotentialSyntaxError("expected '<kind>:<args>'", len(text))
    kind, rest = text.split(":", 1)
    offset = len(kind) + 1
    if kind == "power" or kind == "torus":
        kv = _parse_kv(rest.split(","), text, offset)
        unknown = set(kv) - {"gamma"}
        if unknown:
            raise PotentialSyntaxError(f"unknown key {sorted(unknown)[0]!r}", kv[sorted(unknown)[0]][1])
        if "gamma" not in kv:
            raise PotentialSyntaxError("missing gamma", offset)
        gamma = _float_field(kv, "gamma")
        if gamma <= 0:
            raise PotentialSyntaxError("gamma must be > 0", kv["gamma"][1])
        geometry = "cylinder" if kind == "power" else "torus"
        return Potential(geometry=geometry, gamma=gamma, profile=StructuredProfile())
    if kind == "shifted":
        kv = _parse_kv(rest.split(","), text, offset)
        unknown = set(kv) - {"s2"}
        if unknown:
            raise PotentialSyntaxError(f"unknown key {sorted(unknown)[0]!r}", kv[sorted(unknown)[0]][1])
        if "s2" not in kv:
            raise PotentialSyntaxError("missing s2", offset)
        value, pos = kv["s2"]
        try:
            s2 = parse_exact_scalar(value)
        except PotentialSyntaxError as exc:
            raise PotentialSyntaxError(str(exc), pos) from None
        if s2.is_rational and s2.rational < 0:
            raise PotentialSyntaxError("s2 must be >= 0", pos)
        return Potential(geometry="cylinder", gamma=1.0, profile=ExactFamilyProfile(s2=s2))
    if kind == "table":
        parts = rest.split(",")
        if not parts or not parts[0]:
            raise PotentialSyntaxError("missing table path", offset)
        path = parts[0]
        kv = _parse_kv(parts[1:], text, offset + len(path) + 1)
        unknown = set(kv) - {"ext", "gamma"}
        if unknown:
            raise PotentialSyntaxError(f"unknown key {sorted(unknown)[0]!r}", kv[sorted(unknown)[0]][1])
        if "ext" not in kv:
            raise PotentialSyntaxError("missing ext", offset)
        ext = _float_field(kv, "ext")
        gamma = _float_field(kv, "gamma") if "gamma" in kv else 1.0
        nodes = _load_table(path)
        try:
            profile = SampledProfile(nodes=nodes, extrapolation_exponent=ext, source=path)
            return Potential(geometry="cylinder", gamma=gamma, profile=profile)
        except InvariantViolation as exc:
            raise PotentialSyntaxError(str(exc), offset) from None
    raise PotentialSyntaxError(f"unknown potential kind {kind!r}", 0)


def render_potential(potential: Potential) -> str:
    """Canonical text for a parseable Potential; parse_potential(render(p)) == p."""
    prof = potential.profile
    if isinstance(prof, StructuredProfile):
        if prof.w_tilde is not None:
            raise InvariantViolation("structured potential with a custom w_tilde has no text form")
        kind = "power" if potential.geometry == "cylinder" else "torus"
        return f"{kind}:gamma={potential.gamma!r}"
    if isinstance(prof, ExactFamilyProfile):
        return f"shifted:s2={render_exact_scalar(prof.s2)}"
    if isinstance(prof, SampledProfile):
        if prof.source is None:
            raise InvariantViolation("sampled potential without a source path has no text form")
        out = f"table:{prof.source},ext={prof.extrapolation_exponent!r}"
        if potential.gamma != 1.0:
            out += f",gamma={potential.gamma!r}"
        return out
    raise InvariantViolation("callable potentials have no text form")


def validate_potential(potential: Potential, n_samples: int = 257, x_max: float = 20.0) -> None:
    """Sample-based check of the class invariants (w_tilde >= 1 on the
    structured class; sampled-node invariants re-run). Raises
    InvariantViolation with the offending x."""
    if isinstance(potential.profile, StructuredProfile) and potential.profile.w_tilde is not None:
        lim = np.pi if potential.geometry == "torus" else x_max
        xs = np.linspace(-lim, lim, n_samples)
        w = np.asarray(potential.profile.w_tilde(xs), dtype=float)
        bad = np.nonzero(w < 1.0)[0]
        if bad.size:
            raise InvariantViolation(f"w_tilde < 1 at x={xs[bad[0]]!r} (value {w[bad[0]]!r})")
    if isinstance(potential.profile, SampledProfile):
        SampledProfile(potential.profile.nodes, potential.profile.extrapolation_exponent,
                       potential.profile.source)


# ---------------------------------------------------------------------------
# Suprema by dense sampling plus interval refinement
# ---------------------------------------------------------------------------

def sup_on_interval(fn: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                    rel: float = 1e-10, dense: int = 4097) -> float:
    """sup of fn over [lo, hi] to relative accuracy ``rel``: dense sampling to
    locate candidate maxima, golden-section refinement around each."""
    if hi <= lo:
        raise PreconditionError("empty interval")
    xs = np.linspace(lo, hi, dense)
    vals = np.asarray(fn(xs), dtype=float)
    best = float(np.max(vals))
    if best == 0.0:
        return 0.0
    # refine the highest-valued local maxima (plateaus produce thousands of
    # equal-value candidates; a handful of representatives is enough to pin
    # the sup, since the dense best already equals a plateau value)
    left = np.concatenate([[-np.inf], vals[:-1]])
    right = np.concatenate([vals[1:], [-np.inf]])
    is_peak = (vals >= left) & (vals >= right) & (vals >= best * (1 - 5e-3))
    candidates = np.nonzero(is_peak)[0]
    if candidates.size > 32:
        order = np.argsort(vals[candidates])[::-1]
        candidates = candidates[order[:32]]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for i in candidates:
        a = xs[max(i - 1, 0)]
        b = xs[min(i + 1, dense - 1)]
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc = float(fn(np.array([c]))[0])
        fd = float(fn(np.array([d]))[0])
        while (b - a) > rel * max(abs(a), abs(b), 1e-30) and (b - a) > 1e-300:
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = float(fn(np.array([c]))[0])
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = float(fn(np.array([d]))[0])
        best = max(best, fc, fd)
    return best


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Perturbation:
    """A smooth non-negative function vanishing outside ``support``.

    The weighted norm used by gap estimates depends on the potential it
    perturbs (|x|^(2*gamma) on the cylinder, the sine base on the torus), so
    it is computed on demand by ``sup_weighted``; ``sup_plain`` is the plain
    sup of w itself. Both are accurate to 1e-10 relative.
    """

    w: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]

    def __call__(self, x) -> np.ndarray | float:
        scalar = np.isscalar(x)
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        out = np.zeros_like(x)
        if np.any(inside):
            out[inside] = np.asarray(self.w(x[inside]), dtype=float)
        return float(out) if scalar else out

    def scaled(self, factor: float) -> "Perturbation":
        if factor < 0:
            raise PreconditionError("perturbations stay non-negative; use signed t at the operator level")
        inner = self.w
        return Perturbation(w=lambda x, _f=factor, _w=inner: _f * np.asarray(_w(x), dtype=float),
                            support=self.support)

    def _cache(self) -> dict:
        cache = getattr(self, "_sup_cache", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_sup_cache", cache)
        return cache

    def sup_plain(self, rel: float = 1e-10) -> float:
        cache = self._cache()
        key = ("plain", rel)
        if key not in cache:
            lo, hi = self.support
            cache[key] = sup_on_interval(
                lambda x: np.asarray(self.w(x), dtype=float), lo, hi, rel=rel)
        return cache[key]

    def sup_weighted(self, potential: Potential, rel: float = 1e-10) -> float:
        cache = self._cache()
        key = ("weighted", potential.geometry, potential.gamma, rel)
        if key not in cache:
            lo, hi = self.support
            cache[key] = sup_on_interval(
                lambda x: base_factor(potential, x) * np.asarray(self.w(x), dtype=float),
                lo, hi, rel=rel)
        return cache[key]


# Antiderivative of the standard bump, precomputed nodes for Gauss-Legendre.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(192)


def _bump(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


def _bump_mass(z: np.ndarray) -> np.ndarray:
    """integral of exp(-1/(1-u^2)) over [-1, min(z,1)], vectorized."""
    z = np.clip(z, -1.0, 1.0)
    half = (z + 1.0) / 2.0
    # nodes mapped into [-1, z]
    u = -1.0 + np.multiply.outer(half, _GL_NODES + 1.0)
    w = np.multiply.outer(half, _GL_WEIGHTS)
    return np.sum(w * _bump(u), axis=-1)


_BUMP_TOTAL = float(_bump_mass(np.array([1.0]))[0])


def standard_mollifier_cdf(z) -> np.ndarray | float:
    """Integral of the unit-mass standard bump from -1 to z: 0 for z <= -1,
    1 for z >= 1, smooth and strictly increasing in between. Quadrature runs
    only on the transition points, so plateau-heavy evaluations stay cheap."""
    scalar = np.isscalar(z)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.where(z >= 1.0, 1.0, 0.0)
    inside = (z > -1.0) & (z < 1.0)
    if np.any(inside):
        out[inside] = _bump_mass(z[inside]) / _BUMP_TOTAL
    return float(out[0]) if scalar else out


def mollified_indicator(a: float, b: float, eps: float) -> Perturbation:
    """The mollified indicator of [a, b]: the convolution of the standard
    mollifier at scale eps with the indicator function.

    The result is smooth, takes values in [0, 1], equals 1 on
    [a + eps, b - eps], and is supported in [a - eps, b + eps]; it is
    evaluated through the bump antiderivative, W(x) = F((x-a)/eps) -
    F((x-b)/eps).
    """
    if not (a < b):
        raise PreconditionError(f"need a < b, got a={a}, b={b}")
    if not (0 < eps <= (b - a) / 2):
        raise PreconditionError(f"need 0 < eps <= (b-a)/2, got eps={eps}")

    def w(x, _a=a, _b=b, _e=eps):
        x = np.asarray(x, dtype=float)
        return standard_mollifier_cdf((x - _a) / _e) - standard_mollifier_cdf((x - _b) / _e)

    return Perturbation(w=w, support=(a - eps, b + eps))


@dataclass(frozen=True)
class Tolerances:
    """Accuracy targets shared across the solvers.

    eig_rel      relative eigenvalue accuracy the refinement loop must reach
    cluster_abs  absolute width used to merge numeric eigenvalues into lines;
                 must stay >= 10x the achieved error estimate
    quad_rel     relative quadrature accuracy
    """

    eig_rel: float = 1e-7
    cluster_abs: float = 1e-3
    quad_rel: float = 1e-9

    def __post_init__(self):
        for name in ("eig_rel", "cluster_abs", "quad_rel"):
            if not (getattr(self, name) > 0):
                raise InvariantViolation(f"{name} must be strictly positive")


def sampled_norm_estimate(potential: Potential) -> dict:
    """Best-effort bounded-part norm for sampled data: sup of V(x)/base(x)
    over the node range, flagged because the extrapolated tail is excluded."""
    if not isinstance(potential.profile, SampledProfile):
        raise PreconditionError("only sampled potentials carry a norm estimate")
    xs = np.array([x for x, _ in potential.profile.nodes])
    lo, hi = float(xs[0]), float(xs[-1])

    def ratio(x):
        base = base_factor(potential, x)
        v = eval_potential(potential, x)
        return np.where(base > 0, v / np.maximum(base, 1e-300), 0.0)

    return {
        "w_sup_estimate": sup_on_interval(ratio, lo, hi, rel=1e-10),
        "node_range": (lo, hi),
        "extrapolated": True,
    }
