"""Assembly of the two-dimensional spectrum below a cap from the per-mode 1D
spectra: the full spectrum is the union over nonzero Fourier modes k of the
spectra of -u'' + k^2 V, each taken twice (k and -k).

Numeric assembly clusters nearby 1D eigenvalues into SpectrumLines within an
absolute width tied to the solver error estimate; exact assembly (shifted
parabolas) merges by exact arithmetic. A rigorous mode cutoff bounds the |k|
that can contribute below the cap.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .core import (
    ExactFamilyProfile,
    InvariantViolation,
    Potential,
    PreconditionError,
    StructuredProfile,
    Tolerances,
)
from .exact_family import SpectrumLine, enumerate_exact_pairs
from .schrod1d import solve_eigen, solve_levels_below

__all__ = [
    "AssembledSpectrum",
    "k_cutoff",
    "assemble",
    "check_property_p",
    "PropertyPReport",
    "PropertyPPair",
    "parallel_map",
]


def parallel_map(fn, items, workers: int = 1) -> list:
    """Order-preserving map over independent pure computations."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class AssembledSpectrum:
    """Spectrum below e_max: sorted lines, the largest |k| scanned, and the
    assembly mode ("exact" or "numeric"). Numeric line values sit within
    solver resolution of the true eigenvalues, so the e_max boundary is
    enforced up to that resolution."""

    e_max: float
    lines: tuple[SpectrumLine, ...]
    k_cut: int
    mode: str
    tolerances: Tolerances | None = None
    warnings: tuple[str, ...] = ()

    @property
    def total_count(self) -> int:
        return sum(line.multiplicity for line in self.lines)


_ground_cache: dict[tuple[str, float], float] = {}
_ground_lock = threading.Lock()


def _ground_constant(geometry: str, gamma: float) -> float:
    """Lowest eigenvalue of -u'' + base(x) u for the pure-power (cylinder) or
    pure-sine (torus) potential; 1 exactly for the cylinder with gamma=1."""
    if geometry == "cylinder" and gamma == 1.0:
        return 1.0
    key = (geometry, gamma)
    with _ground_lock:
        if key in _ground_cache:
            return _ground_cache[key]
    pot = Potential(geometry=geometry, gamma=gamma, profile=StructuredProfile())
    lam = solve_eigen(pot, 1, 1, Tolerances(eig_rel=1e-7))[0].lam
    with _ground_lock:
        _ground_cache[key] = lam
    return lam


def k_cutoff(potential: Potential, e_max: float) -> int:
    """Largest |k| that can contribute an eigenvalue <= e_max.

    On the cylinder, V >= |x|^(2 gamma) gives the mode lower bound
    lambda_1(k) >= c_gamma * k^(2/(gamma+1)) by scaling, with c_gamma the
    pure-power ground energy; the cutoff is the smallest K with
    c_gamma * (K+1)^(2/(gamma+1)) > e_max. On the torus the ground energy is
    nondecreasing in |k| and is scanned directly.
    """
    if not (e_max > 0):
        raise PreconditionError("e_max must be positive")
    if potential.geometry == "cylinder":
        # lower-bias the constant by 10x its tolerance so an uncertain c can
        # only enlarge the scan, never drop a contributing mode
        c = _ground_constant("cylinder", potential.gamma) * (1.0 - 1e-6)
        p = 2.0 / (potential.gamma + 1.0)
        cut = max(1, int((e_max / c) ** (1.0 / p)) - 2)
        while c * float(cut + 1) ** p <= e_max:
            cut += 1
        return cut
    cut = 1
    while cut < 4096:
        lam = solve_eigen(potential, cut + 1, 1, Tolerances(eig_rel=1e-6))[0]
        if lam.lam - 10.0 * lam.err_est > e_max:
            return cut
        cut += 1
    raise PreconditionError("mode cutoff exceeds 4096; e_max too large for the torus scan")


def _assemble_exact(potential: Potential, e_max: float, tol: Tolerances) -> AssembledSpectrum:
    s2 = potential.profile.s2
    pairs = enumerate_exact_pairs(s2, e_max)
    groups: dict = {}
    for k, n, pair in pairs:
        key = pair.exact_value(s2) if s2.is_rational else (pair.lin, pair.quad)
        groups.setdefault(key, []).append((k, n))
    lines = []
    for key, members in groups.items():
        contributors = []
        for k, n in members:
            contributors.extend([(k, n), (-k, n)])
        contributors = tuple(sorted(contributors, key=lambda kn: (abs(kn[0]), kn[0], kn[1])))
        if s2.is_rational:
            lines.append(SpectrumLine(value=float(key), contributors=contributors,
                                      multiplicity=len(contributors), exact_value=key))
        else:
            lin, quad = key
            lines.append(SpectrumLine(value=float(lin + quad * s2.approx),
                                      contributors=contributors,
                                      multiplicity=len(contributors), exact_pair=key))
    lines.sort(key=lambda ln: (ln.value, ln.contributors))
    k_cut = max((k for k, _, _ in pairs), default=0)
    return AssembledSpectrum(e_max=float(e_max), lines=tuple(lines), k_cut=k_cut,
                             mode="exact", tolerances=None)


def _cluster(entries: list[tuple[float, float, int, int]], cluster_abs: float
             ) -> tuple[list[SpectrumLine], list[str]]:
    """Chain-link entries (lam, err, k, n) whose consecutive gaps stay within
    cluster_abs; warn about cluster pairs closer than 3 * cluster_abs."""
    max_err = max((err for _, err, _, _ in entries), default=0.0)
    if 10.0 * max_err > cluster_abs:
        raise InvariantViolation(
            f"cluster_abs={cluster_abs!r} is below 10x the achieved error "
            f"estimate {max_err!r}; tighten eig_rel or widen cluster_abs")
    entries = sorted(entries, key=lambda e: (e[0], abs(e[2]), e[2], e[3]))
    clusters: list[list[tuple[float, float, int, int]]] = []
    for entry in entries:
        if clusters and entry[0] - clusters[-1][-1][0] <= cluster_abs:
            clusters[-1].append(entry)
        else:
            clusters.append([entry])
    warnings = []
    for prev, cur in zip(clusters, clusters[1:]):
        gap = cur[0][0] - prev[-1][0]
        if gap < 3.0 * cluster_abs:
            warnings.append(
                f"clusters at {prev[-1][0]!r} and {cur[0][0]!r} are separated by "
                f"{gap!r} < 3*cluster_abs; multiplicity attribution is ambiguous")
    lines = []
    for members in clusters:
        value = sum(lam for lam, _, _, _ in members) / len(members)
        contributors = tuple(sorted(((k, n) for _, _, k, n in members),
                                    key=lambda kn: (abs(kn[0]), kn[0], kn[1])))
        lines.append(SpectrumLine(value=value, contributors=contributors,
                                  multiplicity=len(contributors)))
    return lines, warnings


def _assemble_numeric(potential: Potential, e_max: float, tol: Tolerances,
                      workers: int) -> AssembledSpectrum:
    k_cut = k_cutoff(potential, e_max)

    def one_mode(k: int):
        return solve_levels_below(potential, k, e_max, tol)

    per_mode = parallel_map(one_mode, range(1, k_cut + 1), workers)
    entries: list[tuple[float, float, int, int]] = []
    for pairs in per_mode:
        for p in pairs:
            entries.append((p.lam, p.err_est, p.k, p.n))
            entries.append((p.lam, p.err_est, -p.k, p.n))
    lines, warnings = _cluster(entries, tol.cluster_abs)
    return AssembledSpectrum(e_max=float(e_max), lines=tuple(lines), k_cut=k_cut,
                             mode="numeric", tolerances=tol, warnings=tuple(warnings))


def assemble(potential: Potential, e_max: float, tol: Tolerances = Tolerances(),
             mode: str = "auto", workers: int = 1) -> AssembledSpectrum:
    """Assemble the 2D spectrum below e_max.

    mode "exact" requires the shifted-parabola family and merges by exact
    arithmetic; "numeric" solves each mode with the 1D solver and clusters;
    "auto" picks exact when available.
    """
    if not (e_max > 0):
        raise PreconditionError("e_max must be positive")
    is_exact = isinstance(potential.profile, ExactFamilyProfile)
    if mode == "auto":
        mode = "exact" if is_exact else "numeric"
    if mode == "exact":
        if not is_exact:
            raise PreconditionError("exact assembly needs an exact-family potential")
        return _assemble_exact(potential, e_max, tol)
    if mode == "numeric":
        return _assemble_numeric(potential, e_max, tol, workers)
    raise PreconditionError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class PropertyPPair:
    """One near-collision record between spec(P^k) and spec(P^l)."""

    k: int
    l: int
    i: int
    j: int
    lam_k: float
    lam_l: float
    gap: float
    err_bound: float
    status: str  # PASS | FAIL | UNDECIDED


@dataclass(frozen=True)
class PropertyPReport:
    """Disjointness check of the first n levels of every mode pair
    1 <= k < l <= k_range. PASS means all near-collisions are certified
    distinct, FAIL means an exact collision, UNDECIDED means some gap sits
    inside the numerical error bars."""

    n: int
    k_range: int
    mode: str
    collisions: tuple[PropertyPPair, ...]
    verdict: str


def check_property_p(potential: Potential, n: int, k_range: int,
                     tol: Tolerances = Tolerances(), workers: int = 1) -> PropertyPReport:
    """Report every near-collision |lam_i(P^k) - lam_j(P^l)| <= cluster_abs
    among the first n levels for 1 <= k < l <= k_range.

    Exact-family potentials are compared in exact arithmetic (collisions are
    definitive FAILs); numeric potentials certify distinctness only when the
    gap clears 10x the summed error estimates, and report UNDECIDED pairs
    otherwise.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if k_range < 2:
        raise PreconditionError("k_range must be >= 2")
    records: list[PropertyPPair] = []
    if isinstance(potential.profile, ExactFamilyProfile):
        s2 = potential.profile.s2
        mode = "exact"

        def level_value(k: int, i: int):
            if s2.is_rational:
                return Fraction((2 * i + 1) * k) + k * k * s2.rational
            return ((2 * i + 1) * k, k * k)

        for k in range(1, k_range + 1):
            for l in range(k + 1, k_range + 1):
                for i in range(n):
                    for j in range(n):
                        vi, vj = level_value(k, i), level_value(l, j)
                        if s2.is_rational:
                            gap = abs(float(vi - vj))
                            equal = vi == vj
                        else:
                            gap = abs((vi[0] + vi[1] * s2.approx) - (vj[0] + vj[1] * s2.approx))
                            equal = vi == vj
                        if equal:
                            records.append(PropertyPPair(k, l, i, j,
                                                         float(vi if s2.is_rational else vi[0] + vi[1] * s2.approx),
                                                         float(vj if s2.is_rational else vj[0] + vj[1] * s2.approx),
                                                         0.0, 0.0, "FAIL"))
                        elif gap <= tol.cluster_abs:
                            records.append(PropertyPPair(k, l, i, j,
                                                         float(vi if s2.is_rational else vi[0] + vi[1] * s2.approx),
                                                         float(vj if s2.is_rational else vj[0] + vj[1] * s2.approx),
                                                         gap, 0.0, "PASS"))
    else:
        mode = "numeric"
        per_mode = parallel_map(lambda k: solve_eigen(potential, k, n, tol),
                                range(1, k_range + 1), workers)
        for k in range(1, k_range + 1):
            for l in range(k + 1, k_range + 1):
                for pi in per_mode[k - 1]:
                    for pj in per_mode[l - 1]:
                        gap = abs(pi.lam - pj.lam)
                        if gap <= tol.cluster_abs:
                            err_bound = 10.0 * (pi.err_est + pj.err_est)
                            status = "PASS" if gap > err_bound else "UNDECIDED"
                            records.append(PropertyPPair(k, l, pi.n, pj.n, pi.lam, pj.lam,
                                                         gap, err_bound, status))
    if any(r.status == "FAIL" for r in records):
        verdict = "FAIL"
    elif any(r.status == "UNDECIDED" for r in records):
        verdict = "UNDECIDED"
    else:
        verdict = "PASS"
    return PropertyPReport(n=n, k_range=k_range, mode=mode,
                           collisions=tuple(records), verdict=verdict)
