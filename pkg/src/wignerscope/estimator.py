"""Kernel estimator of the Wigner function, bandwidth rules, theoretical
rates, and the Monte Carlo risk harness.

The estimator averages deconvolution-kernel values over records:

    West(z) = (1/n) sum_l K_h([z, Phi_l] - Y_l / sqrt(eta)),

with [z, phi] = q cos phi + p sin phi.  Summation uses math.fsum
(exactly rounded, order-independent), so parallel scheduling cannot
change results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import BandwidthError, ConfigurationError, ValidationError
from .fockspace import PhasePoint, StateSpec, materialize, wigner_eval
from .kernels import KernelSpec, KernelTable, build_table
from .sampler import Dataset, Histogram2D, QuadratureSampler, add_noise, derive_seed
from .tomography import NoiseModel, SmoothnessClass, x_support_radius

__all__ = [
    "SmoothnessClass",
    "BandwidthRule",
    "bandwidth",
    "estimate_point",
    "estimate_grid",
    "GridSpec",
    "WignerGrid",
    "rate_phi2",
    "RiskReport",
    "risk_eval",
]

_RULES = ("opt", "h1", "h2", "r2_closed", "adaptive", "fixed")


@dataclass(frozen=True)
class BandwidthRule:
    """A bandwidth selection rule.

    opt solves 2 beta / h^r + 2 gamma / h^2 = log n; h1/h2/r2_closed are
    the closed-form variants; adaptive depends only on (n, eta); fixed
    pins h directly.
    """

    kind: str
    cls: Optional[SmoothnessClass] = None
    h: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _RULES:
            raise ValidationError(f"rule must be one of {_RULES}")
        if self.kind in ("opt", "h1", "h2", "r2_closed") and self.cls is None:
            raise ValidationError(f"rule {self.kind!r} needs a SmoothnessClass")
        if self.kind == "fixed" and not (self.h and 0.0 < self.h <= 1.0):
            raise ValidationError("fixed rule needs h in (0, 1]")

    @classmethod
    def opt(cls, smooth: SmoothnessClass) -> "BandwidthRule":
        return cls("opt", cls=smooth)

    @classmethod
    def h1(cls, smooth: SmoothnessClass) -> "BandwidthRule":
        return cls("h1", cls=smooth)

    @classmethod
    def h2(cls, smooth: SmoothnessClass) -> "BandwidthRule":
        return cls("h2", cls=smooth)

    @classmethod
    def r2_closed(cls, smooth: SmoothnessClass) -> "BandwidthRule":
        return cls("r2_closed", cls=smooth)

    @classmethod
    def adaptive(cls) -> "BandwidthRule":
        return cls("adaptive")

    @classmethod
    def fixed(cls, h: float) -> "BandwidthRule":
        return cls("fixed", h=h)


def _solve_opt(smooth: SmoothnessClass, n: int, noise: NoiseModel) -> float:
    beta, r = smooth.beta, smooth.r
    gamma = noise.gamma
    log_n = math.log(n)

    def lhs(h):
        return 2.0 * beta / h**r + 2.0 * gamma / h**2 - log_n

    if lhs(1.0) >= 0.0:
        raise BandwidthError(
            f"log n = {log_n:.3f} <= 2 beta + 2 gamma; no root in (0, 1]"
        )
    h_lo = (log_n / (2.0 * beta + 2.0 * gamma) + 2.0) ** -0.5
    while lhs(h_lo) <= 0.0:
        h_lo *= 0.5
        if h_lo < 1e-12:
            raise BandwidthError("failed to bracket the bandwidth equation")
    h = brentq(lhs, h_lo, 1.0, xtol=1e-300, rtol=4.0 * np.finfo(float).eps)
    return float(h)


def bandwidth(rule: BandwidthRule, n: int, noise: NoiseModel) -> float:
    """Bandwidth produced by a rule for sample size n and noise level eta.

    The produced value always lies in (0, 1]; rules whose formulas land
    above 1 (n too small for the asymptotics) raise BandwidthError.
    """
    if n < 2:
        raise ValidationError("n must be >= 2")
    gamma = noise.gamma
    log_n = math.log(n)
    if rule.kind == "fixed":
        return rule.h
    if rule.kind == "adaptive":
        a = log_n / (2.0 * gamma)        # = 2 eta log n / (1 - eta)
        if a <= math.sqrt(a):
            raise BandwidthError("adaptive rule needs 2 eta log n/(1-eta) > 1")
        h = (a - math.sqrt(a)) ** -0.5
    elif rule.kind == "r2_closed":
        h = math.sqrt((2.0 * rule.cls.beta + 2.0 * gamma) / log_n)
    elif rule.kind == "h1":
        a = log_n / (2.0 * gamma)
        inner = a - (rule.cls.beta / gamma) * a ** (rule.cls.r / 2.0)
        if inner <= 0.0:
            raise BandwidthError("h1 rule: inner expression not positive")
        h = inner ** -0.5
    elif rule.kind == "h2":
        h1 = bandwidth(BandwidthRule.h1(rule.cls), n, noise)
        inner = log_n / (2.0 * gamma) - (rule.cls.beta / gamma) * h1 ** -rule.cls.r
        if inner <= 0.0:
            raise BandwidthError("h2 rule: inner expression not positive")
        h = inner ** -0.5
    else:
        h = _solve_opt(rule.cls, n, noise)
    if h > 1.0:
        raise BandwidthError(f"n too small: rule {rule.kind!r} gives h = {h} > 1")
    return h


def rate_phi2(cls: SmoothnessClass, n: int, noise: NoiseModel) -> float:
    """Theoretical squared pointwise rate phi_n^2.

    n^{-beta/(beta+gamma)} for r = 2; otherwise the bias value at the
    optimal bandwidth, (L h^{r-2} / (4 pi beta r)) exp(-2 beta / h^r).
    """
    if n < 2:
        raise ValidationError("n must be >= 2")
    if cls.r == 2.0:
        return float(n) ** (-cls.beta / (cls.beta + noise.gamma))
    h = bandwidth(BandwidthRule.opt(cls), n, noise)
    return (cls.L * h ** (cls.r - 2.0) / (4.0 * math.pi * cls.beta * cls.r)) * math.exp(
        -2.0 * cls.beta / h**cls.r
    )


def _records(data) -> tuple:
    """(y, phi, weights, eta) view of a Dataset or a 2-d histogram;
    weights/eta are None where not applicable."""
    if isinstance(data, Dataset):
        return data.y, data.phi, None, data.meta.eta
    if isinstance(data, Histogram2D):
        yc, pc = data.centers()
        Y, P = np.meshgrid(yc, pc, indexing="ij")
        w = data.counts.ravel()
        keep = w > 0
        return Y.ravel()[keep], P.ravel()[keep], w[keep], None
    raise ValidationError(f"unsupported data object {type(data)!r}")


def _check_eta(data_eta, spec: KernelSpec) -> None:
    if data_eta is not None and abs(data_eta - spec.noise.eta) > 1e-12:
        raise ConfigurationError(
            f"dataset eta = {data_eta} but kernel eta = {spec.noise.eta}"
        )


def _kernel_sum(u: np.ndarray, weights, table: KernelTable) -> float:
    vals = table(u)
    if weights is None:
        return math.fsum(vals)
    return math.fsum(vals * weights)


def default_table(data, spec: KernelSpec, points) -> KernelTable:
    """Kernel table wide enough for every |[z, phi] - y/sqrt(eta)| in data."""
    y, _, _, _ = _records(data)
    z_max = max((math.hypot(p.q, p.p) for p in points), default=0.0)
    u_max = z_max + float(np.max(np.abs(y))) / math.sqrt(spec.noise.eta) + 1.0
    return build_table(spec, u_max)


def estimate_point(data, spec: KernelSpec, z, *, table: Optional[KernelTable] = None) -> float:
    """Pointwise estimate West(z) from records or from binned counts."""
    zp = z if isinstance(z, PhasePoint) else PhasePoint(*z)
    y, phi, w, data_eta = _records(data)
    _check_eta(data_eta, spec)
    if y.size == 0:
        raise ValidationError("empty dataset")
    if table is None:
        table = default_table(data, spec, [zp])
    u = zp.q * np.cos(phi) + zp.p * np.sin(phi) - y / math.sqrt(spec.noise.eta)
    total = float(w.sum()) if w is not None else float(y.size)
    return _kernel_sum(u, w, table) / total


@dataclass(frozen=True)
class GridSpec:
    q_min: float
    q_max: float
    q_steps: int
    p_min: float
    p_max: float
    p_steps: int

    def axes(self):
        return (
            np.linspace(self.q_min, self.q_max, self.q_steps),
            np.linspace(self.p_min, self.p_max, self.p_steps),
        )


@dataclass(frozen=True, eq=False)
class WignerGrid:
    q: np.ndarray
    p: np.ndarray
    values: np.ndarray  # shape (len(q), len(p))


def estimate_grid(
    data,
    spec: KernelSpec,
    grid: GridSpec,
    *,
    table: Optional[KernelTable] = None,
    threads: int = 1,
) -> WignerGrid:
    """Dense evaluation of the estimator; values identical to pointwise calls."""
    qs, ps = grid.axes()
    if qs.size == 0 or ps.size == 0:
        return WignerGrid(q=qs, p=ps, values=np.zeros((qs.size, ps.size)))
    y, phi, w, data_eta = _records(data)
    _check_eta(data_eta, spec)
    if table is None:
        corners = [PhasePoint(q, p) for q in (qs[0], qs[-1]) for p in (ps[0], ps[-1])]
        table = default_table(data, spec, corners)
    values = np.empty((qs.size, ps.size))
    jobs = [(iq, ip) for iq in range(qs.size) for ip in range(ps.size)]

    cos_phi = np.cos(phi)
    sin_phi = np.sin(phi)
    shift = y / math.sqrt(spec.noise.eta)
    total = float(w.sum()) if w is not None else float(y.size)

    def work(job):
        iq, ip = job
        u = qs[iq] * cos_phi + ps[ip] * sin_phi - shift
        return iq, ip, _kernel_sum(u, w, table) / total

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for iq, ip, v in pool.map(work, jobs):
                values[iq, ip] = v
    else:
        for job in jobs:
            iq, ip, v = work(job)
            values[iq, ip] = v
    return WignerGrid(q=qs, p=ps, values=values)


@dataclass(frozen=True, eq=False)
class RiskReport:
    """Monte Carlo pointwise-risk evaluation over repeated datasets."""

    points: tuple
    reps: int
    per_point_mse: np.ndarray
    per_rep_losses: np.ndarray     # shape (reps, n_points)
    rate_phi2: Optional[float]
    meta: dict

    def to_json_dict(self) -> dict:
        return {
            "points": [[p.q, p.p] for p in self.points],
            "reps": self.reps,
            "per_point_mse": self.per_point_mse.tolist(),
            "per_rep_losses": self.per_rep_losses.tolist(),
            "rate_phi2": self.rate_phi2,
            "meta": self.meta,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RiskReport":
        return cls(
            points=tuple(PhasePoint(q, p) for q, p in d["points"]),
            reps=int(d["reps"]),
            per_point_mse=np.asarray(d["per_point_mse"], dtype=float),
            per_rep_losses=np.asarray(d["per_rep_losses"], dtype=float),
            rate_phi2=d.get("rate_phi2"),
            meta=d.get("meta", {}),
        )


def risk_eval(
    state: StateSpec,
    noise: NoiseModel,
    rule: BandwidthRule,
    variant: str,
    points: Sequence,
    n: int,
    reps: int,
    seed: int,
    *,
    threads: int = 1,
) -> RiskReport:
    """Pointwise MSE of the estimator over `reps` fresh datasets.

    Repetition j uses the derived seed derive_seed(seed, j); the report's
    manifest is sufficient to regenerate the experiment exactly.
    """
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    pts = tuple(p if isinstance(p, PhasePoint) else PhasePoint(*p) for p in points)
    if not pts:
        raise ValidationError("need at least one evaluation point")
    rho = materialize(state)
    truth = np.array([wigner_eval(rho, p) for p in pts])
    h = bandwidth(rule, n, noise)
    kspec = KernelSpec(h=h, noise=noise, variant=variant)
    sampler = QuadratureSampler(rho)
    # conservative table range: y support ~ sqrt(eta) x_max + noise tails
    u_max = (
        max(math.hypot(p.q, p.p) for p in pts)
        + x_support_radius(rho.dim)
        + 8.0 / math.sqrt(noise.eta)
    )
    table = build_table(kspec, u_max)

    def one_rep(j: int) -> np.ndarray:
        rep_seed = derive_seed(seed, j)
        ideal = sampler.sample(n, rep_seed)
        ds = add_noise(ideal, noise.eta, rep_seed, state)
        est = np.array(
            [estimate_point(ds, kspec, p, table=table) for p in pts]
        )
        return (est - truth) ** 2

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            losses = np.vstack(list(pool.map(one_rep, range(reps))))
    else:
        losses = np.vstack([one_rep(j) for j in range(reps)])
    mse = losses.mean(axis=0)
    phi2 = rate_phi2(rule.cls, n, noise) if rule.cls is not None else None
    meta = {
        "state": state.to_dict(),
        "eta": noise.eta,
        "rule": {"kind": rule.kind, "h": rule.h,
                 "cls": None if rule.cls is None else
                 {"beta": rule.cls.beta, "r": rule.cls.r, "L": rule.cls.L}},
        "bandwidth": h,
        "variant": variant,
        "points": [[p.q, p.p] for p in pts],
        "n": n,
        "reps": reps,
        "seed": seed,
        "seed_mixer": "splitmix64(seed + (j+1)*0x9E3779B97F4A7C15)",
        "truth": truth.tolist(),
    }
    return RiskReport(
        points=pts,
        reps=reps,
        per_point_mse=mse,
        per_rep_losses=losses,
        rate_phi2=phi2,
        meta=meta,
    )
