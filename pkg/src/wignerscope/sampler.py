"""Generation and persistence of noisy homodyne records.

Draws (X, Phi) pairs from a state's quadrature densities by per-phase
tabulated inverse CDFs, applies detection noise Y = sqrt(eta) X +
sqrt((1-eta)/2) xi from an independent RNG stream, and reads/writes
datasets as CSV with a JSON metadata header.

Reproducibility: generation is a pure function of (state, n, seed, eta).
The RNG is counter-based (Philox) with two independent streams keyed by
(seed, stream); per-repetition seeds elsewhere derive via derive_seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import (
    DatasetFormatError,
    ForwardModelError,
    ValidationError,
)
from .fockspace import DensityMatrix, StateSpec
from .tomography import x_support_radius

GENERATOR_VERSION = "wignerscope-sampler/1"

_MASK64 = (1 << 64) - 1
_PHI_STREAM = 0
_NOISE_STREAM = 1


def derive_seed(seed: int, index: int) -> int:
    """SplitMix64 mix of (seed, index): deterministic per-repetition seeds.

    z = seed + (index+1) * 0x9E3779B97F4A7C15 (mod 2^64), then the standard
    SplitMix64 finalizer (xor-shift / multiply rounds).
    """
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _stream(seed: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


class IdealSample(NamedTuple):
    x: np.ndarray
    phi: np.ndarray


@dataclass(frozen=True)
class DatasetMeta:
    state: StateSpec
    eta: float
    seed: int
    n: int
    generator_version: str = GENERATOR_VERSION

    def to_dict(self) -> dict:
        return {
            "state": self.state.to_dict(),
            "eta": self.eta,
            "seed": self.seed,
            "n": self.n,
            "generator_version": self.generator_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetMeta":
        return cls(
            state=StateSpec.from_dict(d["state"]),
            eta=float(d["eta"]),
            seed=int(d["seed"]),
            n=int(d["n"]),
            generator_version=str(d.get("generator_version", "")),
        )


class SampleRecord(NamedTuple):
    y: float
    phi: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Noisy homodyne records plus the metadata regenerating them."""

    y: np.ndarray
    phi: np.ndarray
    meta: DatasetMeta

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        phi = np.array(self.phi, dtype=float)
        if y.shape != phi.shape or y.ndim != 1:
            raise ValidationError("y and phi must be matching 1-d arrays")
        if y.size and not np.all(np.isfinite(y)):
            raise ValidationError("non-finite y value")
        if y.size and (np.min(phi) < 0.0 or np.max(phi) > math.pi):
            raise ValidationError("phi outside [0, pi]")
        if self.meta.n != y.size:
            raise ValidationError(f"meta.n = {self.meta.n} but {y.size} records")
        y.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "phi", phi)

    @property
    def n(self) -> int:
        return self.y.size

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> SampleRecord:
        return SampleRecord(float(self.y[i]), float(self.phi[i]))

    def records(self):
        for i in range(self.n):
            yield self[i]


class QuadratureSampler:
    """Inverse-CDF sampler for the ideal quadrature data of one state.

    Per cached phase (nearest reuse over a uniform grid of n_phases
    phases), the CDF of p_rho(.|phi) is tabulated on an adaptive x grid,
    refined until the monotone-cubic interpolation error estimate is at
    most cdf_tol.  Diagonal states are phase-independent and use a single
    cached phase.
    """

    def __init__(
        self,
        rho: DensityMatrix,
        *,
        n_phases: int = 1024,
        n_points: int = 4097,
        cdf_tol: float = 1e-6,
        max_points: int = 65537,
    ):
        if n_phases < 1:
            raise ValidationError("n_phases must be >= 1")
        self.rho = rho
        diag_only = not any(
            np.any(np.diagonal(rho.entries, offset=d)) for d in range(1, rho.dim)
        )
        self.n_phases = 1 if diag_only else n_phases
        self._phases = (np.arange(self.n_phases) + 0.5) * math.pi / self.n_phases
        xm = x_support_radius(rho.dim)
        n = n_points
        while True:
            grid = np.linspace(-xm, xm, n)
            pdf, cdf = self._tabulate(grid)
            err = self._interp_error_estimate(grid, pdf)
            if err <= cdf_tol or n >= max_points:
                break
            n = 2 * n - 1
        if err > cdf_tol:
            raise ValidationError(
                f"CDF table error {err:.2e} > {cdf_tol:.1e} at {n} points"
            )
        self.x_grid = grid
        self.pdf = pdf          # (n_phases, n)
        self.cdf = cdf          # (n_phases, n), cdf[:, 0] = 0
        self.table_error = err

    def _tabulate(self, grid: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n = grid.size
        # densities on the doubled grid for per-cell Simpson integration;
        # all phases at once through the diagonal decomposition
        #   p(x | phi) = s_0(x) + 2 Re sum_{d>=1} e^{i d phi} s_d(x)
        fine = np.linspace(grid[0], grid[-1], 2 * n - 1)
        from .fockspace import hermite_psi_table

        rho = self.rho
        psi = hermite_psi_table(rho.dim - 1, fine)
        profiles = np.zeros((rho.dim, fine.size), dtype=complex)
        for d in range(rho.dim):
            diag = np.diagonal(rho.entries, offset=d)
            if np.any(diag):
                profiles[d] = diag @ (psi[: rho.dim - d] * psi[d:])
        coeff = np.exp(1j * np.outer(self._phases, np.arange(rho.dim)))
        coeff[:, 1:] *= 2.0
        pdf_fine = (coeff @ profiles).real
        if float(pdf_fine.min()) < -1e-9:
            raise ForwardModelError(
                f"negative quadrature density ({pdf_fine.min():.3e}) in CDF table"
            )
        np.clip(pdf_fine, 0.0, None, out=pdf_fine)
        h = grid[1] - grid[0]
        cell = (h / 6.0) * (
            pdf_fine[:, 0:-2:2] + 4.0 * pdf_fine[:, 1::2] + pdf_fine[:, 2::2]
        )
        cdf = np.zeros((self.n_phases, n))
        np.cumsum(cell, axis=1, out=cdf[:, 1:])
        return pdf_fine[:, ::2].copy(), cdf

    @staticmethod
    def _interp_error_estimate(grid: np.ndarray, pdf: np.ndarray) -> float:
        # Hermite-cubic CDF interpolation error ~ h^4 max|p'''| / 384
        h = grid[1] - grid[0]
        d3 = np.abs(np.diff(pdf, n=3, axis=1)) / h**3
        m3 = float(np.max(d3)) if d3.size else 0.0
        return h**4 * m3 / 384.0

    def _invert(self, bucket: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Invert the tabulated CDF: per record, phase bucket and uniform u."""
        cdf = self.cdf
        pdf = self.pdf
        grid = self.x_grid
        h = grid[1] - grid[0]
        total = cdf[bucket, -1]
        target = u * total
        n = grid.size
        idx = np.empty(u.size, dtype=np.int64)
        order = np.argsort(bucket, kind="stable")
        bsorted = bucket[order]
        bounds = np.searchsorted(bsorted, np.arange(self.n_phases + 1))
        for b in range(self.n_phases):
            lo, hi = bounds[b], bounds[b + 1]
            if hi > lo:
                sel = order[lo:hi]
                idx[sel] = np.searchsorted(cdf[b], target[sel], side="right") - 1
        idx = np.clip(idx, 0, n - 2)
        c0 = cdf[bucket, idx]
        c1 = cdf[bucket, idx + 1]
        # Fritsch-Carlson clamp keeps the Hermite cubic monotone
        sec = np.maximum(c1 - c0, 1e-300) / h
        d0 = np.minimum(pdf[bucket, idx], 3.0 * sec)
        d1 = np.minimum(pdf[bucket, idx + 1], 3.0 * sec)
        s = self._solve_cubic(c1 - c0, d0 * h, d1 * h, target - c0)
        return grid[idx] + s * h

    @staticmethod
    def _solve_cubic(dc, m0, m1, t):
        """Solve H(s) = t on [0, 1] for the monotone Hermite cubic with
        H(0)=0, H(1)=dc, H'(0)=m0, H'(1)=m1 (all arrays), by bisection-
        safeguarded Newton."""
        a = m0 + m1 - 2.0 * dc
        b = 3.0 * dc - 2.0 * m0 - m1
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(dc > 0.0, t / np.where(dc > 0.0, dc, 1.0), 0.5)
        s = np.clip(s, 0.0, 1.0)
        lo = np.zeros_like(s)
        hi = np.ones_like(s)
        for _ in range(40):
            val = ((a * s + b) * s + m0) * s - t
            der = (3.0 * a * s + 2.0 * b) * s + m0
            hi = np.where(val > 0.0, s, hi)
            lo = np.where(val <= 0.0, s, lo)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(der > 0.0, val / np.where(der > 0.0, der, 1.0), 0.0)
            s_new = s - step
            bad = (s_new <= lo) | (s_new >= hi) | (der <= 0.0)
            s = np.where(bad, 0.5 * (lo + hi), s_new)
        return np.clip(s, 0.0, 1.0)

    def sample(self, n: int, seed: int) -> IdealSample:
        if n < 1:
            raise ValidationError("n must be >= 1")
        rng = _stream(seed, _PHI_STREAM)
        phi = rng.uniform(0.0, math.pi, size=n)
        u = rng.random(n)
        bucket = np.minimum(
            (phi / math.pi * self.n_phases).astype(np.int64), self.n_phases - 1
        )
        x = self._invert(bucket, u)
        return IdealSample(x=x, phi=phi)


def sample_ideal(rho: DensityMatrix, n: int, seed: int, **sampler_kwargs) -> IdealSample:
    """Draw n ideal records (X, Phi): Phi ~ U[0, pi], X | Phi from quad_density."""
    return QuadratureSampler(rho, **sampler_kwargs).sample(n, seed)


def add_noise(
    ideal: IdealSample,
    eta: float,
    seed: int,
    state: StateSpec,
) -> Dataset:
    """Apply detection noise: y = sqrt(eta) x + sqrt((1-eta)/2) g.

    The Gaussians g come from an RNG stream independent of the one that
    produced the ideal sample, keyed by the same seed.
    """
    if not 0.0 < eta < 1.0:
        raise ValidationError(f"eta must lie in (0, 1), got {eta!r}")
    x, phi = np.asarray(ideal[0], dtype=float), np.asarray(ideal[1], dtype=float)
    rng = _stream(seed, _NOISE_STREAM)
    g = rng.standard_normal(x.size)
    y = math.sqrt(eta) * x + math.sqrt((1.0 - eta) / 2.0) * g
    meta = DatasetMeta(state=state, eta=eta, seed=seed, n=x.size)
    return Dataset(y=y, phi=phi, meta=meta)


def simulate(
    spec: StateSpec,
    n: int,
    eta: float,
    seed: int,
    *,
    rho: Optional[DensityMatrix] = None,
    sampler: Optional[QuadratureSampler] = None,
    **sampler_kwargs,
) -> Dataset:
    """Materialize a state, draw ideal records, and add detection noise."""
    from .fockspace import materialize

    if sampler is None:
        if rho is None:
            rho = materialize(spec)
        sampler = QuadratureSampler(rho, **sampler_kwargs)
    ideal = sampler.sample(n, seed)
    return add_noise(ideal, eta, seed, spec)


@dataclass(frozen=True)
class Histogram2D:
    counts: np.ndarray
    y_edges: np.ndarray
    phi_edges: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        return (
            0.5 * (self.y_edges[:-1] + self.y_edges[1:]),
            0.5 * (self.phi_edges[:-1] + self.phi_edges[1:]),
        )


def bin2d(data, bins: int) -> Histogram2D:
    """Histogram records into a bins x bins grid over (y, phi)."""
    if bins < 2:
        raise ValidationError("bins must be >= 2")
    if isinstance(data, Dataset):
        y, phi = data.y, data.phi
    else:
        y, phi = np.asarray(data[0], dtype=float), np.asarray(data[1], dtype=float)
    counts, y_edges, phi_edges = np.histogram2d(
        y, phi, bins=bins, range=[[y.min(), y.max()], [0.0, math.pi]]
    )
    return Histogram2D(counts=counts, y_edges=y_edges, phi_edges=phi_edges)


def write_dataset(ds: Dataset, path) -> None:
    """CSV with one `# meta: <JSON>` header line, then `y,phi` rows at 17
    significant digits (bit-exact round trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# meta: " + json.dumps(ds.meta.to_dict(), sort_keys=True) + "\n")
        for i in range(ds.n):
            fh.write(f"{ds.y[i]:.17g},{ds.phi[i]:.17g}\n")


def read_dataset(path) -> Dataset:
    """Parse a dataset file; malformed content raises with the line number."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("# meta: "):
            raise DatasetFormatError("missing '# meta:' header", line=1)
        try:
            meta = DatasetMeta.from_dict(json.loads(header[len("# meta: "):]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetFormatError(f"bad metadata JSON ({exc})", line=1)
        ys, phis = [], []
        for lineno, raw in enumerate(fh, start=2):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(",")
            if len(parts) != 2:
                raise DatasetFormatError("expected 'y,phi'", line=lineno)
            try:
                y = float(parts[0])
                phi = float(parts[1])
            except ValueError:
                raise DatasetFormatError("non-numeric field", line=lineno)
            if not (0.0 <= phi <= math.pi):
                raise DatasetFormatError(f"phi = {phi} outside [0, pi]", line=lineno)
            if not math.isfinite(y):
                raise DatasetFormatError("non-finite y", line=lineno)
            ys.append(y)
            phis.append(phi)
    if meta.n != len(ys):
        raise DatasetFormatError(
            f"metadata n = {meta.n} but {len(ys)} record lines", line=1
        )
    return Dataset(y=np.asarray(ys), phi=np.asarray(phis), meta=meta)
