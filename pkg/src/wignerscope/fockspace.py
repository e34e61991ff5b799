"""Fock-basis linear algebra and special functions.

Hermite oscillator eigenfunctions, Laguerre polynomials, standard quantum
states (number, coherent, squeezed vacuum, cat), pointwise Wigner-function
evaluation through the closed Laguerre form of the basis kernels, and the
Hilbert-Schmidt distance that realizes the state <-> Wigner isometry.

All number conventions: the oscillator eigenfunctions are

    psi_j(x) = H_j(x) exp(-x^2/2) / sqrt(sqrt(pi) 2^j j!),

the Wigner function of a state is bounded by 1/pi, and the vacuum Wigner
function is exp(-q^2 - p^2)/pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import TruncationError, UnsupportedOrderError, ValidationError

MAX_ORDER = 2000          # stability budget for hermite_psi / laguerre
DEFAULT_TAIL_MASS = 1e-8  # truncation rule: diagonal tail mass target
_MAX_AUTO_DIM = 4096

_SQRT2 = math.sqrt(2.0)
_LOG2 = math.log(2.0)
_INV_QUARTIC_PI = math.pi ** -0.25


def _check_order(j: int) -> None:
    if j < 0 or int(j) != j:
        raise ValidationError(f"order must be a nonnegative integer, got {j!r}")
    if j > MAX_ORDER:
        raise UnsupportedOrderError(f"order {j} exceeds stability budget {MAX_ORDER}")


def hermite_psi(j: int, x: float) -> float:
    """Oscillator eigenfunction psi_j(x).

    Uses the normalized three-term recurrence

        psi_{j+1} = x sqrt(2/(j+1)) psi_j - sqrt(j/(j+1)) psi_{j-1},

    with the pair carried as mantissa * 2^exponent so that the deep
    Gaussian tail (where exp(-x^2/2) underflows) still recovers correct
    values inside the classically allowed region of high orders.
    """
    _check_order(j)
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError("x must be finite")
    # psi_0 = pi^{-1/4} exp(-x^2/2), split into base-2 mantissa/exponent
    log2_psi0 = -0.25 * math.log2(math.pi) - x * x / (2.0 * _LOG2)
    expo = int(math.floor(log2_psi0))
    prev = 2.0 ** (log2_psi0 - expo)
    if j == 0:
        return math.ldexp(prev, expo)
    cur = x * _SQRT2 * prev
    for k in range(1, j):
        cur, prev = x * math.sqrt(2.0 / (k + 1)) * cur - math.sqrt(k / (k + 1.0)) * prev, cur
        m = max(abs(prev), abs(cur))
        if m > 2.0 ** 500:
            prev = math.ldexp(prev, -500)
            cur = math.ldexp(cur, -500)
            expo += 500
        elif 0.0 < m < 2.0 ** -500:
            prev = math.ldexp(prev, 500)
            cur = math.ldexp(cur, 500)
            expo -= 500
    return math.ldexp(cur, expo)


def hermite_psi_table(j_max: int, x) -> np.ndarray:
    """All psi_0..psi_{j_max} on an array of points; shape (j_max+1, len(x)).

    Same renormalized recurrence as hermite_psi, with blockwise per-element
    rescaling so intermediate under/overflow cannot corrupt the table.
    """
    _check_order(j_max)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((j_max + 1, x.size))
    log2_psi0 = -0.25 * math.log2(math.pi) - x * x / (2.0 * _LOG2)
    expo = np.floor(log2_psi0).astype(np.int32)
    prev = np.exp2(log2_psi0 - expo)
    out[0] = np.ldexp(prev, expo)
    if j_max == 0:
        return out
    cur = x * _SQRT2 * prev
    out[1] = np.ldexp(cur, expo)
    for k in range(1, j_max):
        cur, prev = x * math.sqrt(2.0 / (k + 1)) * cur - math.sqrt(k / (k + 1.0)) * prev, cur
        if k % 48 == 0:
            m = np.maximum(np.abs(prev), np.abs(cur))
            shift = np.zeros(x.size, dtype=np.int32)
            shift[m > 2.0 ** 500] = -500
            shift[(m > 0.0) & (m < 2.0 ** -500)] = 500
            if np.any(shift):
                prev = np.ldexp(prev, shift)
                cur = np.ldexp(cur, shift)
                expo = expo - shift
        out[k + 1] = np.ldexp(cur, expo)
    return out


def laguerre(k: int, x: float) -> float:
    """Laguerre polynomial L_k(x) by the stable three-term recurrence."""
    _check_order(k)
    x = float(x)
    if k == 0:
        return 1.0
    prev, cur = 1.0, 1.0 - x
    for m in range(1, k):
        prev, cur = cur, ((2 * m + 1 - x) * cur - m * prev) / (m + 1)
    return cur


def laguerre_table(k_max: int, x) -> np.ndarray:
    """All L_0..L_{k_max} on an array of points; shape (k_max+1, len(x))."""
    _check_order(k_max)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((k_max + 1, x.size))
    out[0] = 1.0
    if k_max == 0:
        return out
    out[1] = 1.0 - x
    for m in range(1, k_max):
        out[m + 1] = ((2 * m + 1 - x) * out[m] - m * out[m - 1]) / (m + 1)
    return out


def _scaled_laguerre_accumulate(d: int, coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Sum_j coef[j] * b_j^d(x) for the normalized associated-Laguerre family

        b_j^d(x) = sqrt(j!/(j+d)!) x^{d/2} e^{-x/2} L_j^{(d)}(x).

    These are displacement-operator matrix elements, uniformly bounded by 1,
    so the recurrence is stable without rescaling.  coef has length n_j.
    """
    n_j = coef.shape[0]
    log_b0 = -0.5 * x + 0.5 * d * np.log(np.where(x > 0.0, x, 1.0)) - 0.5 * gammaln(d + 1)
    b_prev = np.exp(log_b0)
    if d > 0:
        b_prev = np.where(x > 0.0, b_prev, 0.0)
    acc = coef[0] * b_prev
    if n_j == 1:
        return acc
    b_cur = ((d + 1.0 - x) / math.sqrt(d + 1.0)) * b_prev
    acc = acc + coef[1] * b_cur
    for j in range(1, n_j - 1):
        b_cur, b_prev = (
            (2 * j + d + 1 - x) / math.sqrt((j + 1.0) * (j + d + 1.0)) * b_cur
            - math.sqrt(j * (j + d) / ((j + 1.0) * (j + d + 1.0))) * b_prev,
            b_cur,
        )
        acc = acc + coef[j + 1] * b_cur
    return acc


@dataclass(frozen=True)
class PhasePoint:
    """A point z = (q, p) of phase space."""

    q: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.q) and math.isfinite(self.p)):
            raise ValidationError("phase-space coordinates must be finite")


def _as_phase_point(z) -> PhasePoint:
    if isinstance(z, PhasePoint):
        return z
    q, p = z
    return PhasePoint(float(q), float(p))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Truncated density matrix in the Fock basis.

    entries[j, k] = rho_jk; Hermitian, positive semidefinite, with
    trace(entries) = 1 - tail_mass up to tolerance.  tail_mass is the trace
    declared lost to truncation.
    """

    dim: int
    entries: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (self.dim, self.dim):
            raise ValidationError(
                f"entries shape {entries.shape} does not match dim {self.dim}"
            )
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if not 0.0 <= self.tail_mass < 1.0:
            raise ValidationError("tail_mass must lie in [0, 1)")
        scale = max(1.0, float(np.max(np.abs(entries))))
        asym = float(np.max(np.abs(entries - entries.conj().T)))
        if asym > 1e-8 * scale:
            raise ValidationError(f"entries not Hermitian (max asymmetry {asym:.3e})")
        entries = 0.5 * (entries + entries.conj().T)   # exact Hermitian symmetry
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        diag = np.diagonal(entries).real
        if np.min(diag) < -1e-12:
            raise ValidationError("negative diagonal entry beyond tolerance")
        eigmin = float(np.linalg.eigvalsh(entries)[0])
        if eigmin < -1e-10:
            raise ValidationError(f"matrix not PSD (lambda_min = {eigmin:.3e})")
        tr = float(np.trace(entries).real)
        if not (1.0 - self.tail_mass - 1e-12 <= tr <= 1.0 + 1e-12):
            raise ValidationError(
                f"trace {tr!r} inconsistent with tail_mass {self.tail_mass!r}"
            )

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "tail_mass": self.tail_mass,
            "re": self.entries.real.tolist(),
            "im": self.entries.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DensityMatrix":
        entries = np.asarray(data["re"], dtype=float) + 1j * np.asarray(
            data["im"], dtype=float
        )
        return cls(dim=int(data["dim"]), entries=entries,
                   tail_mass=float(data["tail_mass"]))


@dataclass(frozen=True)
class StateSpec:
    """Recipe for a standard state plus the truncation to use.

    kind is one of fock/coherent/squeezed/cat/custom; params holds the
    kind-specific parameters.  dim=None leaves the truncation to the tail
    rule of materialize().
    """

    kind: str
    params: dict
    dim: Optional[int] = None

    @classmethod
    def fock(cls, n: int, dim: Optional[int] = None) -> "StateSpec":
        if n < 0 or int(n) != n:
            raise ValidationError("photon number must be a nonnegative integer")
        return cls("fock", {"n": int(n)}, dim)

    @classmethod
    def coherent(cls, q0: float, p0: float, dim: Optional[int] = None) -> "StateSpec":
        return cls("coherent", {"q0": float(q0), "p0": float(p0)}, dim)

    @classmethod
    def squeezed(cls, s: float, dim: Optional[int] = None) -> "StateSpec":
        return cls("squeezed", {"s": float(s)}, dim)

    @classmethod
    def cat(cls, q0: float, axis: str = "q", dim: Optional[int] = None) -> "StateSpec":
        if axis not in ("q", "p"):
            raise ValidationError("cat axis must be 'q' or 'p'")
        return cls("cat", {"q0": float(q0), "axis": axis}, dim)

    @classmethod
    def custom(cls, matrix: DensityMatrix) -> "StateSpec":
        return cls("custom", {"matrix": matrix}, matrix.dim)

    def to_dict(self) -> dict:
        params = dict(self.params)
        if self.kind == "custom":
            params["matrix"] = params["matrix"].to_json_dict()
        return {"kind": self.kind, "params": params, "dim": self.dim}

    @classmethod
    def from_dict(cls, data: dict) -> "StateSpec":
        params = dict(data["params"])
        if data["kind"] == "custom":
            params["matrix"] = DensityMatrix.from_json_dict(params["matrix"])
        return cls(data["kind"], params, data.get("dim"))


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Fock coefficients <k|alpha> = e^{-|alpha|^2/2} alpha^k / sqrt(k!)."""
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for k in range(1, dim):
        c[k] = c[k - 1] * alpha / math.sqrt(k)
    return c


def _squeezed_amplitudes(s: float, dim: int) -> np.ndarray:
    """Fock coefficients of the squeezed vacuum with Var(Q) = e^{-2s}/2."""
    c = np.zeros(dim, dtype=complex)
    c[0] = 1.0 / math.sqrt(math.cosh(s))
    t = math.tanh(s)
    for m in range(1, (dim + 1) // 2):
        c[2 * m] = c[2 * m - 2] * (-t) * math.sqrt((2 * m - 1) / (2.0 * m))
    return c


def _pure_state_vector(spec: StateSpec, dim: int) -> np.ndarray:
    kind, params = spec.kind, spec.params
    if kind == "coherent":
        alpha = complex(params["q0"], params["p0"]) / _SQRT2
        return _coherent_amplitudes(alpha, dim)
    if kind == "squeezed":
        return _squeezed_amplitudes(params["s"], dim)
    if kind == "cat":
        alpha = params["q0"] / _SQRT2
        if params["axis"] == "p":
            alpha = 1j * alpha
        c = _coherent_amplitudes(complex(alpha), dim)
        c = c + _coherent_amplitudes(complex(-alpha), dim)
        # full-space norm of |alpha> + |-alpha>, independent of truncation
        norm = math.sqrt(2.0 * (1.0 + math.exp(-2.0 * abs(alpha) ** 2)))
        return c / norm
    raise ValidationError(f"unknown pure-state kind {kind!r}")


def materialize(
    spec: StateSpec,
    *,
    auto_grow: bool = True,
    tail_target: float = DEFAULT_TAIL_MASS,
) -> DensityMatrix:
    """Build the DensityMatrix for a StateSpec.

    The truncation dim grows (when allowed) until the diagonal tail mass is
    at most tail_target; the realized tail is recorded in tail_mass.
    """
    if spec.kind == "custom":
        return spec.params["matrix"]
    if spec.kind == "fock":
        n = spec.params["n"]
        dim = spec.dim if spec.dim is not None else n + 1
        if dim < n + 1:
            if not auto_grow:
                raise TruncationError(f"fock({n}) needs dim >= {n + 1}, got {dim}")
            dim = n + 1
        entries = np.zeros((dim, dim), dtype=complex)
        entries[n, n] = 1.0
        return DensityMatrix(dim=dim, entries=entries, tail_mass=0.0)

    dim = spec.dim if spec.dim is not None else 16
    while True:
        c = _pure_state_vector(spec, dim)
        tail = 1.0 - float(np.sum(np.abs(c) ** 2))
        tail = max(tail, 0.0)
        if tail <= tail_target:
            break
        if not auto_grow or (spec.dim is not None and not auto_grow):
            raise TruncationError(
                f"dim {dim} leaves tail mass {tail:.3e} > {tail_target:.1e}"
            )
        if dim >= _MAX_AUTO_DIM:
            raise TruncationError(
                f"tail target {tail_target:.1e} not reached at dim {_MAX_AUTO_DIM}"
            )
        dim = min(2 * dim, _MAX_AUTO_DIM)
    entries = np.outer(c, c.conj())
    return DensityMatrix(dim=dim, entries=entries, tail_mass=tail)


def wigner_eval_many(rho: DensityMatrix, q, p) -> np.ndarray:
    """Wigner function W_rho at arrays of phase-space points.

    Uses the closed Laguerre form of the basis kernels: for k = j + d,

        W_{j,j+d}(z) = ((-1)^j / pi) e^{i d theta} b_j^d(2|z|^2),

    with b_j^d the bounded normalized Laguerre family and theta = arg(q+ip).
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if q.shape != p.shape:
        raise ValidationError("q and p must have matching shapes")
    r2 = q * q + p * p
    x = 2.0 * r2
    dim = rho.dim
    theta_phase = np.where(r2 > 0.0, (q + 1j * p) / np.sqrt(np.where(r2 > 0, r2, 1.0)), 1.0)
    signs = (-1.0) ** np.arange(dim)
    total = np.zeros(q.shape, dtype=complex)
    phase_d = np.ones(q.shape, dtype=complex)
    for d in range(dim):
        coef = signs[: dim - d] * np.diagonal(rho.entries, offset=d)
        if not np.any(coef):
            phase_d = phase_d * theta_phase
            continue
        acc = _scaled_laguerre_accumulate(d, coef, x)
        if d == 0:
            total += acc
        else:
            total += 2.0 * (acc * phase_d).real
        phase_d = phase_d * theta_phase
    if np.max(np.abs(total.imag)) > 1e-10:
        raise ValidationError(
            f"non-real Wigner value, max |imag| = {np.max(np.abs(total.imag)):.3e}"
        )
    return total.real / math.pi


def wigner_eval(rho: DensityMatrix, z) -> float:
    """Wigner function W_rho(z) at a single phase-space point."""
    z = _as_phase_point(z)
    return float(wigner_eval_many(rho, [z.q], [z.p])[0])


def hs_distance_sq(rho: DensityMatrix, tau: DensityMatrix) -> float:
    """Squared Hilbert-Schmidt distance sum_jk |rho_jk - tau_jk|^2.

    Equals 2*pi times the squared L2 distance of the Wigner functions.
    The smaller matrix is zero-padded.
    """
    d = max(rho.dim, tau.dim)
    a = np.zeros((d, d), dtype=complex)
    b = np.zeros((d, d), dtype=complex)
    a[: rho.dim, : rho.dim] = rho.entries
    b[: tau.dim, : tau.dim] = tau.entries
    return float(np.sum(np.abs(a - b) ** 2))
