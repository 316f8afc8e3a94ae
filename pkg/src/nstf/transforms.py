"""Fourier and Hermite transforms, sinc resampling, and the concentration
and coherence measures used by the reconstruction and classification code.

Conventions: the forward DFT is unnormalized, X(k) = sum_n x(n) e^{-j2pi nk/N},
and the inverse carries the 1/N factor. The Hermite transform works on the
nonuniform grid of Hermite-polynomial zeros; its forward matrix folds in the
quadrature weights 1/(M psi_{M-1}(t_m)^2) so that forward and inverse are
exact inverses of each other (Gauss-Hermite quadrature is exact at the
polynomial degrees involved).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .siggen import Signal

__all__ = [
    "Spectrum",
    "HermiteBasis",
    "TransformMatrix",
    "dft",
    "dft_matrix",
    "hermite_basis",
    "hermite_functions",
    "hermite_transform",
    "sinc_resample",
    "optimize_lambda",
    "concentration_l1",
    "coherence",
]


@dataclass(frozen=True)
class Spectrum:
    """DFT coefficients of a signal (same length as the source)."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "coeffs", np.asarray(self.coeffs, dtype=np.complex128))

    @property
    def n(self) -> int:
        return int(self.coeffs.size)


@dataclass(frozen=True)
class HermiteBasis:
    """Hermite-function basis on the zeros of H_M.

    ``funcs[p, m]`` holds psi_p(t_m); ``forward`` and ``inverse`` are the
    transform matrices (coefficients = forward @ samples-at-zeros,
    samples = inverse @ coefficients). ``lam`` records the time-scale the
    analyzed signal was resampled with (bookkeeping only, the basis itself
    is unscaled).
    """

    order: int
    zeros: np.ndarray
    funcs: np.ndarray
    lam: float
    forward: np.ndarray
    inverse: np.ndarray


@dataclass(frozen=True)
class TransformMatrix:
    entries: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in ("dft", "idft", "hermite_fwd", "hermite_inv"):
            raise ValueError(f"unknown transform kind {self.kind!r}")


def _samples(x) -> np.ndarray:
    if isinstance(x, Signal):
        return x.samples
    if isinstance(x, Spectrum):
        return x.coeffs
    return np.asarray(x, dtype=np.complex128)


def _direct_dft(x: np.ndarray, sign: float) -> np.ndarray:
    # Chunked direct summation keeps the N x N phase matrix out of memory
    # for long non-power-of-two signals.
    n = x.size
    out = np.empty(n, dtype=np.complex128)
    idx = np.arange(n)
    step = max(1, (1 << 22) // max(n, 1))
    for lo in range(0, n, step):
        k = idx[lo:lo + step, None]
        out[lo:lo + step] = np.exp(sign * 2j * np.pi * k * idx[None, :] / n) @ x
    return out


def dft(x, direction: str = "forward"):
    """Unnormalized forward DFT / 1/N-normalized inverse DFT.

    Power-of-two lengths go through the fast transform; other lengths use
    direct summation. Forward returns a :class:`Spectrum`, inverse a
    :class:`Signal`.
    """
    arr = _samples(x)
    n = arr.size
    rate = x.sample_rate if isinstance(x, Signal) else 1.0
    pow2 = n & (n - 1) == 0
    if direction == "forward":
        out = np.fft.fft(arr) if pow2 else _direct_dft(arr, -1.0)
        return Spectrum(out)
    if direction == "inverse":
        out = np.fft.ifft(arr) if pow2 else _direct_dft(arr, +1.0) / n
        return Signal(out, rate)
    raise ValueError(f"unknown direction {direction!r}")


def dft_matrix(n: int, direction: str = "forward") -> TransformMatrix:
    """Forward entries (k, n) = e^{-j2pi kn/N}; inverse carries 1/N."""
    if n < 1:
        raise ValueError("N must be >= 1")
    kn = np.outer(np.arange(n), np.arange(n))
    if direction == "forward":
        return TransformMatrix(np.exp(-2j * np.pi * kn / n), "dft")
    if direction == "inverse":
        return TransformMatrix(np.exp(2j * np.pi * kn / n) / n, "idft")
    raise ValueError(f"unknown direction {direction!r}")


def hermite_functions(m: int, t) -> np.ndarray:
    """Evaluate psi_0..psi_{m-1} at points ``t`` via the stable three-term
    recursion psi_n = t sqrt(2/n) psi_{n-1} - sqrt((n-1)/n) psi_{n-2};
    returns shape (m, len(t))."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.empty((m, t.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * t * t)
    if m > 1:
        out[1] = np.sqrt(2.0) * t * out[0]
    for n in range(2, m):
        out[n] = (t * np.sqrt(2.0 / n) * out[n - 1]
                  - np.sqrt((n - 1) / n) * out[n - 2])
    return out


def _hermite_zeros(m: int) -> np.ndarray:
    # Golub-Welsch initial guesses: eigenvalues of the symmetric Jacobi
    # matrix of the Hermite recurrence, then Newton refinement on psi_M
    # (same zeros as H_M, no overflow).
    beta = np.sqrt(np.arange(1, m) / 2.0)
    jac = np.diag(beta, 1) + np.diag(beta, -1)
    t = np.linalg.eigvalsh(jac)
    for _ in range(64):
        vals = hermite_functions(m + 1, t)
        psi_m, psi_m1 = vals[m], vals[m - 1]
        deriv = np.sqrt(2.0 * m) * psi_m1 - t * psi_m
        step = psi_m / deriv
        t = t - step
        if np.max(np.abs(step)) < 1e-12:
            break
    else:
        raise RuntimeError("Hermite root refinement did not converge")
    # Zeros of H_M come in exact +- pairs; symmetrize to kill roundoff skew.
    t = 0.5 * (t - t[::-1])
    return np.sort(t)


def hermite_basis(m: int) -> HermiteBasis:
    """Build the order-``m`` Hermite basis (2 <= m <= 512) on the zeros of
    H_m, with forward/inverse transform matrices."""
    if not 2 <= m <= 512:
        raise ValueError("basis order must lie in [2, 512]")
    zeros = _hermite_zeros(m)
    funcs = hermite_functions(m, zeros)
    w = 1.0 / (m * funcs[m - 1] ** 2)
    forward = funcs * w[None, :]
    inverse = funcs.T.copy()
    return HermiteBasis(order=m, zeros=zeros, funcs=funcs, lam=1.0,
                        forward=forward, inverse=inverse)


def hermite_transform(x, basis: HermiteBasis, direction: str = "forward"
                      ) -> np.ndarray:
    """Forward: samples at the basis zeros -> coefficients K(p).
    Inverse: coefficients -> samples at the zeros."""
    arr = _samples(x)
    if arr.size != basis.order:
        raise ValueError(
            f"length {arr.size} does not match basis order {basis.order}")
    if direction == "forward":
        return basis.forward @ arr
    if direction == "inverse":
        return basis.inverse @ arr
    raise ValueError(f"unknown direction {direction!r}")


def sinc_resample(x, targets, dt: float | None = None) -> np.ndarray:
    """Evaluate a uniformly sampled signal at arbitrary time points by the
    full (untruncated) sinc series. The uniform grid is centered:
    t_i = (i - N//2) dt. Targets must lie within [-N dt/2, N dt/2]."""
    arr = _samples(x)
    if dt is None:
        dt = 1.0 / x.sample_rate if isinstance(x, Signal) else 1.0
    targets = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    half = arr.size * dt / 2.0
    if np.any(np.abs(targets) > half * (1.0 + 1e-12)):
        raise ValueError("resample target outside the signal support")
    grid = (np.arange(arr.size) - arr.size // 2) * dt
    return np.sinc((targets[:, None] - grid[None, :]) / dt) @ arr


def optimize_lambda(x, basis_order: int, grid=None):
    """Grid-search the time-scale lambda minimizing the l1 norm of the
    Hermite coefficients of the signal resampled at lambda * t_m.

    Grid entries whose scaled zeros fall outside the sinc-resample support
    are skipped; ties break toward the smallest lambda. Returns
    (lambda_opt, coefficients)."""
    if grid is None:
        grid = np.logspace(np.log10(0.1), np.log10(10.0), 60)
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("lambda grid must be nonempty and positive")
    arr = _samples(x)
    dt = 1.0 / x.sample_rate if isinstance(x, Signal) else 1.0
    basis = hermite_basis(basis_order)
    t_max = float(np.max(np.abs(basis.zeros)))
    half = arr.size * dt / 2.0
    best = None
    for lam in grid:
        if lam * t_max > half:
            continue
        vals = sinc_resample(arr, lam * basis.zeros, dt=dt)
        coeffs = basis.forward @ vals
        l1 = concentration_l1(coeffs)
        if best is None or l1 < best[0]:
            best = (l1, float(lam), coeffs)
    if best is None:
        raise ValueError("no feasible lambda in grid (all scaled grids "
                         "exceed the signal support)")
    return best[1], best[2]


def concentration_l1(coeffs) -> float:
    """Sum of coefficient magnitudes (the l1 concentration measure)."""
    return float(np.sum(np.abs(np.asarray(coeffs))))


def coherence(phi: np.ndarray, psi: np.ndarray) -> float:
    """mu = sqrt(N) max |<phi_k, psi_j>| over measurement rows phi_k and
    basis columns psi_j; lies in [1, sqrt(N)] for unit-norm rows against an
    orthonormal basis."""
    phi = np.asarray(phi, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    if phi.ndim != 2 or psi.ndim != 2 or phi.shape[1] != psi.shape[0]:
        raise ValueError("incompatible measurement/basis dimensions")
    n = psi.shape[0]
    return float(np.sqrt(n) * np.max(np.abs(np.conj(phi) @ psi)))
