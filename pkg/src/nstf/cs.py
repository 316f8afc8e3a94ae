"""Compressive sensing for DFT-sparse signals from random sample subsets.

The measurement model keeps a subset Omega_a of sample positions. The
spectrum convention throughout is the unnormalized forward transform, so a
tone of complex amplitude A at bin k contributes A*M to the initial
transform and the synthesis model is x(n) = sum_j X_j e^{+j 2 pi k_j n / N}
with X_j the per-tone complex amplitudes. The missing samples act on the
initial transform as zero-mean noise whose variance has the closed form
mu * sum|y|^2 with mu = (N-M)/(N-1); the detection threshold is derived
from that variance and a confidence level over the N bins.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .siggen import Signal
from .transforms import Spectrum, hermite_basis

__all__ = [
    "MeasurementSet",
    "CSMatrix",
    "ThresholdModel",
    "SparseResult",
    "subsample",
    "noise_variance",
    "detection_threshold",
    "initial_transform",
    "soft_threshold",
    "single_iteration_reconstruct",
    "iterative_threshold_reconstruct",
    "omp",
    "iht",
    "adaptive_gradient",
    "sfar2d",
    "sorted_stft_separate",
    "format_sparse_result",
]


@dataclass(frozen=True)
class MeasurementSet:
    """Retained sample positions and values out of an ambient length N."""

    positions: np.ndarray
    values: np.ndarray
    n: int

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.intp)
        val = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", val)
        if pos.ndim != 1 or val.shape != pos.shape:
            raise ValueError("positions and values must be matching vectors")
        if pos.size > self.n:
            raise ValueError("more measurements than ambient samples")
        if pos.size and (pos.min() < 0 or pos.max() >= self.n):
            raise ValueError("positions out of range")
        if np.unique(pos).size != pos.size:
            raise ValueError("positions must be unique")
        if np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")

    @property
    def m(self) -> int:
        return self.positions.size


@dataclass(frozen=True)
class CSMatrix:
    """Forward-transform rows restricted to retained positions and a
    candidate bin set: entry (a, j) = e^{-j 2 pi n_a k_j / N}. Solvers use
    the conjugate of these entries as the synthesis system."""

    entries: np.ndarray
    row_positions: np.ndarray
    col_positions: np.ndarray
    n: int

    def __post_init__(self) -> None:
        e = np.asarray(self.entries, dtype=np.complex128)
        object.__setattr__(self, "entries", e)
        if e.shape != (len(self.row_positions), len(self.col_positions)):
            raise ValueError("entry shape does not match position lists")


@dataclass(frozen=True)
class ThresholdModel:
    """Spectral-noise variance and the derived detection threshold."""

    sigma2: float
    mu: float
    t: float = 0.0
    p: float = 0.99

    def __post_init__(self) -> None:
        if self.sigma2 < 0 or self.t < 0:
            raise ValueError("variance and threshold must be nonnegative")


@dataclass(frozen=True)
class SparseResult:
    """Recovered support, per-tone complex amplitudes, and solver stats."""

    support: np.ndarray
    amplitudes: np.ndarray
    iterations: int
    residual_norm: float

    def __post_init__(self) -> None:
        if len(self.support) != len(self.amplitudes):
            raise ValueError("support and amplitude lengths differ")
        if not np.isfinite(self.residual_norm):
            raise ValueError("residual norm not finite")

    def spectrum(self, n: int) -> np.ndarray:
        """Dense amplitude vector over all n bins."""
        out = np.zeros(n, dtype=np.complex128)
        out[np.asarray(self.support, dtype=np.intp)] = self.amplitudes
        return out


def _synthesis(positions: np.ndarray, bins: np.ndarray, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.outer(positions, bins) / n)


def subsample(sig: Signal, m: int, seed: int) -> MeasurementSet:
    """Keep m positions drawn uniformly without replacement."""
    n = sig.n
    if not 1 <= m <= n:
        raise ValueError("need 1 <= M <= N")
    rng = np.random.default_rng(seed)
    pos = np.sort(rng.choice(n, size=m, replace=False))
    return MeasurementSet(pos, sig.samples[pos], n)


def noise_variance(ms: MeasurementSet) -> ThresholdModel:
    """sigma^2 = mu * sum |y(a)|^2 with mu = (N-M)/(N-1): the variance of
    each noise-only bin of the unnormalized initial transform."""
    if ms.m < 1:
        raise ValueError("need at least one measurement")
    mu = (ms.n - ms.m) / (ms.n - 1)
    return ThresholdModel(float(mu * np.sum(np.abs(ms.values) ** 2)), mu)


def detection_threshold(tm: ThresholdModel, n: int, k_est: int = 0,
                        const_c: float | None = None) -> float:
    """T = (1/N) sqrt(-sigma^2 ln(1 - P^{1/N})), the per-bin level a noise
    maximum stays below with confidence P. ``k_est`` applies the (N-K)
    correction in the exponent; ``const_c`` substitutes a precomputed
    ln(1 - P^{1/N}) constant. The unnormalized initial transform is
    compared against N*T."""
    if tm.sigma2 < 0:
        raise ValueError("negative variance")
    if not 0.0 < tm.p < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    eff = n - k_est if k_est else n
    c = const_c if const_c is not None else np.log(
        1.0 - tm.p ** (1.0 / eff))
    return float(np.sqrt(-tm.sigma2 * c) / n)


def initial_transform(ms: MeasurementSet) -> Spectrum:
    """X(k) = sum_a y(a) e^{-j 2 pi n_a k / N}: the DFT over available
    positions only (zero-filled FFT)."""
    filled = np.zeros(ms.n, dtype=np.complex128)
    filled[ms.positions] = ms.values
    return Spectrum(np.fft.fft(filled))


def soft_threshold(x, lam: float):
    """Magnitude shrink by lam with phase preserved; real inputs keep the
    sign convention max(|x|-lam, 0)*sign(x)."""
    arr = np.asarray(x)
    mag = np.abs(arr)
    scale = np.where(mag > lam, 1.0 - lam / np.maximum(mag, 1e-300), 0.0)
    out = arr * scale
    return out if arr.ndim else out[()]


def _detect_support(x_init: np.ndarray, level: float) -> np.ndarray:
    """Bins strictly above the level; equal magnitudes keep lower index by
    construction of the index order."""
    return np.nonzero(np.abs(x_init) > level)[0]


def _ls_on_support(ms: MeasurementSet, support: np.ndarray) -> np.ndarray:
    a = _synthesis(ms.positions, support, ms.n)
    sol, _, rank, _ = np.linalg.lstsq(a, ms.values, rcond=None)
    if rank < support.size:
        raise ValueError("support exceeds measurement rank")
    return sol


def single_iteration_reconstruct(ms: MeasurementSet,
                                 p: float = 0.99) -> SparseResult:
    """Threshold the initial transform once, then least-squares solve on the
    detected support. Exact for noiseless inputs whose true support clears
    the threshold."""
    x0 = initial_transform(ms).coeffs
    tm = noise_variance(ms)
    tm = ThresholdModel(tm.sigma2, tm.mu, p=p)
    level = ms.n * detection_threshold(tm, ms.n)
    support = _detect_support(x0, level)
    if support.size == 0:
        return SparseResult(support, np.zeros(0, dtype=np.complex128), 1,
                            float(np.linalg.norm(ms.values)))
    amps = _ls_on_support(ms, support)
    resid = ms.values - _synthesis(ms.positions, support, ms.n) @ amps
    return SparseResult(support, amps, 1, float(np.linalg.norm(resid)))


def iterative_threshold_reconstruct(ms: MeasurementSet, p: float = 0.99,
                                    sigma_noise: float = 0.0,
                                    max_iter: int = 20) -> SparseResult:
    """Grow the support over repeated threshold passes on the measurement
    residual, re-solving on the accumulated support each time; stops when
    the residual power falls to the external noise floor or the support
    stops growing."""
    y = ms.values.copy()
    support = np.zeros(0, dtype=np.intp)
    amps = np.zeros(0, dtype=np.complex128)
    resid = y.copy()
    it = 0
    for it in range(1, max_iter + 1):
        rms = MeasurementSet(ms.positions, resid, ms.n)
        mean_pow = float(np.mean(np.abs(resid) ** 2))
        if mean_pow <= sigma_noise or mean_pow < 1e-24:
            break
        tm = noise_variance(rms)
        tm = ThresholdModel(tm.sigma2, tm.mu, p=p)
        level = ms.n * detection_threshold(tm, ms.n)
        new = _detect_support(initial_transform(rms).coeffs, level)
        grown = np.union1d(support, new).astype(np.intp)
        if grown.size > ms.m:
            raise ValueError("support exceeds measurement count")
        if grown.size == support.size or grown.size == 0:
            break
        support = grown
        amps = _ls_on_support(ms, support)
        resid = y - _synthesis(ms.positions, support, ms.n) @ amps
    return SparseResult(support, amps, it, float(np.linalg.norm(resid)))


def omp(ms: MeasurementSet, dictionary: CSMatrix | None = None,
        k: int | None = None,
        residual_tol: float | None = None) -> SparseResult:
    """Orthogonal matching pursuit with full least-squares re-fit after each
    atom; the residual stays orthogonal to every selected column."""
    if k is None and residual_tol is None:
        raise ValueError("give a sparsity k or a residual tolerance")
    if k is not None and k > ms.m:
        raise ValueError("requested sparsity exceeds measurement count")
    if dictionary is None:
        bins = np.arange(ms.n)
        synth = _synthesis(ms.positions, bins, ms.n)
    else:
        bins = np.asarray(dictionary.col_positions, dtype=np.intp)
        synth = np.conj(dictionary.entries)
    norms = np.linalg.norm(synth, axis=0)
    unit = synth / np.maximum(norms, 1e-300)
    resid = ms.values.copy()
    chosen: list[int] = []
    amps = np.zeros(0, dtype=np.complex128)
    limit = k if k is not None else ms.m
    it = 0
    for it in range(1, limit + 1):
        corr = np.abs(unit.conj().T @ resid)
        corr[chosen] = -1.0
        pick = int(np.argmax(corr))
        chosen.append(pick)
        sub = synth[:, chosen]
        amps, _, rank, _ = np.linalg.lstsq(sub, ms.values, rcond=None)
        if rank < len(chosen):
            raise ValueError("support exceeds measurement rank")
        resid = ms.values - sub @ amps
        if residual_tol is not None and np.linalg.norm(resid) < residual_tol:
            break
    order = np.argsort(bins[chosen])
    support = bins[chosen][order]
    return SparseResult(support, amps[order], it,
                        float(np.linalg.norm(resid)))


def iht(ms: MeasurementSet, k: int, step: float = 1.0, max_iter: int = 200,
        trace: list | None = None) -> SparseResult:
    """Iterative hard thresholding on the column-normalized system; every
    iterate is exactly K-sparse and the best iterate by residual is kept.
    A residual growing tenfold over a 20-iteration window aborts."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = ms.n
    b = _synthesis(ms.positions, np.arange(n), n) / np.sqrt(ms.m)
    z = ms.values / np.sqrt(ms.m)
    v = np.zeros(n, dtype=np.complex128)
    best_v = v.copy()
    best_res = float(np.linalg.norm(z))
    window: list[float] = [best_res]
    it = 0
    for it in range(1, max_iter + 1):
        grad = b.conj().T @ (z - b @ v)
        v = v + step * grad
        keep = np.argpartition(np.abs(v), n - k)[n - k:]
        mask = np.zeros(n, dtype=bool)
        mask[keep] = True
        v = np.where(mask, v, 0.0)
        if trace is not None:
            trace.append(int(np.count_nonzero(v)))
        res = float(np.linalg.norm(z - b @ v))
        if res < best_res - 1e-15:
            best_res = res
            best_v = v.copy()
        window.append(res)
        if len(window) > 20:
            window.pop(0)
            if window[-1] > 10.0 * window[0] and window[-1] > 1e-12:
                raise RuntimeError(
                    f"hard-thresholding diverged: residual {window[0]:.3e} "
                    f"-> {window[-1]:.3e} over 20 iterations")
        if res < 1e-14:
            break
    support = np.nonzero(best_v)[0]
    amps = best_v[support] / np.sqrt(ms.m)
    return SparseResult(support, amps, it, best_res * np.sqrt(ms.m))


def _adaptive_core(cells: np.ndarray, missing: np.ndarray,
                   coeffs: np.ndarray, columns: np.ndarray,
                   r_max: float, max_sweeps: int,
                   stall_sweeps: int = 30) -> np.ndarray:
    """Shared gradient loop: ``cells`` is the measurement-domain vector with
    ``missing`` index positions free, ``coeffs`` its current sparsity-domain
    image, and ``columns[i]`` the coefficient response of a unit change at
    missing cell i. Missing cells descend the transform-l1 objective; the
    step shrinks by sqrt(10) when successive gradients oppose (> 170
    degrees), the objective gains less than a relative epsilon for
    ``stall_sweeps`` sweeps, or a stage exhausts its sweep cap; the loop
    ends once a whole step stage changed the missing cells by less than
    ``r_max`` dB relative."""
    if missing.size == 0:
        return cells
    delta0 = float(np.max(np.abs(cells))) or 1.0
    delta = delta0
    best = cells.copy()
    best_l1 = float(np.sum(np.abs(coeffs)))
    prev_grad: np.ndarray | None = None
    stage_start = cells[missing].copy()
    since_gain = 0
    stage_sweeps = 0
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        stage_sweeps += 1
        step = delta * columns
        g_re = (np.sum(np.abs(coeffs[None, :] + step), axis=1)
                - np.sum(np.abs(coeffs[None, :] - step), axis=1))
        g_im = (np.sum(np.abs(coeffs[None, :] + 1j * step), axis=1)
                - np.sum(np.abs(coeffs[None, :] - 1j * step), axis=1))
        grad = g_re + 1j * g_im
        cells[missing] -= grad
        coeffs = coeffs - columns.T @ grad
        l1 = float(np.sum(np.abs(coeffs)))
        if l1 < best_l1 - 1e-6 * best_l1:
            since_gain = 0
        else:
            since_gain += 1
        if l1 < best_l1:
            best_l1 = l1
            best = cells.copy()
        reversed_ = False
        if prev_grad is not None:
            g1 = np.concatenate([grad.real, grad.imag])
            g0 = np.concatenate([prev_grad.real, prev_grad.imag])
            den = np.linalg.norm(g1) * np.linalg.norm(g0)
            reversed_ = den == 0.0 or float(g1 @ g0) / den < np.cos(
                np.deg2rad(170.0))
        prev_grad = grad
        if reversed_ or since_gain >= stall_sweeps or stage_sweeps >= 150:
            moved = float(np.sum(np.abs(cells[missing] - stage_start) ** 2))
            total = float(np.sum(np.abs(cells[missing]) ** 2))
            delta /= np.sqrt(10.0)
            prev_grad = None
            since_gain = 0
            stage_sweeps = 0
            stage_start = cells[missing].copy()
            if total > 0.0 and 10.0 * np.log10(
                    max(moved, 1e-300) / total) < r_max:
                break
    return best


def adaptive_gradient(ms: MeasurementSet, transform: str = "dft",
                      r_max: float = -100.0, shape: tuple | None = None,
                      max_sweeps: int = 20000) -> Signal:
    """Fill missing samples by gradient descent on the transform-domain l1
    norm; available samples are never modified. ``transform`` selects the
    sparsity domain: dft, dft2d (pass the 2D shape), or hermite."""
    if r_max >= 0:
        raise ValueError("r_max is a dB log ratio and must be negative")
    n = ms.n
    full = np.zeros(n, dtype=np.complex128)
    full[ms.positions] = ms.values
    missing = np.setdiff1d(np.arange(n), ms.positions)
    if missing.size == 0:
        return Signal(full)
    if transform == "dft":
        fwd = lambda x: np.fft.fft(x) / n
        k = np.arange(n)
        columns = np.exp(-2j * np.pi * np.outer(missing, k) / n) / n
    elif transform == "dft2d":
        if shape is None or shape[0] * shape[1] != n:
            raise ValueError("dft2d needs a shape matching the length")
        rows, cols = shape
        fwd = lambda x: (np.fft.fft2(x.reshape(shape)) / n).ravel()
        k1 = np.repeat(np.arange(rows), cols)
        k2 = np.tile(np.arange(cols), rows)
        n1 = missing // cols
        n2 = missing % cols
        columns = np.exp(-2j * np.pi * (np.outer(n1, k1) / rows
                                        + np.outer(n2, k2) / cols)) / n
    elif transform == "hermite":
        basis = hermite_basis(n)
        fwd = lambda x: basis.forward @ x
        columns = basis.forward.T[missing].copy()
    else:
        raise ValueError(f"unknown transform {transform!r}")
    filled = _adaptive_core(full, missing, fwd(full), columns, r_max,
                            max_sweeps)
    return Signal(filled, sample_rate=1.0)


def sfar2d(values: np.ndarray, positions: np.ndarray, shape: tuple,
           p: float = 0.99, max_iter: int = 30) -> np.ndarray:
    """Iterative threshold/solve reconstruction of a sparse 2D spectrum from
    scattered samples of an I x J grid; returns the full (unnormalized) 2D
    spectrum. Exact on noiseless sparse inputs with enough measurements."""
    rows, cols = shape
    total = rows * cols
    pos = np.asarray(positions, dtype=np.intp)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ValueError("positions must be (M, 2) index pairs")
    flat = pos[:, 0] * cols + pos[:, 1]
    if np.unique(flat).size != flat.size:
        raise ValueError("positions must be unique")
    y = np.asarray(values, dtype=np.complex128)
    m = y.size

    def atoms(sup_flat: np.ndarray) -> np.ndarray:
        k1 = sup_flat // cols
        k2 = sup_flat % cols
        return np.exp(2j * np.pi * (np.outer(pos[:, 0], k1) / rows
                                    + np.outer(pos[:, 1], k2) / cols))

    support = np.zeros(0, dtype=np.intp)
    amps = np.zeros(0, dtype=np.complex128)
    resid = y.copy()
    for _ in range(max_iter):
        if float(np.mean(np.abs(resid) ** 2)) < 1e-24:
            break
        sigma2 = (total - m) / (total - 1) * float(
            np.sum(np.abs(resid) ** 2))
        level = np.sqrt(-sigma2 * np.log(1.0 - p ** (1.0 / total)))
        init = np.zeros((rows, cols), dtype=np.complex128)
        init[pos[:, 0], pos[:, 1]] = resid
        spec = np.fft.fft2(init).ravel()
        new = np.nonzero(np.abs(spec) > level)[0]
        if new.size == 0 and support.size == 0:
            break
        grown = np.union1d(support, new).astype(np.intp)
        if grown.size == support.size:
            break
        if grown.size > m:
            raise ValueError("support exceeds measurement count")
        support = grown
        a = atoms(support)
        amps, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
        if rank < support.size:
            raise ValueError("singular solve: dependent 2D atoms")
        resid = y - a @ amps
    out = np.zeros(total, dtype=np.complex128)
    out[support] = amps * total
    return out.reshape(rows, cols)


def sorted_stft_separate(sig: Signal, block_len: int,
                         drop_low: float = 0.0, drop_high: float = 0.0,
                         r_max: float = -100.0,
                         max_sweeps: int = 20000) -> tuple[Spectrum, Signal]:
    """Separate persistent tones from transient components by sorting the
    non-overlapping block-DFT values per frequency over time, dropping the
    ``drop_low``/``drop_high`` fractions, and reconstructing the full
    spectrum from the retained cells by transform-domain l1 descent.
    Returns (persistent spectrum, time-domain residue)."""
    x = sig.samples
    n = x.size
    if n % block_len:
        raise ValueError("signal length must divide into whole blocks")
    nb = n // block_len
    cells = np.fft.fft(x.reshape(nb, block_len), axis=1)
    p_cnt = int(round(drop_low * nb))
    q_cnt = int(round(drop_high * nb))
    kept = nb - p_cnt - q_cnt
    if kept < 1:
        raise ValueError("all time blocks dropped")
    if kept < 2 and (p_cnt or q_cnt):
        warnings.warn("under-determined: fewer than two retained blocks "
                      "per frequency", RuntimeWarning)
    keep_mask = np.ones((nb, block_len), dtype=bool)
    for f in range(block_len):
        order = np.argsort(np.abs(cells[:, f]), kind="stable")
        drop = np.concatenate([order[:p_cnt],
                               order[nb - q_cnt:] if q_cnt else order[:0]])
        keep_mask[drop, f] = False
    flat = cells.ravel()
    missing = np.nonzero(~keep_mask.ravel())[0]
    # Coefficient response of a unit change at block cell (b, f): the cell
    # feeds 1/L of a complex exponential into block b of the time signal,
    # whose normalized DFT image is a shifted Dirichlet profile.
    k = np.arange(n)
    m_in = np.arange(block_len)
    columns = np.empty((missing.size, n), dtype=np.complex128)
    for i, cell in enumerate(missing):
        b, f = divmod(cell, block_len)
        phase = np.exp(2j * np.pi * (f * m_in / block_len))
        seg = np.zeros(n, dtype=np.complex128)
        seg[b * block_len:(b + 1) * block_len] = phase / block_len
        columns[i] = np.fft.fft(seg) / n

    def coeffs_of(flat_cells: np.ndarray) -> np.ndarray:
        time = np.fft.ifft(flat_cells.reshape(nb, block_len), axis=1).ravel()
        return np.fft.fft(time) / n

    start = flat.copy()
    start[missing] = 0.0
    filled = _adaptive_core(start, missing, coeffs_of(start), columns,
                            r_max, max_sweeps)
    time = np.fft.ifft(filled.reshape(nb, block_len), axis=1).ravel()
    rigid = Spectrum(np.fft.fft(time))
    residue = Signal(x - time, sample_rate=sig.sample_rate)
    return rigid, residue


def format_sparse_result(res: SparseResult) -> str:
    """Structured text record: support, complex amplitudes, stats."""
    lines = [f"support: {' '.join(str(int(s)) for s in res.support)}"]
    for s, a in zip(res.support, res.amplitudes):
        lines.append(f"amplitude[{int(s)}]: {a.real!r} {a.imag!r}")
    lines.append(f"iterations: {res.iterations}")
    lines.append(f"residual_norm: {res.residual_norm!r}")
    return "\n".join(lines) + "\n"
