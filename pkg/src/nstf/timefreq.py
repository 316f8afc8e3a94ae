"""Time-frequency distributions: STFT/spectrogram, pseudo-Wigner, S-method,
ambiguity function, Cohen class, and the fourth-order complex-lag
distribution, plus IF-track estimation and error metrics.

Grid conventions: TFGrid.values has time along axis 0 and frequency along
axis 1, frequency bins in standard DFT order with ``freq_axis`` carrying the
signed physical frequency in cycles/sample. Lag products are built from the
2x spectrally interpolated signal, so half-integer time offsets are exact
for band-limited content; a tone at DFT bin k then peaks at bin k in every
distribution, and the discrete ambiguity/Wigner pair satisfies the exact 2D
transform duality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .siggen import Signal

__all__ = [
    "TFGrid",
    "KernelSpec",
    "CTDConfig",
    "hann_window",
    "stft",
    "spectrogram",
    "smethod",
    "wigner",
    "ambiguity",
    "kernel_values",
    "cohen_distribution",
    "ctd4",
    "estimate_if",
    "if_error",
    "write_grid_csv",
    "write_grid_pgm",
]

_KINDS = ("stft", "spec", "wd", "sm", "ctd", "cohen", "af")
_REAL_KINDS = ("spec", "wd", "sm", "cohen")


@dataclass(frozen=True)
class TFGrid:
    """Time x frequency matrix of distribution values."""

    values: np.ndarray
    kind: str
    time_axis: np.ndarray
    freq_axis: np.ndarray

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown TF kind {self.kind!r}")
        v = np.asarray(self.values)
        if not np.all(np.isfinite(v.real)) or not np.all(np.isfinite(v.imag)):
            raise ValueError("TF grid contains non-finite values")
        if v.shape != (len(self.time_axis), len(self.freq_axis)):
            raise ValueError("axis lengths do not match grid shape")

    @property
    def n_time(self) -> int:
        return self.values.shape[0]

    @property
    def n_freq(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class KernelSpec:
    """Ambiguity-domain kernel mask.

    ``family`` is one of choi_williams, zhao_atlas_marks, born_jordan,
    gaussian. ``params`` is sigma (scalar) or (sigma1, sigma2) for the
    two-parameter gaussian. Arguments are evaluated in grid-bin units; a
    scalar gaussian sigma selects the isotropic form e^{-(theta^2+tau^2)/
    sigma^2}, the pair the e^{-(theta^2/2s1^2 + tau^2/2s2^2)} form.
    """

    family: str = "gaussian"
    params: tuple | float = 30.0
    window: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.family not in ("choi_williams", "zhao_atlas_marks",
                               "born_jordan", "gaussian"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        p = self.params if isinstance(self.params, tuple) else (self.params,)
        if any(s <= 0 for s in p):
            raise ValueError("kernel scale parameters must be positive")


@dataclass(frozen=True)
class CTDConfig:
    """Configuration of the complex-lag distribution (order 4 supported).

    ``points`` are the unit-circle evaluation points (a_i, b_i) giving the
    offsets (a_i + j b_i) tau/4; ``smooth_width`` is the width in bins of the
    rectangular W(eps) window combining the real-lag and complex-lag
    ambiguity parts; ``kernel`` masks both parts in the ambiguity domain.

    ``spectral_floor`` is the relative magnitude below which spectrum bins
    are dropped from the analytic continuation. The continuation weights bin
    k by e^{2 pi |k| mu / N}, so leakage and roundoff bins that are harmless
    in the signal itself come back amplified by many orders of magnitude at
    imaginary offsets; anything below the floor is treated as such debris.
    """

    order: int = 4
    points: tuple = ((1.0, 0.0), (0.0, 1.0))
    smooth_width: int = 3
    kernel: KernelSpec = field(default_factory=KernelSpec)
    spectral_floor: float = 0.02

    def __post_init__(self) -> None:
        if self.order % 2:
            raise ValueError("distribution order must be even")
        for a, b in self.points:
            if abs(np.hypot(a, b) - 1.0) > 1e-12:
                raise ValueError("evaluation points must lie on the unit "
                                 "circle")
        if self.smooth_width < 1 or self.smooth_width % 2 == 0:
            raise ValueError("smooth_width must be a positive odd count")
        if not 0.0 <= self.spectral_floor < 1.0:
            raise ValueError("spectral_floor must lie in [0, 1)")


def hann_window(w: int) -> np.ndarray:
    """Periodic Hann taper of length w."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(w) / w)


def _freq_axis(nbins: int, rate: float) -> np.ndarray:
    return np.fft.fftfreq(nbins) * rate


def stft(sig: Signal, window: np.ndarray | None = None, hop: int = 1,
         nfft: int | None = None, spectrogram: bool = False) -> TFGrid:
    """Short-time Fourier transform with the window centered on each output
    instant; ``spectrogram=True`` returns |STFT|^2 instead.

    The default window is a Hann taper of the full signal length, giving the
    square T = F = N grid.
    """
    x = sig.samples
    n = x.size
    if window is None:
        window = hann_window(n)
    window = np.asarray(window, dtype=np.float64)
    w = window.size
    if w > n:
        raise ValueError("window longer than signal")
    if hop < 1:
        raise ValueError("hop must be >= 1")
    nfft = n if nfft is None else int(nfft)
    offs = np.arange(w) - w // 2
    times = np.arange(0, n, hop)
    buf = np.zeros((times.size, nfft), dtype=np.complex128)
    pos = np.mod(offs, nfft)
    for row, t in enumerate(times):
        idx = t + offs
        ok = (idx >= 0) & (idx < n)
        seg = np.where(ok, x[np.clip(idx, 0, n - 1)], 0.0) * window
        # Place the segment so the phase reference sits at the window center.
        buf[row, pos] = seg
    vals = np.fft.fft(buf, axis=1)
    time_axis = times / sig.sample_rate
    freq_axis = _freq_axis(nfft, sig.sample_rate)
    if spectrogram:
        return TFGrid((vals * vals.conj()).real, "spec", time_axis, freq_axis)
    return TFGrid(vals, "stft", time_axis, freq_axis)


def spectrogram(sig: Signal, window: np.ndarray | None = None, hop: int = 1,
                nfft: int | None = None) -> TFGrid:
    """|STFT|^2, the L=0 member of the S-method family."""
    return stft(sig, window, hop, nfft, spectrogram=True)


def _sm_combine(s: np.ndarray, L: int) -> np.ndarray:
    """SM(n,k) = sum_{|i|<=L} STFT(n,k+i) STFT*(n,k-i) from an STFT value
    matrix, circular in k; the L=0 case is the plain spectrogram term."""
    nbins = s.shape[1]
    if not 0 <= L < nbins / 2:
        raise ValueError("L must satisfy 0 <= L < F/2")
    vals = (s * s.conj()).real
    for i in range(1, L + 1):
        up = np.roll(s, -i, axis=1)
        dn = np.roll(s, i, axis=1)
        vals = vals + 2.0 * (up * dn.conj()).real
    return vals


def smethod(sig: Signal, window: np.ndarray | None = None, L: int = 6,
            hop: int = 1, nfft: int | None = None) -> TFGrid:
    """S-method with a rectangular P window of half-width L. L=0 is exactly
    the spectrogram (same center-term expression, bit for bit)."""
    grid = stft(sig, window, hop, nfft)
    vals = _sm_combine(grid.values, L)
    return TFGrid(vals, "sm", grid.time_axis, grid.freq_axis)


def _upsample2(x: np.ndarray) -> np.ndarray:
    """Spectral 2x interpolation: returns x2 with x2[2n] = x(n) and x2[2n+1]
    the band-limited value at n + 1/2 (Nyquist bin split symmetrically)."""
    n = x.size
    spec = np.fft.fft(x)
    out = np.zeros(2 * n, dtype=np.complex128)
    h = n // 2
    out[:h] = spec[:h]
    if n % 2 == 0:
        out[h] = 0.5 * spec[h]
        out[2 * n - h] = 0.5 * spec[h]
        out[2 * n - h + 1:] = spec[h + 1:]
    else:
        out[2 * n - (n - h):] = spec[h:]
    return np.fft.ifft(out) * 2.0


def _lag_products(x: np.ndarray) -> np.ndarray:
    """r[n, m] = x(n + m/2) x*(n - m/2) on the 2x interpolated signal,
    lag index m in DFT order over [-N/2, N/2); the unpaired -N/2 lag is
    zeroed to keep exact conjugate symmetry in m."""
    n = x.size
    x2 = _upsample2(x)
    mm = np.fft.fftfreq(n, d=1.0 / n).astype(int)  # signed lags, DFT order
    tt = np.arange(n)
    plus = np.mod(2 * tt[:, None] + mm[None, :], 2 * n)
    minus = np.mod(2 * tt[:, None] - mm[None, :], 2 * n)
    r = x2[plus] * np.conj(x2[minus])
    if n % 2 == 0:
        r[:, n // 2] = 0.0
    return r


def wigner(sig: Signal) -> TFGrid:
    """Pseudo-Wigner distribution over the full lag window, via half-integer
    lag products; real-valued by construction of the symmetric lag sum."""
    x = sig.samples
    if x.size < 4:
        raise ValueError("signal too short for a Wigner grid")
    r = _lag_products(x)
    vals = np.fft.fft(r, axis=1)
    resid = np.max(np.abs(vals.imag))
    peak = max(np.max(np.abs(vals.real)), 1e-300)
    if resid > 1e-6 * peak:
        raise AssertionError("Wigner imaginary residue unexpectedly large")
    n = x.size
    return TFGrid(vals.real, "wd", np.arange(n) / sig.sample_rate,
                  _freq_axis(n, sig.sample_rate))


def ambiguity(sig: Signal) -> TFGrid:
    """Ambiguity function AF(theta, tau): DFT over time of the lag products.
    Axis 0 is Doppler theta, axis 1 lag tau; AF(0,0) equals signal energy."""
    x = sig.samples
    if x.size < 4:
        raise ValueError("signal too short for an ambiguity grid")
    r = _lag_products(x)
    vals = np.fft.fft(r, axis=0)
    n = x.size
    return TFGrid(vals, "af", np.arange(n, dtype=float),
                  _freq_axis(n, 1.0) * n)


def kernel_values(spec: KernelSpec, theta, tau) -> np.ndarray:
    """Evaluate a kernel mask at Doppler/lag coordinates in grid-bin units
    (broadcastable arrays or scalars)."""
    th = np.asarray(theta, dtype=np.float64)
    ta = np.asarray(tau, dtype=np.float64)
    if spec.family == "gaussian":
        if isinstance(spec.params, tuple):
            if len(spec.params) == 1:
                out = np.exp(-(th ** 2 + ta ** 2) / spec.params[0] ** 2)
            else:
                s1, s2 = spec.params
                out = np.exp(-(th ** 2 / (2 * s1 ** 2)
                               + ta ** 2 / (2 * s2 ** 2)))
        else:
            out = np.exp(-(th ** 2 + ta ** 2) / float(spec.params) ** 2)
    elif spec.family == "choi_williams":
        sig2 = (spec.params[0] if isinstance(spec.params, tuple)
                else float(spec.params)) ** 2
        out = np.exp(-(th ** 2) * (ta ** 2) / sig2)
    elif spec.family in ("born_jordan", "zhao_atlas_marks"):
        u = th * ta / 2.0
        core = np.sinc(u / np.pi)  # sin(u)/u
        if spec.family == "born_jordan":
            out = core
        else:
            out = np.abs(ta) * core
            if spec.window is not None:
                out = out * np.asarray(spec.window, dtype=np.float64)
    else:  # pragma: no cover - guarded by KernelSpec
        raise ValueError(spec.family)
    return out * np.ones(np.broadcast_shapes(th.shape, ta.shape))


def _signed_bins(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def _kernel_grid(spec: KernelSpec, n: int) -> np.ndarray:
    b = _signed_bins(n)
    return kernel_values(spec, b[:, None], b[None, :])


def cohen_distribution(sig: Signal, kernel: KernelSpec) -> TFGrid:
    """Cohen-class distribution: inverse 2D transform of the kernel-masked
    ambiguity function. An all-ones kernel reproduces the Wigner grid."""
    x = sig.samples
    n = x.size
    af = np.fft.fft(_lag_products(x), axis=0)
    af *= _kernel_grid(kernel, n)
    smoothed = np.fft.ifft(af, axis=0)
    vals = np.fft.fft(smoothed, axis=1)
    return TFGrid(vals.real, "cohen", np.arange(n) / sig.sample_rate,
                  _freq_axis(n, sig.sample_rate))


def _analytic_continuation(x: np.ndarray, offsets: np.ndarray,
                           floor: float = 0.0) -> np.ndarray:
    """x(n + j*mu) for every time index n and every imaginary offset mu,
    via the signed-frequency spectral sum with the real exponent clipped at
    +-40; returns shape (len(x), len(offsets)).

    ``floor`` zeroes spectrum bins below floor * max|X| first. Without it a
    leakage bin at high |k| is multiplied by e^{2 pi |k| mu / N} and can
    dwarf the actual signal band at moderate mu already.
    """
    n = x.size
    spec = np.fft.fft(x)
    if floor > 0.0:
        spec = np.where(np.abs(spec) < floor * np.abs(spec).max(), 0.0, spec)
    k = _signed_bins(n)
    out = np.empty((n, offsets.size), dtype=np.complex128)
    for col, mu in enumerate(offsets):
        damp = np.exp(np.clip(2.0 * np.pi * k * (-mu) / n, -40.0, 40.0))
        out[:, col] = np.fft.ifft(spec * damp)
    return out


def _ctd_moments(x: np.ndarray,
                 floor: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Partial moments of the order-4 complex-lag product at evaluation
    points (1,0,0,1): the real-lag product m_r[n,u] = x(n+u/2)x*(n-u/2) and
    the complex-lag factor m_ct[n,u] = exp(j(Log x(n-ju/2) - Log x(n+ju/2))).

    Only the imaginary part of the fused logarithm difference (the ratio of
    the continued magnitudes) is kept; m_ct is unit modulus. For a single
    phase-modulated component the real part is identically zero, so nothing
    is lost there, while for a component mixture it grows like the phase
    difference between components and e^{that} would bury the plane under
    exponentially large cells.
    """
    n = x.size
    m_r = _lag_products(x)
    u_signed = _signed_bins(n)
    mus = u_signed / 2.0
    vals_p = _analytic_continuation(x, mus, floor)    # x(n + j u/2)
    vals_m = _analytic_continuation(x, -mus, floor)   # x(n - j u/2)
    mag_floor = 1e-300
    ratio = (np.log(np.maximum(np.abs(vals_m), mag_floor))
             - np.log(np.maximum(np.abs(vals_p), mag_floor)))
    m_ct = np.exp(1j * ratio)
    if n % 2 == 0:
        m_ct[:, n // 2] = 0.0
    return m_r, m_ct


def _dirichlet_weights(width: int, n: int) -> np.ndarray:
    """What(v) = sum over the rectangular W(eps) support of e^{j2pi eps v/N},
    evaluated at v = 0..N-1 (real by symmetry of the support)."""
    half = width // 2
    v = np.arange(n)
    out = np.ones(n)
    for eps in range(1, half + 1):
        out = out + 2.0 * np.cos(2.0 * np.pi * eps * v / n)
    return out


def _ctd_assemble(m_r: np.ndarray, m_ct: np.ndarray, cfg: CTDConfig,
                  doppler_transform=None) -> np.ndarray:
    """Kernel-filter both partial ambiguity functions, combine them with the
    W(eps)-weighted lag convolution, and inverse-transform to the TF plane.

    ``doppler_transform`` maps a moment array m[n,u] to its ambiguity form
    A[theta,u] (defaults to the plain DFT over time); the robust module
    substitutes an L-estimate version.
    """
    n = m_r.shape[0]
    if doppler_transform is None:
        doppler_transform = lambda m: np.fft.fft(m, axis=0)
    mask = _kernel_grid(cfg.kernel, n)
    pr = np.fft.ifft(doppler_transform(m_r) * mask, axis=0)
    pc = np.fft.ifft(doppler_transform(m_ct) * mask, axis=0)
    what = _dirichlet_weights(cfg.smooth_width, n)
    tau_idx = np.arange(n)
    q = np.zeros((n, n), dtype=np.complex128)
    for u in range(n):
        w_vec = what[np.mod(tau_idx - 2 * u, n)]
        q += w_vec[None, :] * pr[:, u:u + 1] * np.roll(pc, u, axis=1)
    return np.fft.fft(q, axis=1) / n


def ctd4(sig: Signal, cfg: CTDConfig | None = None) -> TFGrid:
    """Fourth-order complex-lag distribution at evaluation points (1,0,0,1).

    Complex-lag values are obtained by analytic continuation through the
    spectrum; the complex power pair reduces to a unit-modulus factor whose
    phase is the log-magnitude ratio of the two continued values. The inner
    spread of the product starts at the fifth phase derivative, so ridges of
    sinusoidally modulated FM signals stay far sharper than the Wigner ones.
    """
    cfg = cfg or CTDConfig()
    if cfg.order != 4:
        raise ValueError("only the order-4 distribution is implemented")
    if cfg.points != ((1.0, 0.0), (0.0, 1.0)):
        raise ValueError("only evaluation points (1,0,0,1) are implemented")
    x = sig.samples
    if np.min(np.abs(x)) < 1e-6:
        raise ValueError("complex power undefined near zero")
    m_r, m_ct = _ctd_moments(x, cfg.spectral_floor)
    vals = _ctd_assemble(m_r, m_ct, cfg)
    n = x.size
    return TFGrid(vals, "ctd", np.arange(n) / sig.sample_rate,
                  _freq_axis(n, sig.sample_rate))


def _row_magnitude(grid: TFGrid) -> np.ndarray:
    if grid.kind in _REAL_KINDS:
        return np.asarray(grid.values, dtype=np.float64)
    return np.abs(grid.values)


def _local_maxima(row: np.ndarray) -> np.ndarray:
    n = row.size
    left = np.empty(n, dtype=bool)
    right = np.empty(n, dtype=bool)
    left[0] = True
    left[1:] = row[1:] >= row[:-1]
    right[-1] = True
    right[:-1] = row[:-1] > row[1:]
    return np.nonzero(left & right)[0]


def estimate_if(tf: TFGrid, n_components: int = 1, guard: int = 2,
                refine: bool = False) -> np.ndarray:
    """Per-component IF tracks from a TF grid.

    Per time row, the ``n_components`` largest local maxima separated by at
    least ``guard`` bins are picked (ties toward the lower bin) and linked
    to the running tracks by nearest frequency. Rows with fewer maxima leave
    the unmatched tracks missing (NaN). Returned tracks are in signed bin
    units; ``refine=True`` adds three-point parabolic interpolation around
    each peak.
    """
    if n_components < 1 or guard < 0:
        raise ValueError("need n_components >= 1 and guard >= 0")
    mag = _row_magnitude(tf)
    n_t, n_f = mag.shape
    tracks = np.full((n_components, n_t), np.nan)
    last = np.full(n_components, np.nan)

    def signed(idx: float) -> float:
        return idx if idx < n_f / 2 else idx - n_f

    for t in range(n_t):
        row = mag[t]
        cand = _local_maxima(row)
        order = sorted(cand, key=lambda i: (-row[i], i))
        picks: list[int] = []
        for i in order:
            if len(picks) == n_components:
                break
            if all(min(abs(i - p), n_f - abs(i - p)) >= guard for p in picks):
                picks.append(i)
        vals = []
        for i in picks:
            pos = float(i)
            if refine:
                ym, y0, yp = row[(i - 1) % n_f], row[i], row[(i + 1) % n_f]
                den = ym - 2.0 * y0 + yp
                if den < 0.0:
                    pos += min(0.5, max(-0.5, 0.5 * (ym - yp) / den))
            vals.append(signed(pos))
        if not np.any(np.isnan(last)):
            # Greedy nearest-frequency assignment to existing tracks.
            pairs = sorted(
                (abs(v - last[c]), v, c, j)
                for j, v in enumerate(vals) for c in range(n_components))
            used_c: set[int] = set()
            used_j: set[int] = set()
            for _, v, c, j in pairs:
                if c in used_c or j in used_j:
                    continue
                tracks[c, t] = v
                last[c] = v
                used_c.add(c)
                used_j.add(j)
        else:
            for c, v in enumerate(sorted(vals)):
                tracks[c, t] = v
                last[c] = v
    return tracks


def if_error(est: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """(mse, relative mse in percent) between two IF tracks, missing samples
    excluded pairwise. mse is the mean squared bin error; the relative form
    is 100 * sum((est-truth)^2) / sum(truth^2)."""
    est = np.asarray(est, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if est.shape != truth.shape:
        raise ValueError("track lengths differ")
    ok = ~(np.isnan(est) | np.isnan(truth))
    if not np.any(ok):
        raise ValueError("all samples missing")
    d2 = (est[ok] - truth[ok]) ** 2
    mse = float(np.mean(d2))
    rel = 100.0 * float(np.sum(d2)) / float(np.sum(truth[ok] ** 2))
    return mse, rel


def _shifted_for_display(grid: TFGrid) -> tuple[np.ndarray, np.ndarray]:
    order = np.fft.fftshift(np.arange(grid.n_freq))
    return grid.values[:, order], grid.freq_axis[order]


def write_grid_csv(grid: TFGrid, path: str) -> None:
    """Numeric CSV export: one row per time instant, frequency bins in
    stored (DFT) order; complex grids interleave re/im columns."""
    vals = np.asarray(grid.values)
    # Header deliberately carries no kind tag: grids that agree numerically
    # must serialize identically whatever produced them.
    with open(path, "w") as fh:
        fh.write(f"# T={grid.n_time} F={grid.n_freq} "
                 f"complex={int(grid.kind not in _REAL_KINDS)}\n")
        for row in vals:
            if grid.kind in _REAL_KINDS:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
            else:
                fh.write(",".join(
                    f"{v.real!r},{v.imag!r}" for v in row) + "\n")


def write_grid_pgm(grid: TFGrid, path: str, floor_db: float = -60.0) -> None:
    """8-bit binary PGM of log magnitude, normalized to the per-grid
    maximum; frequency runs bottom-up, time left-right."""
    shifted, _ = _shifted_for_display(grid)
    mag = np.abs(shifted).T[::-1]  # rows: freq descending from the top
    vmax = float(np.max(mag))
    if vmax <= 0.0:
        db = np.full_like(mag, floor_db, dtype=np.float64)
    else:
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(np.maximum(mag, 1e-300) / vmax)
        db = np.clip(db, floor_db, 0.0)
    img = np.round(255.0 * (db - floor_db) / (-floor_db)).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())
