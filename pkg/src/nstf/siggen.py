"""Deterministic, seedable generators for the signal classes used throughout
the toolkit, plus noise injection and simple file I/O.

All generators are pure functions of their arguments; randomness enters only
through :func:`add_noise`, which takes an explicit seed and uses numpy's
PCG64 generator so sequences are identical across platforms.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Signal",
    "NoiseSpec",
    "gen_dsss",
    "gen_fhss",
    "gen_harmonic",
    "gen_nonlinear_fm",
    "nonlinear_fm_true_if",
    "add_noise",
    "save_signal",
    "load_signal",
]


@dataclass(frozen=True)
class Signal:
    """A finite complex sample sequence with an attached sample rate.

    ``sample_rate`` is 1.0 for abstract (index-domain) signals; generators
    that model a physical time axis set it accordingly.
    """

    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("signal must be a nonempty 1-D sample sequence")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValueError("signal samples must be finite")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class NoiseSpec:
    """Noise description: ``gaussian`` (white complex, target SNR in dB),
    ``impulse`` (sparse strong outliers), or ``mixed`` (both)."""

    kind: str = "gaussian"
    snr_db: float = 20.0
    impulse_prob: float = 0.005
    impulse_scale: float = 10.0

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian", "impulse", "mixed"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must not be NaN")
        if not 0.0 <= self.impulse_prob <= 1.0:
            raise ValueError("impulse_prob must lie in [0, 1]")
        if self.impulse_scale <= 0:
            raise ValueError("impulse_scale must be positive")


def _as_pm1(seq, name: str) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isin(arr, (-1.0, 1.0))):
        raise ValueError(f"{name} entries must be +1 or -1")
    return arr


def gen_dsss(bits, chip_seq, carrier: float = 0.0, phase: float = 0.0,
             amp: float = 1.0) -> Signal:
    """Direct-sequence spread-spectrum burst.

    Each bit spans one full run of ``chip_seq`` (one sample per chip, chips
    repeating cyclically), modulated onto a real cosine carrier:
    sample n = amp * d(n) * c(n) * cos(2*pi*carrier*n + phase).
    """
    d = _as_pm1(bits, "bits")
    c = _as_pm1(chip_seq, "chip_seq")
    if not 0.0 <= carrier < 0.5:
        raise ValueError("carrier must lie in [0, 0.5) cycles/sample")
    n_total = d.size * c.size
    n = np.arange(n_total)
    dn = np.repeat(d, c.size)
    cn = np.tile(c, d.size)
    x = amp * dn * cn * np.cos(2.0 * np.pi * carrier * n + phase)
    return Signal(x.astype(np.complex128))


def gen_fhss(hop_freqs, hop_len: int, amp: float = 1.0) -> Signal:
    """Frequency-hopping signal: complex tones e^{j2*pi*f*n}, one tone per
    hop of ``hop_len`` samples, concatenated (phase restarts at each hop)."""
    freqs = np.atleast_1d(np.asarray(hop_freqs, dtype=np.float64))
    if freqs.size == 0:
        raise ValueError("hop_freqs must be nonempty")
    if hop_len < 1:
        raise ValueError("hop_len must be >= 1")
    if np.any((freqs < 0.0) | (freqs >= 0.5)):
        raise ValueError("hop frequencies must lie in [0, 0.5) cycles/sample")
    n = np.arange(hop_len)
    segs = [amp * np.exp(2j * np.pi * f * n) for f in freqs]
    return Signal(np.concatenate(segs))


def gen_harmonic(fundamental: float, n_harmonics: int, amps,
                 length: int) -> Signal:
    """Sum of complex tones at k*fundamental, k = 1..n_harmonics, with
    per-harmonic amplitudes."""
    amps = np.asarray(amps, dtype=np.float64)
    if amps.size != n_harmonics:
        raise ValueError("amps length must equal n_harmonics")
    if np.any(amps <= 0):
        raise ValueError("amplitudes must be positive")
    if n_harmonics * fundamental >= 0.5:
        raise ValueError("highest harmonic would alias (k*f0 >= 0.5)")
    n = np.arange(length)
    x = np.zeros(length, dtype=np.complex128)
    for k in range(1, n_harmonics + 1):
        x += amps[k - 1] * np.exp(2j * np.pi * k * fundamental * n)
    return Signal(x)


# Phase laws of the two nonlinear-FM presets, as functions of the
# dimensionless time variable t of each preset's native grid.

def _eq416_phases(t: np.ndarray) -> list[np.ndarray]:
    p1 = (2.0 * np.cos(np.pi * t) + np.cos(4.0 * np.pi * t)
          + 4.5 * np.pi * t) / 2.0
    p2 = (np.cos(np.pi * t) + np.cos(3.0 * np.pi * t)
          + np.cos(4.0 * np.pi * t) - 8.0 * np.pi * t) / 2.0
    return [p1, p2]


def _eq416_if_cycles_per_t(t: np.ndarray) -> list[np.ndarray]:
    f1 = (-2.0 * np.sin(np.pi * t) - 4.0 * np.sin(4.0 * np.pi * t) + 4.5) / 4.0
    f2 = (-np.sin(np.pi * t) - 3.0 * np.sin(3.0 * np.pi * t)
          - 4.0 * np.sin(4.0 * np.pi * t) - 8.0) / 4.0
    return [f1, f2]


def _mono_phase(t: np.ndarray) -> np.ndarray:
    return (4.0 * np.cos(np.pi * t) + (2.0 / 3.0) * np.cos(3.0 * np.pi * t)
            + (2.0 / 3.0) * np.cos(5.0 * np.pi * t))


def _mono_if_cycles_per_t(t: np.ndarray) -> np.ndarray:
    return (-2.0 * np.sin(np.pi * t) - np.sin(3.0 * np.pi * t)
            - (5.0 / 3.0) * np.sin(5.0 * np.pi * t))


_FM_DEFAULT_LEN = {"eq416": 90, "sine_mod_mono": 96}


def _fm_time_grid(preset: str, length: int | None):
    if preset not in _FM_DEFAULT_LEN:
        raise ValueError(f"unknown nonlinear-FM preset {preset!r}")
    n = _FM_DEFAULT_LEN[preset] if length is None else int(length)
    if n < 16:
        raise ValueError("length must be >= 16")
    if preset == "eq416":
        # t in [-1, 1), the native grid of the two-component test signal
        t = -1.0 + 2.0 * np.arange(n) / n
        rate = n / 2.0
    else:
        # seconds at 48 samples/s
        t = np.arange(n) / 48.0
        rate = 48.0
    return t, rate


def gen_nonlinear_fm(preset: str, length: int | None = None) -> Signal:
    """Nonlinear-FM test signals.

    ``eq416``: two-component sinusoidally modulated FM signal on t in [-1, 1),
    default 90 samples. ``sine_mod_mono``: monocomponent signal with three
    cosine modulation terms, 96 s at 48 Hz by default.
    """
    t, rate = _fm_time_grid(preset, length)
    if preset == "eq416":
        x = sum(np.exp(1j * p) for p in _eq416_phases(t))
    else:
        x = np.exp(1j * _mono_phase(t))
    return Signal(np.asarray(x, dtype=np.complex128), sample_rate=rate)


def nonlinear_fm_true_if(preset: str, length: int | None = None) -> np.ndarray:
    """Analytic instantaneous frequency of each preset component, in cycles
    per sample, shape (n_components, length). Ground truth for IF-error
    checks."""
    t, rate = _fm_time_grid(preset, length)
    if preset == "eq416":
        rows = _eq416_if_cycles_per_t(t)
    else:
        rows = [_mono_if_cycles_per_t(t)]
    return np.vstack(rows) / rate


def add_noise(sig: Signal, spec: NoiseSpec, seed: int) -> Signal:
    """Add noise per ``spec``. Deterministic for a fixed seed; the gaussian
    draw is renormalized so the realized SNR is exactly the requested one.
    Draw order is fixed (gaussian, then impulse) so mixed noise is
    reproducible."""
    rng = np.random.default_rng(seed)
    x = sig.samples
    out = x.copy()
    if spec.kind in ("gaussian", "mixed") and math.isfinite(spec.snr_db):
        p_sig = float(np.mean(np.abs(x) ** 2))
        p_noise = p_sig / 10.0 ** (spec.snr_db / 10.0)
        if p_noise > 0.0:
            w = rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)
            w *= math.sqrt(p_noise / float(np.mean(np.abs(w) ** 2)))
            out = out + w
    if spec.kind in ("impulse", "mixed"):
        hits = rng.random(x.size) < spec.impulse_prob
        phases = rng.uniform(0.0, 2.0 * np.pi, size=x.size)
        level = spec.impulse_scale * float(np.max(np.abs(x)))
        out = out + hits * level * np.exp(1j * phases)
    return Signal(out, sig.sample_rate)


def save_signal(sig: Signal, path: str) -> None:
    """Write a signal to ``path``: CSV (``index,re,im``) for a .csv
    extension, raw interleaved little-endian float64 (re, im) otherwise."""
    if os.path.splitext(path)[1].lower() == ".csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "re", "im"])
            for i, v in enumerate(sig.samples):
                writer.writerow([i, repr(float(v.real)), repr(float(v.imag))])
    else:
        inter = np.empty(2 * sig.n, dtype="<f8")
        inter[0::2] = sig.samples.real
        inter[1::2] = sig.samples.imag
        inter.tofile(path)


def load_signal(path: str, sample_rate: float = 1.0) -> Signal:
    """Inverse of :func:`save_signal`; format chosen by extension."""
    if os.path.splitext(path)[1].lower() == ".csv":
        re, im = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["index", "re", "im"]:
                raise ValueError(f"unexpected CSV header {header!r}")
            for row in reader:
                re.append(float(row[1]))
                im.append(float(row[2]))
        samples = np.asarray(re) + 1j * np.asarray(im)
    else:
        inter = np.fromfile(path, dtype="<f8")
        if inter.size % 2:
            raise ValueError("raw signal file must hold re/im pairs")
        samples = inter[0::2] + 1j * inter[1::2]
    return Signal(samples, sample_rate)
