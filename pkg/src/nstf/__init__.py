"""Non-stationary signal toolkit: time-frequency analysis, eigen-decomposition
separation, compressive-sensing reconstruction, spread-spectrum classification,
and a cycle-stepped systolic QR engine."""

from . import (
    classify,
    cs,
    decompose,
    qr_engine,
    robust,
    siggen,
    sparse_tf,
    timefreq,
    transforms,
)

__version__ = "0.1.0"

__all__ = [
    "siggen",
    "transforms",
    "timefreq",
    "robust",
    "decompose",
    "cs",
    "sparse_tf",
    "classify",
    "qr_engine",
    "__version__",
]
