"""QR factorization paths (Householder, Gram-Schmidt, cycle-stepped
systolic Givens array), systolic triangular inversion, the two
least-squares solve formulations with their operation ledgers, and the
address arithmetic of the transform-matrix row selection.

The systolic model is a synchronous machine: per step, each column's input
sample cascades combinationally downward through its cells while rotation
coefficients travel rightward with one register per cell, so the cell at
row i, column j applies the rotation its row boundary computed j-i steps
earlier. Column j's input stream is skewed by j steps, and an M x K run
completes in M + K - 1 transitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cs import CSMatrix

__all__ = [
    "TriangularMatrix",
    "FlopLedger",
    "SystolicArray",
    "householder_qr",
    "gram_schmidt_qr",
    "systolic_qr",
    "systolic_tri_inverse",
    "solve_modified_ls",
    "solve_direct_ls",
    "approx_threshold_constant",
    "dft_address",
    "address_select",
]


@dataclass(frozen=True)
class TriangularMatrix:
    """Upper-triangular K x K matrix; ``kind`` distinguishes a factor from a
    computed inverse."""

    entries: np.ndarray
    kind: str = "upper"

    def __post_init__(self) -> None:
        e = np.asarray(self.entries, dtype=np.complex128)
        object.__setattr__(self, "entries", e)
        if self.kind not in ("upper", "upper_inverse"):
            raise ValueError(f"unknown triangular kind {self.kind!r}")
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("triangular matrix must be square")
        if np.any(np.tril(e, -1) != 0):
            raise ValueError("below-diagonal entries must be exactly zero")

    @property
    def k(self) -> int:
        return self.entries.shape[0]


@dataclass
class FlopLedger:
    """Real-operation counters under the convention that one complex
    multiply costs 4 real multiplications plus 2 real additions and one
    complex addition costs 2 real additions."""

    additions: int = 0
    multiplications: int = 0
    divisions: int = 0
    square_roots: int = 0

    def charge_matmul(self, p: int, n: int, m: int) -> None:
        """Full cost of a complex (p x n) @ (n x m) product."""
        self.multiplications += 4 * p * n * m
        self.additions += 4 * p * n * m - 2 * p * m

    def charge_matmul_accum(self, p: int, n: int, m: int) -> None:
        """Multiply-accumulate booking of the same product: the two real
        additions inside each complex multiply ride the accumulator and are
        not charged, leaving 2(n-1) accumulation additions per entry."""
        self.multiplications += 4 * p * n * m
        self.additions += 2 * p * m * (n - 1)


def householder_qr(a: np.ndarray,
                   notes: list | None = None) -> tuple[np.ndarray,
                                                       np.ndarray]:
    """Householder QR with the diagonal of R normalized real-nonnegative.
    Returns full Q (M x M) and R (M x K). A numerically dead column skips
    its reflection; the skip is appended to ``notes`` when a list is
    passed."""
    a = np.asarray(a, dtype=np.complex128)
    m, k = a.shape
    if m < k:
        raise ValueError("need at least as many rows as columns")
    r = a.copy()
    q = np.eye(m, dtype=np.complex128)
    scale = max(float(np.max(np.abs(a))), 1.0)
    for c in range(k):
        v = r[c:, c].copy()
        norm = float(np.linalg.norm(v))
        if norm < 1e-12 * scale:
            if notes is not None:
                notes.append(f"column {c}: reflection skipped (zero norm)")
            continue
        phase = v[0] / abs(v[0]) if v[0] != 0 else 1.0
        u = v.copy()
        u[0] += phase * norm
        denom = float(np.real(u.conj() @ u))
        r[c:, :] -= np.outer(2.0 * u / denom, u.conj() @ r[c:, :])
        q[:, c:] -= np.outer(q[:, c:] @ (2.0 * u / denom), u.conj())
    for i in range(k):
        d = r[i, i]
        if d != 0:
            ph = d / abs(d)
            r[i, :] *= np.conj(ph)
            q[:, i] *= ph
    r[np.tril_indices(m, -1, k)] = 0.0
    return q, r


def gram_schmidt_qr(a: np.ndarray,
                    variant: str = "modified") -> tuple[np.ndarray,
                                                        np.ndarray]:
    """Reduced QR by classical or modified Gram-Schmidt; raises on a
    linearly dependent column."""
    if variant not in ("classical", "modified"):
        raise ValueError(f"unknown variant {variant!r}")
    a = np.asarray(a, dtype=np.complex128)
    m, k = a.shape
    if m < k:
        raise ValueError("need at least as many rows as columns")
    q = np.zeros((m, k), dtype=np.complex128)
    r = np.zeros((k, k), dtype=np.complex128)
    for c in range(k):
        v = a[:, c].copy()
        for i in range(c):
            ref = a[:, c] if variant == "classical" else v
            r[i, c] = q[:, i].conj() @ ref
            v -= r[i, c] * q[:, i]
        r[c, c] = np.linalg.norm(v)
        if abs(r[c, c]) < 1e-12 * max(float(np.linalg.norm(a[:, c])), 1.0):
            raise ValueError(f"column {c} is linearly dependent")
        q[:, c] = v / r[c, c]
    return q, r


def _fmt(z: complex) -> str:
    if abs(z.imag) < 1e-300:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}j"


class SystolicArray:
    """Givens-rotation QR fabric over the enabled columns of an M x K input.

    Boundary cell (i, i) turns its incoming value w into a rotation with c
    real and s complex: rho = sqrt(r^2 + |w|^2), c = r/rho, s = conj(w)/rho
    (a zero boundary value with nonzero input gives (c, s) = (0, 1); an
    all-zero cell passes the identity). Internal cell (i, j) updates
    r <- c r + s w and emits w_out = -conj(s) r_old + c w_in downward.
    Disabled columns hold no cells and never change state.
    """

    def __init__(self, a: np.ndarray, enables=None):
        a = np.asarray(a, dtype=np.complex128)
        self.m, n_cols = a.shape
        if enables is None:
            enables = [True] * n_cols
        if len(enables) != n_cols:
            raise ValueError("one enable flag per input column")
        self.cols = [j for j, e in enumerate(enables) if e]
        self.k = len(self.cols)
        if self.k == 0:
            raise ValueError("no enabled columns")
        self.a = a[:, self.cols]
        self.r = np.zeros((self.k, self.k), dtype=np.complex128)
        self.rot: list[dict[int, tuple[float, complex]]] = [
            {} for _ in range(self.k)]
        self.t = 0
        self.trace: list[str] = []
        self._record()

    @property
    def total_steps(self) -> int:
        return self.m + self.k - 1

    def _record(self) -> None:
        lines = [f"step {self.t}:"]
        for i in range(self.k):
            for j in range(i, self.k):
                if i == j:
                    c, s = self.rot[i].get(self.t, (1.0, 0.0))
                    lines.append(f"  cell ({i + 1},{j + 1}): "
                                 f"r={_fmt(self.r[i, j])} "
                                 f"c={c:.6g} s={_fmt(complex(s))}")
                else:
                    lines.append(f"  cell ({i + 1},{j + 1}): "
                                 f"r={_fmt(self.r[i, j])}")
        self.trace.append("\n".join(lines))

    def step(self) -> None:
        self.t += 1
        t = self.t
        for q in range(self.k):
            row_in = t - 1 - q
            w = self.a[row_in, q] if 0 <= row_in < self.m else 0.0 + 0.0j
            for i in range(q + 1):
                if i == q:
                    rho = float(np.hypot(abs(self.r[i, i]), abs(w)))
                    if rho == 0.0:
                        c, s = 1.0, 0.0 + 0.0j
                    else:
                        c = float(self.r[i, i].real) / rho
                        s = np.conj(w) / rho
                    self.r[i, i] = rho
                    self.rot[i][t] = (c, s)
                else:
                    c, s = self.rot[i].get(t - (q - i), (1.0, 0.0))
                    old = self.r[i, q]
                    self.r[i, q] = c * old + s * w
                    w = -np.conj(s) * old + c * w
        self._record()

    def run(self) -> np.ndarray:
        while self.t < self.total_steps:
            self.step()
        return self.r.copy()


def systolic_qr(a: np.ndarray, enables=None,
                mode: str = "run") -> tuple[np.ndarray, list[str]]:
    """Run the systolic fabric to completion and return (R, step trace).
    ``mode="step"`` advances one external step call at a time; both modes
    produce identical state sequences."""
    if mode not in ("run", "step"):
        raise ValueError(f"unknown mode {mode!r}")
    arr = SystolicArray(a, enables)
    if mode == "run":
        r = arr.run()
    else:
        for _ in range(arr.total_steps):
            arr.step()
        r = arr.r.copy()
    return r, arr.trace


def systolic_tri_inverse(r: TriangularMatrix, enables=None,
                         trace: list | None = None) -> TriangularMatrix:
    """Invert an upper-triangular matrix on the triangular fabric: all
    diagonal reciprocals appear at step 1 and each off-diagonal entry at
    distance d = j - i appears at step 2d + 1 from the accumulated products
    u_{i,j} = sum_k r_{i,k} b_{k,j}, so the whole inverse takes 2K - 1
    steps. Diagonal reciprocals are positive 1/r_{i,i}; the minus sign
    rides the off-diagonal accumulation, pinned by the product identity
    R B = I."""
    ent = r.entries
    k = r.k
    if enables is not None:
        keep = [i for i, e in enumerate(enables) if e]
        ent = ent[np.ix_(keep, keep)]
        k = len(keep)
    for i in range(k):
        if abs(ent[i, i]) <= 1e-12:
            raise ValueError(f"near-singular diagonal at index {i}")
    b = np.zeros((k, k), dtype=np.complex128)
    u = np.zeros((k, k), dtype=np.complex128)

    def record(step: int) -> None:
        if trace is None:
            return
        lines = [f"step {step}:"]
        for i in range(k):
            for j in range(i, k):
                lines.append(f"  cell ({i + 1},{j + 1}): "
                             f"b={_fmt(b[i, j])} u={_fmt(u[i, j])}")
        trace.append("\n".join(lines))

    for step in range(1, 2 * k):
        if step == 1:
            for i in range(k):
                b[i, i] = 1.0 / ent[i, i]
        elif step % 2 == 0:
            d = step // 2
            for i in range(k - d):
                j = i + d
                u[i, j] = ent[i, i + 1:j + 1] @ b[i + 1:j + 1, j]
        else:
            d = (step - 1) // 2
            for i in range(k - d):
                j = i + d
                b[i, j] = -u[i, j] / ent[i, i]
        record(step)
    return TriangularMatrix(b, "upper_inverse")


def solve_modified_ls(a_cs: CSMatrix, y: np.ndarray,
                      ledger: FlopLedger | None = None) -> np.ndarray:
    """Least-squares amplitudes via X = B B^H (S^H y) with B the systolic
    triangular inverse of the R factor of the synthesis matrix S.

    The ledger books the three product stages: the correlation S^H y and
    the final K x K application at full complex cost, the B B^H Gram stage
    as multiply-accumulates. Factorization and inversion happen on the
    systolic fabric and are booked only as divisions here, mirroring the
    way the architecture's arithmetic budget is quoted.
    """
    s = np.conj(a_cs.entries)
    m, k = s.shape
    y = np.asarray(y, dtype=np.complex128)
    r = np.linalg.qr(s, mode="r")
    if np.min(np.abs(np.diag(r))) < 1e-10 * max(np.max(np.abs(r)), 1.0):
        raise ValueError("synthesis matrix is rank deficient")
    b = systolic_tri_inverse(TriangularMatrix(np.triu(r))).entries
    z = s.conj().T @ y
    gram = b @ b.conj().T
    x = gram @ z
    if ledger is not None:
        ledger.charge_matmul(k, m, 1)
        ledger.charge_matmul_accum(k, k, k)
        ledger.charge_matmul(k, k, 1)
        ledger.divisions += k * (k + 1) // 2
    return x


def solve_direct_ls(a_cs: CSMatrix, y: np.ndarray,
                    ledger: FlopLedger | None = None) -> np.ndarray:
    """Normal-equations solve X = (S^H S)^{-1} S^H y with both products
    booked at full complex cost (the K x K inversion itself is not charged,
    matching how the baseline formulation's budget is quoted)."""
    s = np.conj(a_cs.entries)
    m, k = s.shape
    y = np.asarray(y, dtype=np.complex128)
    gram = s.conj().T @ s
    z = s.conj().T @ y
    if ledger is not None:
        ledger.charge_matmul(k, m, k)
        ledger.charge_matmul(k, m, 1)
    try:
        return np.linalg.solve(gram, z)
    except np.linalg.LinAlgError as exc:
        raise ValueError("synthesis matrix is rank deficient") from exc


def approx_threshold_constant(n: int, p: float = 0.99,
                              n_range=None) -> tuple[float, float]:
    """ln(1 - P^{1/N}) evaluated exactly, plus the worst relative error of
    holding that constant over ``n_range`` (0.0 when no range is given).
    Confidence values rounding to 1 in floating point return (-inf, inf) as
    the guarded limit."""
    if n < 16:
        raise ValueError("need N >= 16")
    if not 0.0 < p < 1.0:
        raise ValueError("confidence must be in (0, 1)")

    def c_of(nn: int) -> float:
        inner = 1.0 - p ** (1.0 / nn)
        return float(np.log(inner)) if inner > 0.0 else float("-inf")

    c = c_of(n)
    if not np.isfinite(c):
        return float("-inf"), float("inf")
    rel = 0.0
    if n_range is not None:
        for nn in n_range:
            other = c_of(int(nn))
            if not np.isfinite(other):
                return float("-inf"), float("inf")
            rel = max(rel, abs(other - c) / abs(other))
    return c, rel


def dft_address(n_a: int, b: int, n: int) -> int:
    """1-based row-major address (n_a - 1) N + b into the flattened N x N
    transform table."""
    if not (1 <= n_a <= n and 1 <= b <= n):
        raise ValueError("address components out of range")
    return (n_a - 1) * n + b


def address_select(omega: np.ndarray, bins: np.ndarray, n: int) -> CSMatrix:
    """Build the CS matrix by address arithmetic into the row-major N x N
    forward-transform table: entry (a, j) is table[(n_a - 1) N + b_j] =
    e^{-j 2 pi n_a k_j / N} (positions and bins 0-based here, the address
    formula 1-based)."""
    omega = np.asarray(omega, dtype=np.intp)
    bins = np.asarray(bins, dtype=np.intp)
    entries = np.empty((omega.size, bins.size), dtype=np.complex128)
    for a, pos in enumerate(omega):
        for j, k in enumerate(bins):
            addr = dft_address(int(pos) + 1, int(k) + 1, n)
            flat = addr - 1
            row, col = divmod(flat, n)
            entries[a, j] = np.exp(-2j * np.pi * row * col / n)
    return CSMatrix(entries, omega, bins, n)
