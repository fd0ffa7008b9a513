"""Extreme eigenvalues, dense spectra, traces of even powers, exceptional intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .divgraph import DENSE_LIMIT, OperatorSpec, SupportMask, apply_operator
from .errors import CapacityError, ParameterError, VerificationError


@dataclass
class SpectralResult:
    values: np.ndarray  # descending by absolute value
    residuals: np.ndarray
    iterations: int
    seed: int
    converged: bool = True

    def rows(self):
        return [(i, float(v), float(r)) for i, (v, r) in enumerate(zip(self.values, self.residuals))]


@dataclass
class TraceResult:
    k: int
    value: float
    method: str  # dense-power | walk-sum | stochastic
    stderr: float = 0.0
    extra: dict = field(default_factory=dict)

    def row(self):
        return (self.k, self.method, self.value, self.stderr)


def _as_matvec(op):
    """(dimension, matvec) for an OperatorSpec or a dense symmetric matrix."""
    if isinstance(op, OperatorSpec):
        return op.size, lambda v: apply_operator(op, v)
    M = np.asarray(op, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError("expected a square matrix")
    return M.shape[0], lambda v: M @ v


def _start_vector(n: int, seed: int, op) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(n)
    if isinstance(op, OperatorSpec):
        v[~op.support.bits] = 0.0
    return v


def extreme_eigenvalues(op, count: int = 1, seed: int = 1, max_iter: int = 500,
                        tol: float = 1e-12) -> SpectralResult:
    """Largest-magnitude eigenvalues by implicitly restarted Lanczos (ARPACK).

    Residuals ||A v - lambda v|| are recomputed explicitly from the returned
    Ritz vectors.  Small problems fall back to a dense solve.
    """
    if count < 1:
        raise ParameterError("count must be >= 1")
    n, mv = _as_matvec(op)
    if isinstance(op, OperatorSpec) and op.support.cardinality == 0:
        return SpectralResult(np.zeros(min(count, n)), np.zeros(min(count, n)), 0, seed)
    if n <= max(2 * count + 2, 64):
        M = np.column_stack([mv(e) for e in np.eye(n)]) if isinstance(op, OperatorSpec) else np.asarray(op, float)
        w, V = eigh(M)
        order = np.argsort(-np.abs(w), kind="stable")[:count]
        res = np.linalg.norm(M @ V[:, order] - V[:, order] * w[order], axis=0)
        return SpectralResult(w[order], res, 0, seed)
    lin = LinearOperator((n, n), matvec=mv, dtype=float)
    ncv = min(n, max(2 * count + 20, 40))
    converged = True
    try:
        w, V = eigsh(lin, k=count, which="LM", v0=_start_vector(n, seed, op), ncv=ncv,
                     maxiter=max_iter, tol=tol)
    except ArpackNoConvergence as exc:
        w, V = exc.eigenvalues, exc.eigenvectors
        converged = False
    order = np.argsort(-np.abs(w), kind="stable")
    w, V = w[order], V[:, order]
    res = np.array([np.linalg.norm(mv(V[:, j]) - w[j] * V[:, j]) for j in range(w.size)])
    ok = bool(np.all(res <= 1e-8 * np.maximum(1.0, np.abs(w))))
    return SpectralResult(w, res, max_iter, seed, converged and ok)


def dense_spectrum(matrix: np.ndarray) -> np.ndarray:
    """All eigenvalues (ascending) with a reconstruction check."""
    M = np.asarray(matrix, dtype=float)
    if M.shape[0] > DENSE_LIMIT:
        raise CapacityError(f"dense spectrum limited to {DENSE_LIMIT}")
    w, Q = eigh(M)
    scale = max(np.linalg.norm(M), 1.0)
    if np.linalg.norm((Q * w) @ Q.T - M) > 1e-8 * scale:
        raise VerificationError("eigendecomposition failed to reconstruct the matrix")
    return w


def trace_dense_power(matrix: np.ndarray, k: int) -> TraceResult:
    """Tr(A^{2k}) by repeated squaring of A^2."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    M = np.asarray(matrix, dtype=float)
    if M.shape[0] > DENSE_LIMIT:
        raise CapacityError(f"dense power limited to {DENSE_LIMIT}")
    B = M @ M
    acc = None
    e = k
    while True:
        if e & 1:
            if e == 1 and acc is not None:
                # final product: only its trace is needed
                return TraceResult(k, float(np.sum(acc * B.T)), "dense-power")
            acc = B if acc is None else acc @ B
        e >>= 1
        if not e:
            break
        B = B @ B
    return TraceResult(k, float(np.trace(acc)), "dense-power")


def zero_sum_walks(primes, length: int):
    """All (p_vec, s_vec) of the given length with s_1 p_1 + ... + s_len p_len = 0."""
    primes = tuple(primes)
    if not primes:
        return
    pmax = max(primes)
    steps = [(p, s) for p in primes for s in (1, -1)]

    def rec(prefix_p, prefix_s, total):
        r = length - len(prefix_p)
        if r == 0:
            if total == 0:
                yield tuple(prefix_p), tuple(prefix_s)
            return
        if abs(total) > r * pmax:
            return
        for p, s in steps:
            prefix_p.append(p)
            prefix_s.append(s)
            yield from rec(prefix_p, prefix_s, total + s * p)
            prefix_p.pop()
            prefix_s.pop()

    yield from rec([], [], 0)


def partial_sums(p_vec, s_vec) -> list[int]:
    """beta_0 = 0, beta_i = s_1 p_1 + ... + s_i p_i."""
    beta = [0]
    for p, s in zip(p_vec, s_vec):
        beta.append(beta[-1] + s * p)
    return beta


def walk_weights(spec: OperatorSpec, p_vec, s_vec) -> np.ndarray:
    """Per starting index i, the product prod_j f_{p_j}(n_i + beta_{j-1}) over walks inside V and X.

    f_p(n) = 1 - 1/p if p | n, else -1/p.  Entries where the walk leaves the
    window or the support are zero.
    """
    n = spec.size
    beta = partial_sums(p_vec, s_vec)
    lo, hi = -min(beta), n - max(beta)
    out = np.zeros(n)
    if hi <= lo:
        return out
    first = spec.table.first
    idx = np.arange(lo, hi)
    mask = spec.support.bits
    w = mask[idx].astype(float)
    for j, p in enumerate(p_vec):
        pos = idx + beta[j]
        w *= np.where((first + pos) % p == 0, 1.0 - 1.0 / p, -1.0 / p)
        w *= mask[idx + beta[j + 1]]
    out[lo:hi] = w
    return out


def trace_walk_sum(spec: OperatorSpec, k: int, budget: int = 10**8) -> TraceResult:
    """Tr(A|_X^{2k}) as a sum over closed walks n -> n + beta_1 -> ... -> n."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    P = spec.pw.primes
    if len(P) ** (2 * k) * 4 ** k > budget:
        raise CapacityError("walk enumeration exceeds budget")
    total = 0.0
    walks = 0
    for p_vec, s_vec in zero_sum_walks(P, 2 * k):
        total += float(walk_weights(spec, p_vec, s_vec).sum())
        walks += 1
    return TraceResult(k, total, "walk-sum", extra={"walks": walks})


def trace_stochastic(op, k: int, samples: int = 64, seed: int = 1) -> TraceResult:
    """Rademacher estimate of Tr(A^{2k}) = E ||A^k z||^2 with its standard error."""
    if samples < 8:
        raise ParameterError("need at least 8 samples")
    n, mv = _as_matvec(op)
    rng = np.random.default_rng(seed)
    vals = np.empty(samples)
    for s in range(samples):
        z = rng.integers(0, 2, n).astype(float) * 2 - 1
        for _ in range(k):
            z = mv(z)
        vals[s] = z @ z
    return TraceResult(k, float(vals.mean()), "stochastic",
                       float(vals.std(ddof=1) / math.sqrt(samples)), {"samples": samples})


def moment_gap(matvec, v: np.ndarray, k: int) -> float:
    """<v, A^{2k} v> - |<v, A v>|^{2k} for unit v; non-negative for symmetric A."""
    v = v / np.linalg.norm(v)
    Av = matvec(v)
    w = v
    for _ in range(k):
        w = matvec(w)
    return float(w @ w - abs(v @ Av) ** (2 * k))


def row_sum_bound(matrix: np.ndarray) -> float:
    return float(np.abs(matrix).sum(axis=1).max()) if matrix.size else 0.0


def bandwidth(matrix: np.ndarray) -> int:
    i, j = np.nonzero(matrix)
    return int(np.abs(i - j).max()) if i.size else 0


def _top_abs(M: np.ndarray) -> tuple[float, np.ndarray]:
    n = M.shape[0]
    if n == 0:
        return 0.0, np.zeros(0)
    if n <= 200:
        w, V = eigh(M)
        j = int(np.argmax(np.abs(w)))
        return float(abs(w[j])), V[:, j]
    # only the two ends of the spectrum are needed
    lo, vlo = eigh(M, subset_by_index=[0, 0])
    hi, vhi = eigh(M, subset_by_index=[n - 1, n - 1])
    if abs(lo[0]) > abs(hi[0]):
        return float(abs(lo[0])), vlo[:, 0]
    return float(abs(hi[0])), vhi[:, 0]


@dataclass
class ExceptionalResult:
    mask: SupportMask  # complement of the exceptional set
    excluded: int
    interval_length: int
    rounds: int
    restricted_norm: float


def extract_exceptional_intervals(matrix: np.ndarray, alpha: float, H: int, L: float,
                                  window_start: int = 0, max_rounds: int = 50) -> ExceptionalResult:
    """Remove intervals carrying large eigenvalues until the restriction has norm <= alpha.

    Intervals have length 4 ceil(L/alpha) H and are scanned with stride half
    their length; an interval is removed when the principal submatrix of the
    current restriction has an eigenvalue of modulus >= alpha/2.  The scan is
    repeated on the restriction until the dense check passes.
    """
    M = np.asarray(matrix, dtype=float)
    n = M.shape[0]
    if alpha <= 0 or H < 1:
        raise ParameterError("need alpha > 0 and H >= 1")
    if n > DENSE_LIMIT:
        raise CapacityError(f"dense extraction limited to {DENSE_LIMIT}")
    if bandwidth(M) > H:
        raise ParameterError("matrix bandwidth exceeds H")
    if row_sum_bound(M) > L * (1 + 1e-12):
        raise ParameterError("row absolute sums exceed L")
    length = 4 * math.ceil(L / alpha) * H
    stride = max(1, length // 2)
    keep = np.ones(n, dtype=bool)
    rounds = 0
    while True:
        R = M * keep[:, None] * keep[None, :]
        top, vec = _top_abs(R)
        if top <= alpha + 1e-6:
            return ExceptionalResult(SupportMask(window_start, keep), int(n - keep.sum()),
                                     length, rounds, top)
        if rounds >= max_rounds:
            raise VerificationError("restriction still has a large eigenvalue", instance=vec)
        rounds += 1
        removed = False
        for a in range(0, max(n - stride, 1), stride):
            b = min(a + length, n)
            sub = R[a:b, a:b]
            if _top_abs(sub)[0] >= alpha / 2:
                keep[a:b] = False
                removed = True
        if not removed:
            raise VerificationError("no interval exceeds alpha/2 yet the norm exceeds alpha",
                                    instance=vec)
