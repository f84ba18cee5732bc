"""Orthogonal matching pursuit.

Two stopping rules are supported: a fixed atom budget (``sparsity``) and a
bounded per-pixel RMS error (``error``), where coding stops as soon as
``||y - D a||^2 <= n * eps^2`` (n = signal length) or the atom cap is hit.

Coding runs vectorized over blocks of signals using the Gram matrix of the
dictionary; every signal is still coded independently and a signal's result
does not depend on which other signals share its block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLOCK = 256

# relative floor on residual energy; stops pursuit once the signal is
# represented to machine precision (a zero error bound cannot be met exactly)
_RESIDUAL_FLOOR = 1e-24


class DictionaryError(ValueError):
    pass


@dataclass
class SparseCode:
    support: np.ndarray   # selected atom indices, in selection order
    coeffs: np.ndarray
    dict_width: int

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.int64)
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.support.shape != self.coeffs.shape:
            raise ValueError("support and coeffs differ in length")
        if len(np.unique(self.support)) != len(self.support):
            raise ValueError("duplicate atom in support")
        if len(self.support) and (self.support.min() < 0
                                  or self.support.max() >= self.dict_width):
            raise ValueError("support index out of range")

    def __len__(self):
        return len(self.support)

    @classmethod
    def empty(cls, dict_width: int) -> "SparseCode":
        return cls(np.zeros(0, np.int64), np.zeros(0), dict_width)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.dict_width)
        out[self.support] = self.coeffs
        return out


@dataclass(frozen=True)
class OmpStop:
    mode: str = "sparsity"      # "sparsity" | "error"
    L: int = 3
    eps: float = 0.0
    max_atoms: int | None = None

    def __post_init__(self):
        if self.mode not in ("sparsity", "error"):
            raise ValueError(f"unknown OMP stop mode {self.mode!r}")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.max_atoms is not None and self.max_atoms < 1:
            raise ValueError("max_atoms must be >= 1")

    @classmethod
    def sparsity(cls, L: int) -> "OmpStop":
        return cls("sparsity", L=L)

    @classmethod
    def error(cls, eps: float, max_atoms: int | None = None) -> "OmpStop":
        return cls("error", eps=eps, max_atoms=max_atoms)

    def atom_cap(self, n: int, P: int) -> int:
        if self.mode == "sparsity":
            cap = self.L
        else:
            cap = self.max_atoms if self.max_atoms is not None else max(1, n // 4)
            cap = min(cap, n)
        return min(cap, P)

    def bound(self, n: int) -> float:
        return n * self.eps ** 2 if self.mode == "error" else 0.0


def check_dictionary(D: np.ndarray, tol: float = 1e-8) -> None:
    D = np.asarray(D)
    if D.ndim != 2 or D.shape[1] == 0:
        raise DictionaryError("dictionary must be a non-empty 2-D matrix")
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms == 0):
        raise DictionaryError("dictionary has an all-zero atom")
    if np.any(np.abs(norms - 1.0) > tol):
        raise DictionaryError("dictionary atoms are not unit-norm")


def _code_block(Y, D, G, stop: OmpStop, trace=None):
    n, B = Y.shape
    P = D.shape[1]
    cap = stop.atom_cap(n, P)
    bound = stop.bound(n)
    DtY = D.T @ Y                        # (P, B)
    energy = np.einsum("ij,ij->j", Y, Y)
    floor = _RESIDUAL_FLOOR * energy
    cols = np.arange(B)

    support = np.zeros((B, cap), dtype=np.int64)
    coeffs = np.zeros((B, cap))
    size = np.zeros(B, dtype=np.int64)
    corr = DtY.T.copy()                  # (B, P) correlations with residual
    resid = energy.copy()
    active = (resid > bound) & (resid > floor)
    if trace is not None:
        trace.append(np.sqrt(np.maximum(resid, 0.0)))

    for k in range(cap):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        a = np.abs(corr[idx])
        prev = support[idx, :k]
        a[np.arange(idx.size)[:, None], prev] = -1.0
        pick = np.argmax(a, axis=1)      # first maximum: lowest index wins ties
        support[idx, k] = pick
        S = support[idx, :k + 1]                       # (b, k+1)
        Gs = G[S[:, :, None], S[:, None, :]]           # (b, k+1, k+1)
        rhs = DtY[S, idx[:, None]]                     # (b, k+1)
        c = np.linalg.solve(Gs, rhs[:, :, None])[:, :, 0]
        coeffs[idx, :k + 1] = c
        size[idx] = k + 1
        # corr = D^T y - G[:, S] c, summed term by term for block independence
        GS = G[:, S].transpose(1, 2, 0)                # (b, k+1, P)
        corr[idx] = DtY[:, idx].T - (GS * c[:, :, None]).sum(axis=1)
        r2 = energy[idx] - np.einsum("ij,ij->i", c, rhs)
        resid[idx] = r2
        done = (r2 <= bound) | (r2 <= floor[idx]) | (k + 1 >= cap)
        active[idx[done]] = False
        if trace is not None:
            trace.append(np.sqrt(np.maximum(resid, 0.0)))

    return [SparseCode(support[j, :size[j]], coeffs[j, :size[j]], P) for j in cols]


def omp_batch(Y: np.ndarray, D: np.ndarray, stop: OmpStop, gram=None,
              check: bool = True) -> list[SparseCode]:
    """Code every column of `Y` over the unit-norm dictionary `D`."""
    D = np.asarray(D, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if check:
        check_dictionary(D)
    if Y.shape[0] != D.shape[0]:
        raise ValueError(f"signal length {Y.shape[0]} != atom length {D.shape[0]}")
    G = D.T @ D if gram is None else gram
    codes = []
    for start in range(0, Y.shape[1], BLOCK):
        codes.extend(_code_block(Y[:, start:start + BLOCK], D, G, stop))
    return codes


def omp(y: np.ndarray, D: np.ndarray, stop: OmpStop, trace: list | None = None,
        check: bool = True) -> SparseCode:
    """Code a single signal.

    If `trace` is a list, the residual norm before the first and after
    every iteration is appended to it.
    """
    D = np.asarray(D, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if check:
        check_dictionary(D)
    if y.shape[0] != D.shape[0]:
        raise ValueError(f"signal length {y.shape[0]} != atom length {D.shape[0]}")
    steps = [] if trace is not None else None
    code = _code_block(y, D, D.T @ D, stop, steps)[0]
    if trace is not None:
        trace.extend(float(s[0]) for s in steps)
    return code


def reconstruct(D: np.ndarray, code: SparseCode) -> np.ndarray:
    D = np.asarray(D)
    if code.dict_width != D.shape[1]:
        raise IndexError(f"code indexes {code.dict_width} atoms, dictionary has {D.shape[1]}")
    if len(code) == 0:
        return np.zeros(D.shape[0])
    return D[:, code.support] @ code.coeffs


def reconstruct_batch(D: np.ndarray, codes) -> np.ndarray:
    return np.stack([reconstruct(D, c) for c in codes], axis=1)


def split_code(code: SparseCode, K: int) -> tuple[SparseCode, SparseCode]:
    """Split a code over ``[Dn Dr]`` into its non-rain and rain parts."""
    if code.dict_width != 2 * K:
        raise ValueError(f"code width {code.dict_width} is not 2*K = {2 * K}")
    rain = code.support >= K
    nonrain = SparseCode(code.support[~rain], code.coeffs[~rain], K)
    return nonrain, SparseCode(code.support[rain] - K, code.coeffs[rain], K)


def codes_to_matrix(codes, width: int) -> np.ndarray:
    X = np.zeros((width, len(codes)))
    for j, c in enumerate(codes):
        X[c.support, j] = c.coeffs
    return X
