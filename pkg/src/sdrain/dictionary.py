"""K-SVD dictionary learning and the binary dictionary file format."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .omp import OmpStop, codes_to_matrix, omp_batch
from .patches import PatchMatrix

log = logging.getLogger(__name__)

KINDS = ("nonrain", "rain")
MAGIC = b"SDIC"
VERSION = 1
_HEADER = struct.Struct("<4sIBII")
# refuses headers that would describe an absurd allocation
MAX_VALUES = 1 << 28


class DictionaryFormatError(ValueError):
    pass


def _sign_fix(atoms: np.ndarray) -> np.ndarray:
    """+1/-1 per column so that its first nonzero entry is non-negative."""
    nz = atoms != 0
    first = np.argmax(nz, axis=0)
    lead = atoms[first, np.arange(atoms.shape[1])]
    return np.where(lead < 0, -1.0, 1.0)


def normalize_atoms(atoms: np.ndarray) -> np.ndarray:
    """Scale columns to unit norm, first nonzero entry non-negative."""
    atoms = np.asarray(atoms, dtype=np.float64)
    norms = np.linalg.norm(atoms, axis=0)
    if np.any(norms == 0):
        raise ValueError(f"zero atom at column {int(np.argmin(norms))}")
    out = atoms / norms
    return out * _sign_fix(out)


@dataclass
class Dictionary:
    atoms: np.ndarray    # (m*m, K)
    kind: str
    m: int

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=np.float64)
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.atoms.ndim != 2 or self.atoms.shape[0] != self.m * self.m:
            raise ValueError(f"atoms must be (m*m, K) with m={self.m}")
        norms = np.linalg.norm(self.atoms, axis=0)
        if np.any(norms == 0):
            raise ValueError("dictionary has an all-zero atom")
        if np.any(np.abs(norms - 1) > 1e-10):
            raise ValueError("dictionary atoms must have unit norm")

    @property
    def K(self) -> int:
        return self.atoms.shape[1]

    def normalized(self) -> "Dictionary":
        return Dictionary(normalize_atoms(self.atoms), self.kind, self.m)


@dataclass
class DictionarySet:
    nonrain: Dictionary
    rain: Dictionary

    def __post_init__(self):
        if self.nonrain.m != self.rain.m or self.nonrain.K != self.rain.K:
            raise ValueError("rain and non-rain dictionaries differ in m or K")

    @property
    def m(self) -> int:
        return self.nonrain.m

    @property
    def K(self) -> int:
        return self.nonrain.K

    def joint(self) -> np.ndarray:
        """``[Dn Dr]``: non-rain atoms 0..K-1, rain atoms K..2K-1."""
        return np.hstack([self.nonrain.atoms, self.rain.atoms])


def mean_sq_error(Y: np.ndarray, D: np.ndarray, X: np.ndarray) -> float:
    R = Y - D @ X
    return float(np.mean(R * R))


def ksvd(Y: np.ndarray, D0: np.ndarray, L: int = 3, iters: int = 30):
    """Run K-SVD from the initial dictionary `D0`.

    Returns ``(D, X, history)`` where ``history[0]`` is the mean squared
    representation error of the initial coding and ``history[t]`` the error
    after sweep t.  A signal keeps its previous code when the fresh OMP
    code represents it worse, so the history never increases.
    """
    Y = np.asarray(Y, dtype=np.float64)
    D = normalize_atoms(D0)
    n, N = Y.shape
    K = D.shape[1]
    stop = OmpStop.sparsity(L)
    X = codes_to_matrix(omp_batch(Y, D, stop), K)
    R = Y - D @ X
    history = [float(np.mean(R * R))]

    for it in range(iters):
        if it > 0:
            Xn = codes_to_matrix(omp_batch(Y, D, stop), K)
            Rn = Y - D @ Xn
            better = np.einsum("ij,ij->j", Rn, Rn) <= np.einsum("ij,ij->j", R, R)
            X[:, better] = Xn[:, better]
            R[:, better] = Rn[:, better]

        err = np.einsum("ij,ij->j", R, R)
        replaced = 0
        for k in range(K):
            omega = np.nonzero(X[k])[0]
            if omega.size == 0:
                # unused atom: take the worst-represented signal
                j = int(np.argmax(err))
                if err[j] <= 0:
                    continue
                D[:, k] = Y[:, j] / np.linalg.norm(Y[:, j])
                err[j] = 0.0
                replaced += 1
                continue
            E = R[:, omega] + np.outer(D[:, k], X[k, omega])
            U, sv, Vt = np.linalg.svd(E, full_matrices=False)
            atom, row = U[:, 0], sv[0] * Vt[0]
            if atom[np.argmax(atom != 0)] < 0:
                atom, row = -atom, -row
            D[:, k] = atom
            X[k, omega] = row
            R[:, omega] = E - np.outer(atom, row)
        # renormalize against drift; the fitted codes absorb the scale
        norms = np.linalg.norm(D, axis=0)
        D /= norms
        X *= norms[:, None]
        history.append(float(np.mean(R * R)))
        log.debug("ksvd sweep %d: mse %.6g, %d atoms replaced",
                  it + 1, history[-1], replaced)
    return D, X, history


def ksvd_train(patches: PatchMatrix | np.ndarray, K: int = 1024, L: int = 3,
               iters: int = 30, seed: int = 0, kind: str = "rain",
               m: int | None = None, history: list | None = None) -> Dictionary:
    """Learn a K-atom dictionary, initialized from K random distinct patches.

    If `history` is a list, the per-sweep mean squared errors are appended.
    """
    Y = patches.data if isinstance(patches, PatchMatrix) else np.asarray(patches, float)
    n, N = Y.shape
    if m is None:
        m = int(round(np.sqrt(n)))
    if K > N:
        raise ValueError(f"K={K} atoms requested from only {N} training patches")
    norms = np.linalg.norm(Y, axis=0)
    usable = np.nonzero(norms > 1e-12 * max(norms.max(), 1e-300))[0]
    if norms.max() == 0 or usable.size == 0:
        raise ValueError("degenerate training set: all patches are zero")
    rng = np.random.default_rng(seed)
    if usable.size >= K:
        init = usable[rng.choice(usable.size, size=K, replace=False)]
        D0 = Y[:, init]
    else:
        D0 = np.hstack([Y[:, usable], rng.standard_normal((n, K - usable.size))])
    D, _, hist = ksvd(Y, D0, L=L, iters=iters)
    if history is not None:
        history.extend(hist)
    return Dictionary(D, kind, m)


def save_dictionary(D: Dictionary, path) -> None:
    header = _HEADER.pack(MAGIC, VERSION, KINDS.index(D.kind), D.m, D.K)
    body = np.asarray(D.atoms, dtype="<f8").tobytes(order="F")
    Path(path).write_bytes(header + body)


def load_dictionary(path) -> Dictionary:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DictionaryFormatError(f"cannot read dictionary {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise DictionaryFormatError(f"{path}: truncated header")
    magic, version, kind, m, K = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DictionaryFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DictionaryFormatError(f"{path}: unsupported version {version}")
    if kind >= len(KINDS):
        raise DictionaryFormatError(f"{path}: unknown kind byte {kind}")
    count = m * m * K
    if m == 0 or K == 0 or count > MAX_VALUES:
        raise DictionaryFormatError(f"{path}: bad dimensions m={m} K={K}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise DictionaryFormatError(
            f"{path}: expected {8 * count} bytes of atoms, found {len(body)}")
    atoms = np.frombuffer(body, dtype="<f8").reshape((m * m, K), order="F")
    try:
        return Dictionary(atoms.astype(np.float64), KINDS[kind], m)
    except ValueError as exc:
        raise DictionaryFormatError(f"{path}: {exc}") from exc
