"""Problem data for the continuous-time algebraic Riccati equation.

An :class:`AREInstance` holds the triple ``(A, B, C)`` of

    A^T X + X A - X B B^T X + C^T C = 0

with ``A`` sparse ``n x n``, ``B`` dense ``n x q`` and ``C`` dense ``p x n``.
The generators below build the three benchmark families used throughout the
package (a banded nonsymmetric Toeplitz matrix, the 2-D finite-difference
Laplacian and a scaled Grcar matrix) plus random passive instances for
property testing.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sps

from .errors import MatrixMarketError

logger = logging.getLogger(__name__)

#: Identifier of the bit generator used by every seeded generator; stored in run logs.
RNG_ALGORITHM = "numpy.random.PCG64"


@dataclass
class AREInstance:
    """Riccati problem data ``A^T X + X A - X B B^T X + C^T C = 0``."""

    A: sps.csr_matrix
    B: np.ndarray
    C: np.ndarray
    label: str = "instance"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = sps.csr_matrix(self.A, dtype=float)
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {self.A.shape}")
        if self.B.shape[0] != n:
            if self.B.shape[1] == n and self.B.shape[0] == 1:
                self.B = self.B.T
            else:
                raise ValueError(f"B must have {n} rows, got shape {self.B.shape}")
        if self.C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got shape {self.C.shape}")
        if self.q + self.p > n / 4:
            warnings.warn(
                f"{self.label}: q + p = {self.q + self.p} is not small compared with n = {n}",
                stacklevel=2,
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def dense(self):
        """Return ``(A, B, C)`` with ``A`` as a dense array."""
        return self.A.toarray(), self.B, self.C

    def describe(self) -> dict:
        return {"label": self.label, "n": self.n, "q": self.q, "p": self.p, **self.params}


# --------------------------------------------------------------------------
# Matrix Market


_MM_FIELDS = {"real", "integer", "pattern"}
_MM_SYMMETRY = {"general", "symmetric", "skew-symmetric"}


def load_matrix_market(path) -> sps.csr_matrix:
    """Read a real Matrix Market file (coordinate or array format).

    Duplicate coordinates are summed and symmetric / skew-symmetric storage is
    expanded to the full matrix.

    Raises
    ------
    MatrixMarketError
        On malformed input, with the offending line number, on complex or
        hermitian data, and when the entry count disagrees with the header.
    FileNotFoundError
        If ``path`` does not exist.
    """
    path = Path(path)
    with path.open("r") as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)

    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket" or header[1].lower() != "matrix":
        raise MatrixMarketError("missing '%%MatrixMarket matrix' banner", 1)
    fmt, fld, sym = (h.lower() for h in header[2:])
    if fld in ("complex", "hermitian") or sym == "hermitian":
        raise MatrixMarketError("complex entries are not supported", 1)
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"unknown format {fmt!r}", 1)
    if fld not in _MM_FIELDS:
        raise MatrixMarketError(f"unknown field {fld!r}", 1)
    if sym not in _MM_SYMMETRY:
        raise MatrixMarketError(f"unknown symmetry {sym!r}", 1)
    if fmt == "array" and fld == "pattern":
        raise MatrixMarketError("pattern field requires coordinate format", 1)

    body = [(i + 1, ln.split()) for i, ln in enumerate(lines) if i > 0]
    body = [(no, tok) for no, tok in body if tok and not tok[0].startswith("%")]
    if not body:
        raise MatrixMarketError("missing size line", len(lines))
    size_no, size_tok = body[0]
    try:
        sizes = [int(s) for s in size_tok]
    except ValueError:
        raise MatrixMarketError(f"bad size line {' '.join(size_tok)!r}", size_no) from None
    entries = body[1:]

    if fmt == "coordinate":
        if len(sizes) != 3:
            raise MatrixMarketError("coordinate size line needs 'rows cols nnz'", size_no)
        nrows, ncols, nnz = sizes
        if len(entries) != nnz:
            raise MatrixMarketError(
                f"header declares {nnz} entries but {len(entries)} were found", size_no
            )
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.ones(nnz)
        want = 2 if fld == "pattern" else 3
        for idx, (no, tok) in enumerate(entries):
            if len(tok) != want:
                raise MatrixMarketError(f"expected {want} fields, got {len(tok)}", no)
            try:
                i, j = int(tok[0]), int(tok[1])
                if want == 3:
                    vals[idx] = float(tok[2])
            except ValueError:
                raise MatrixMarketError(f"cannot parse entry {' '.join(tok)!r}", no) from None
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise MatrixMarketError(
                    f"index ({i}, {j}) outside {nrows} x {ncols} matrix", no
                )
            rows[idx], cols[idx] = i - 1, j - 1
    else:
        if len(sizes) != 2:
            raise MatrixMarketError("array size line needs 'rows cols'", size_no)
        nrows, ncols = sizes
        if sym == "general":
            pos = [(i, j) for j in range(ncols) for i in range(nrows)]
        else:
            start = 0 if sym == "symmetric" else 1
            pos = [(i, j) for j in range(ncols) for i in range(j + start, nrows)]
        if len(entries) != len(pos):
            raise MatrixMarketError(
                f"expected {len(pos)} array entries, found {len(entries)}", size_no
            )
        rows = np.array([ij[0] for ij in pos], dtype=np.int64)
        cols = np.array([ij[1] for ij in pos], dtype=np.int64)
        vals = np.empty(len(pos))
        for idx, (no, tok) in enumerate(entries):
            if len(tok) != 1:
                raise MatrixMarketError(f"expected 1 field, got {len(tok)}", no)
            try:
                vals[idx] = float(tok[0])
            except ValueError:
                raise MatrixMarketError(f"cannot parse value {tok[0]!r}", no) from None

    if sym != "general":
        if nrows != ncols:
            raise MatrixMarketError(f"{sym} matrix must be square", size_no)
        off = rows != cols
        sign = 1.0 if sym == "symmetric" else -1.0
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, sign * vals[off]]),
        )
    # coo -> csr sums duplicates
    M = sps.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)).tocsr()
    M.sum_duplicates()
    return M


def save_matrix_market(path, M, comment=""):
    """Write ``M`` in coordinate (sparse) or array (dense) Matrix Market format."""
    scipy.io.mmwrite(str(path), M, comment=comment)


def load_dense_text(path) -> np.ndarray:
    """Read a dense matrix from whitespace- or comma-separated text."""
    text = Path(path).read_text()
    delimiter = "," if "," in text else None
    return np.atleast_2d(np.loadtxt(path, delimiter=delimiter, ndmin=2))


def load_instance(a_path, b_path, c_path, label=None) -> AREInstance:
    """Assemble an instance from a ``.mtx`` file for ``A`` and text files for ``B``, ``C``."""
    A = load_matrix_market(a_path)
    B = load_dense_text(b_path)
    C = load_dense_text(c_path)
    if B.shape[0] != A.shape[0] and B.shape[1] == A.shape[0]:
        B = B.T
    if A.shape[0] != A.shape[1]:
        raise MatrixMarketError(f"A must be square, got {A.shape[0]} x {A.shape[1]}")
    if B.shape[0] != A.shape[0] or C.shape[1] != A.shape[0]:
        raise ValueError(
            f"dimension mismatch: A is {A.shape}, B is {B.shape}, C is {C.shape}"
        )
    return AREInstance(A, B, C, label=label or Path(a_path).stem, params={"source": str(a_path)})


# --------------------------------------------------------------------------
# Generators


def _alternating_row(n):
    c = np.ones(n)
    c[1::2] = -2.0
    return c[None, :]


def _banded_toeplitz(n, stencil, center):
    """Toeplitz matrix whose rows read ``stencil`` with ``stencil[center]`` on the diagonal."""
    offsets = [k - center for k in range(len(stencil))]
    diags = [np.full(n - abs(o), v, dtype=float) for o, v in zip(offsets, stencil)]
    return sps.diags(diags, offsets, shape=(n, n), format="csr")


def gen_toeplitz_problem(n: int, t: float) -> AREInstance:
    """Banded nonsymmetric Toeplitz problem with a rank-one ``B = t * ones``.

    ``A`` is the negated Toeplitz matrix with stencil
    ``(-1, -1.5, 2.8, 1, 1, 1)``, 2.8 on the diagonal: two subdiagonals
    (1.5 and 1 after negation) and three superdiagonals (-1 after negation).
    ``C`` alternates ``1, -2, 1, -2, ...``.
    """
    if n < 6:
        raise ValueError(f"n must be at least 6, got {n}")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    A = -_banded_toeplitz(n, [-1.0, -1.5, 2.8, 1.0, 1.0, 1.0], center=2)
    B = t * np.ones((n, 1))
    return AREInstance(A, B, _alternating_row(n), label=f"toeplitz_n{n}_t{t:g}",
                       params={"generator": "toeplitz", "n": n, "t": t})


def laplacian_1d(n0: int) -> sps.csr_matrix:
    """Tridiagonal ``toeplitz(1, -2, 1)`` of order ``n0``."""
    return _banded_toeplitz(n0, [1.0, -2.0, 1.0], center=1)


def gen_laplacian_problem(n0: int, t: float) -> AREInstance:
    """Scaled 2-D Dirichlet Laplacian ``A0 (x) I + I (x) A0`` of order ``n0**2``."""
    if n0 < 2:
        raise ValueError(f"n0 must be at least 2, got {n0}")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    A0 = laplacian_1d(n0)
    eye = sps.identity(n0, format="csr")
    A = (sps.kron(A0, eye) + sps.kron(eye, A0)).tocsr()
    n = n0 * n0
    B = t * np.ones((n, 1))
    return AREInstance(A, B, _alternating_row(n), label=f"laplacian_n0{n0}_t{t:g}",
                       params={"generator": "laplacian", "n0": n0, "t": t})


def grcar_matrix(n: int) -> sps.csr_matrix:
    """Grcar matrix: -1 on the subdiagonal, 1 on the diagonal and three superdiagonals."""
    return _banded_toeplitz(n, [-1.0, 1.0, 1.0, 1.0, 1.0], center=1)


def gen_grcar_problem(n: int, p_b: int, seed: int, b_norm: float = 5e-2) -> AREInstance:
    """``A = -A0/3.2 - I`` with ``A0`` the Grcar matrix; random ``B`` with ``||B||_2 = b_norm``."""
    if n < 5:
        raise ValueError(f"n must be at least 5, got {n}")
    A = (-grcar_matrix(n) / 3.2 - sps.identity(n)).tocsr()
    rng = np.random.Generator(np.random.PCG64(seed))
    B = rng.standard_normal((n, p_b))
    B *= b_norm / np.linalg.norm(B, 2)
    C = np.ones((1, n)) / np.sqrt(n)
    return AREInstance(A, B, C, label=f"grcar_n{n}_seed{seed}",
                       params={"generator": "grcar", "n": n, "p_b": p_b, "seed": seed,
                               "rng": RNG_ALGORITHM})


def gen_random_problem(n: int, q: int, p: int, seed: int, margin: float = 0.5,
                       b_scale: float = 1.0) -> AREInstance:
    """Random passive instance: the symmetric part of ``A`` is bounded by ``-margin``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    G = rng.standard_normal((n, n)) / np.sqrt(n)
    lam = np.linalg.eigvalsh((G + G.T) / 2).max()
    A = G - (lam + margin) * np.eye(n)
    B = b_scale * rng.standard_normal((n, q)) / np.sqrt(n)
    C = rng.standard_normal((p, n)) / np.sqrt(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return AREInstance(sps.csr_matrix(A), B, C, label=f"random_n{n}_seed{seed}",
                           params={"generator": "random", "n": n, "q": q, "p": p,
                                   "seed": seed, "rng": RNG_ALGORITHM})


GENERATORS = {
    "toeplitz": gen_toeplitz_problem,
    "laplacian": gen_laplacian_problem,
    "grcar": gen_grcar_problem,
    "random": gen_random_problem,
}
