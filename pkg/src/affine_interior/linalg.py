"""Small-matrix arithmetic and symbolic word bookkeeping.

Words are tuples of 0-based letters ``0..m-1``.  The empty tuple is the
empty word.  Matrix tuples are stored as a single ``(m, d, d)`` array.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

Word = tuple

INVERTIBILITY_TOL = 1e-12
DEFAULT_CHUNK = 1 << 18


class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


def as_matrix(M) -> np.ndarray:
    A = np.array(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    return A


def is_invertible(M: np.ndarray, tol: float = INVERTIBILITY_TOL) -> bool:
    scale = float(np.max(np.abs(M))) if M.size else 0.0
    if scale == 0.0:
        return False
    d = M.shape[0]
    return abs(np.linalg.det(M)) > tol * scale**d


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class MapTuple:
    """The linear parts ``(T_1, ..., T_m)`` of an affine IFS.

    ``delta`` is the largest operator norm; it is recomputed on
    construction and any singular matrix is rejected here, once, so
    downstream code never re-checks invertibility.
    """

    maps: np.ndarray
    delta: float = field(init=False)
    dets: np.ndarray = field(init=False, repr=False)
    inverses: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        maps = np.array(self.maps, dtype=float)
        if maps.ndim == 2 and maps.shape[0] == maps.shape[1] == 1:
            maps = maps.reshape(-1, 1, 1)
        if maps.ndim == 1:
            maps = maps.reshape(-1, 1, 1)
        if maps.ndim != 3 or maps.shape[1] != maps.shape[2]:
            raise DomainError(f"maps must have shape (m, d, d), got {maps.shape}")
        if maps.shape[0] < 1:
            raise DomainError("need at least one map")
        if not np.all(np.isfinite(maps)):
            raise DomainError("maps contain non-finite entries")
        for i, T in enumerate(maps):
            if not is_invertible(T):
                raise DomainError(f"map {i} is singular within tolerance")
        maps.setflags(write=False)
        dets = np.linalg.det(maps)
        inverses = np.linalg.inv(maps)
        for a in (dets, inverses):
            a.setflags(write=False)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "dets", dets)
        object.__setattr__(self, "inverses", inverses)
        object.__setattr__(
            self, "delta", float(max(operator_norm(T) for T in maps)))

    @property
    def m(self) -> int:
        return self.maps.shape[0]

    @property
    def d(self) -> int:
        return self.maps.shape[1]

    def __len__(self):
        return self.m

    def __getitem__(self, i):
        return self.maps[i]

    @classmethod
    def from_list(cls, mats: Sequence) -> "MapTuple":
        return cls(np.array([as_matrix(M) for M in mats]))


def operator_norm(M: np.ndarray) -> float:
    return float(singular_values(M)[0])


def check_word(t: MapTuple, I: Sequence[int]) -> Word:
    I = tuple(int(i) for i in I)
    for i in I:
        if not 0 <= i < t.m:
            raise DomainError(f"letter {i} out of range for {t.m} maps")
    return I


def word_product(t: MapTuple, I: Sequence[int]) -> np.ndarray:
    """Ordered product ``T_{i_1} ... T_{i_n}``; the identity for the empty word."""
    I = check_word(t, I)
    P = np.eye(t.d)
    for i in I:
        P = P @ t.maps[i]
    return P


def word_det(t: MapTuple, I: Sequence[int]) -> float:
    """Determinant of ``T_I`` as a product of letter determinants."""
    I = check_word(t, I)
    return float(np.prod(t.dets[list(I)])) if I else 1.0


def _sv2(a, b, c, d, det=None):
    # closed form; the small value is det/large. sqrt beats hypot here and
    # entries are contraction-sized, so overflow is not a concern
    p = np.sqrt((a + d) ** 2 + (c - b) ** 2)
    q = np.sqrt((a - d) ** 2 + (b + c) ** 2)
    s1 = 0.5 * (p + q)
    det = np.abs(a * d - b * c) if det is None else np.abs(det)
    with np.errstate(divide="ignore", invalid="ignore"):
        s2 = np.where(s1 > 0, det / np.where(s1 > 0, s1, 1.0), 0.0)
    s2 = np.minimum(s2, s1)
    return s1, s2


def singular_values(M) -> np.ndarray:
    """Singular values of ``M`` in descending order."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 0 or M.shape == (1, 1):
        return np.array([abs(float(M.reshape(-1)[0]))])
    if M.shape == (2, 2):
        s1, s2 = _sv2(M[0, 0], M[0, 1], M[1, 0], M[1, 1])
        return np.array([float(s1), float(s2)])
    return np.linalg.svd(M, compute_uv=False)


def batch_singular_values(mats: np.ndarray, dets: np.ndarray | None = None,
                          invs: np.ndarray | None = None) -> np.ndarray:
    """Row-wise descending singular values of a ``(K, d, d)`` stack.

    A known determinant (e.g. a product of letter determinants) sharpens
    the small singular values.  For ``d >= 3`` LAPACK only resolves them
    to ``eps * alpha_1``; passing the inverses (accumulated as products
    of letter inverses) gives ``alpha_d = 1 / |M^-1|`` to full relative
    precision, and for ``d == 3`` then ``alpha_2 = |det| / (alpha_1 alpha_3)``.
    """
    mats = np.asarray(mats, dtype=float)
    d = mats.shape[-1]
    if d == 1:
        return np.abs(mats[:, :, 0])
    if d == 2:
        s1, s2 = _sv2(mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1], dets)
        return np.stack([s1, s2], axis=1)
    sv = np.linalg.svd(mats, compute_uv=False)
    if invs is not None:
        sv[:, -1] = 1.0 / np.linalg.svd(invs, compute_uv=False)[:, 0]
        if d == 3:
            det = np.abs(dets) if dets is not None else np.abs(np.linalg.det(mats))
            sv[:, 1] = det / (sv[:, 0] * sv[:, 2])
            sv[:, 1] = np.clip(sv[:, 1], sv[:, 2], sv[:, 0])
    return sv


def longest_common_prefix(x: Sequence[int], y: Sequence[int]) -> Word:
    n = 0
    for a, b in zip(x, y):
        if a != b:
            break
        n += 1
    return tuple(x[:n])


def shift_word(x: Sequence[int], n: int) -> Word:
    if not 0 <= n <= len(x):
        raise DomainError(f"shift {n} out of range for word of length {len(x)}")
    return tuple(x[n:])


def all_words(m: int, n: int, prefix: Word = ()) -> Iterator[Word]:
    """Words of length ``n`` extending ``prefix`` in lexicographic order."""
    for tail in itertools.product(range(m), repeat=n - len(prefix)):
        yield prefix + tail


def words_array(m: int, n: int) -> np.ndarray:
    """All words of length ``n`` as an ``(m**n, n)`` array, lexicographic."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((m,) * n).reshape(n, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)


def word_code(words: np.ndarray, m: int) -> np.ndarray:
    """Base-``m`` integer code of each row (lexicographic rank)."""
    code = np.zeros(words.shape[0], dtype=np.int64)
    for k in range(words.shape[1]):
        code = code * m + words[:, k]
    return code


@dataclass
class WordBatch:
    """A batch of same-length words together with their matrix products.

    ``dets`` holds the product of letter determinants, which is more
    accurate than the determinant of the accumulated product.  ``state``
    carries per-word arrays maintained by a walk's ``extend`` hook.
    """

    level: int
    words: np.ndarray
    prods: np.ndarray
    dets: np.ndarray
    state: dict = field(default_factory=dict)
    invs: np.ndarray | None = None

    def __len__(self):
        return self.words.shape[0]

    def take(self, idx) -> "WordBatch":
        return WordBatch(self.level, self.words[idx], self.prods[idx], self.dets[idx],
                         {k: v[idx] for k, v in self.state.items()},
                         None if self.invs is None else self.invs[idx])

    def singular_values(self) -> np.ndarray:
        return batch_singular_values(self.prods, np.abs(self.dets), self.invs)


def _root_invs(t: MapTuple, words=None):
    # inverse products are only needed where LAPACK loses the small values
    if t.d < 3:
        return None
    if words is None:
        return np.eye(t.d)[None]
    out = []
    for w in words:
        Q = np.eye(t.d)
        for i in w:
            Q = t.inverses[i] @ Q
        out.append(Q)
    return np.array(out)


def root_batch(t: MapTuple, state0: dict | None = None) -> WordBatch:
    state = {k: np.asarray(v)[None] for k, v in (state0 or {}).items()}
    return WordBatch(0, np.zeros((1, 0), dtype=np.int64), np.eye(t.d)[None],
                     np.ones(1), state, _root_invs(t))


def _outer_products(P: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``P[k] @ M[l]`` for all pairs, flattened in ``(k, l)`` order."""
    K, d = P.shape[0], P.shape[1]
    m = M.shape[0]
    if d > 3:
        return np.matmul(P[:, None], M[None]).reshape(K * m, d, d)
    # explicit entries beat batched matmul for tiny matrices
    out = np.empty((K, m, d, d))
    for i in range(d):
        for j in range(d):
            acc = P[:, None, i, 0] * M[None, :, 0, j]
            for k in range(1, d):
                acc = acc + P[:, None, i, k] * M[None, :, k, j]
            out[:, :, i, j] = acc
    return out.reshape(K * m, d, d)


def expand_batch(t: MapTuple, batch: WordBatch,
                 extend: Callable | None = None) -> WordBatch:
    """Children ``I j`` of every word ``I`` in ``batch`` (lexicographic)."""
    K, m = len(batch), t.m
    parent = np.repeat(np.arange(K), m)
    letters = np.tile(np.arange(m), K)
    words = np.concatenate([batch.words[parent], letters[:, None]], axis=1)
    prods = _outer_products(batch.prods, t.maps)
    dets = batch.dets[parent] * t.dets[letters]
    invs = None
    if batch.invs is not None:
        # (T_I T_j)^-1 = T_j^-1 T_I^-1
        invs = np.einsum("lir,krj->klij", t.inverses, batch.invs).reshape(-1, t.d, t.d)
    state = extend(batch, parent, letters) if extend is not None else {}
    return WordBatch(batch.level + 1, words, prods, dets, state, invs)


def walk_words(t: MapTuple, depth: int, visit: Callable[[WordBatch], object],
               *, extend: Callable | None = None,
               prune: Callable[[WordBatch], np.ndarray] | None = None,
               state0: dict | None = None, chunk: int = DEFAULT_CHUNK,
               start: WordBatch | None = None) -> None:
    """Depth-first walk over ``Sigma_0 .. Sigma_depth`` in batches.

    Products are carried down the tree so every node costs one small
    matrix multiply.  ``visit`` is called once per batch at every level
    (including the root); returning ``True`` stops the walk.  ``prune``
    returns a keep-mask applied to each freshly expanded batch.  The
    frontier is split so no expanded batch exceeds ``chunk`` words,
    which bounds memory at ``O(depth * chunk)``.  Passing ``start``
    walks only the subtree below that batch, so disjoint prefixes can be
    handed to separate workers.
    """
    root = start if start is not None else root_batch(t, state0)

    def rec(batch: WordBatch) -> bool:
        if visit(batch):
            return True
        if batch.level >= depth:
            return False
        step = max(1, chunk // t.m)
        for lo in range(0, len(batch), step):
            part = batch.take(slice(lo, lo + step))
            child = expand_batch(t, part, extend)
            if prune is not None:
                keep = prune(child)
                if not np.all(keep):
                    child = child.take(np.flatnonzero(keep))
            if len(child) and rec(child):
                return True
        return False

    rec(root)


def level_batches(t: MapTuple, n: int, chunk: int = DEFAULT_CHUNK) -> Iterator[WordBatch]:
    """Yield batches covering ``Sigma_n`` in lexicographic order."""
    out: list[WordBatch] = []

    def visit(b):
        if b.level == n:
            out.append(b)

    # a generator over a recursive walk would need threads; collect per
    # top-level prefix instead so memory stays bounded
    if t.m ** n <= chunk:
        walk_words(t, n, visit, chunk=chunk)
        yield from out
        return
    top = max(1, n - int(np.floor(np.log(chunk) / np.log(t.m))))
    for prefix in all_words(t.m, top):
        out.clear()
        start = WordBatch(top, np.array([prefix], dtype=np.int64),
                          word_product(t, prefix)[None],
                          np.array([word_det(t, prefix)]), {}, _root_invs(t, [prefix]))
        walk_words(t, n, visit, chunk=chunk, start=start)
        yield from out
