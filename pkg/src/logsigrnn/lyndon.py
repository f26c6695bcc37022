"""Lyndon words, the log-signature dimension formula, and the change of
basis between Lie elements in tensor coordinates and compact Lyndon
coordinates.

A Lyndon word is strictly smaller than every proper rotation of itself.
The bracketed Lyndon words (standard factorization) form a basis of the
free Lie algebra, and the expansion of each bracketed word ``w`` in the
word basis is triangular: it contains ``w`` itself with coefficient 1 and
otherwise only lexicographically greater words of the same length.  That
triangularity is what lets :func:`lie_project` run as a plain
back-substitution, grade by grade.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NotLieElementError, ShapeMismatchError
from .tensoralg import TensorElement, word_index

__all__ = [
    "LyndonBasis",
    "LieCoords",
    "lyndon_words",
    "logsig_dim",
    "necklace_count",
    "lie_project",
    "lie_expand",
    "lie_project_vjp",
]

PROJECTION_TOLERANCE = 1e-8


def _mobius(n: int) -> int:
    if n == 1:
        return 1
    result = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    if n > 1:
        result = -result
    return result


def necklace_count(width: int, n: int) -> int:
    """Number of Lyndon words of length n over an alphabet of d letters:
    (1/n) sum_{k | n} mu(k) d^(n/k)."""
    total = sum(_mobius(k) * width ** (n // k) for k in range(1, n + 1) if n % k == 0)
    return total // n


def logsig_dim(width: int, depth: int) -> int:
    """Dimension of the truncated log-signature, summed over grades 1..depth."""
    if width < 1 or depth < 1:
        raise ValueError("width and depth must be positive")
    return sum(necklace_count(width, n) for n in range(1, depth + 1))


def _duval(width: int, max_len: int):
    """Duval's algorithm: all Lyndon words of length <= max_len over {1..d},
    in lexicographic order."""
    w = [0]
    while w:
        w[-1] += 1
        yield tuple(w)
        m = len(w)
        while len(w) < max_len:
            w.append(w[-m])
        while w and w[-1] == width:
            w.pop()


def _is_lyndon(word: tuple[int, ...]) -> bool:
    return all(word < word[i:] + word[:i] for i in range(1, len(word)))


def _standard_factorization(word: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split w = u v with v the longest proper Lyndon suffix."""
    for i in range(1, len(word)):
        if _is_lyndon(word[i:]):
            return word[:i], word[i:]
    raise AssertionError(f"no Lyndon suffix found for {word}")  # unreachable for Lyndon w


def _bracket_expansion(word, cache):
    """Expand the standard bracketing of a Lyndon word in the word basis.

    Returns a dict word -> integer coefficient.
    """
    if word in cache:
        return cache[word]
    u, v = _standard_factorization(word)
    eu = _bracket_expansion(u, cache)
    ev = _bracket_expansion(v, cache)
    out: dict[tuple[int, ...], int] = {}
    for wu, cu in eu.items():
        for wv, cv in ev.items():
            key = wu + wv
            out[key] = out.get(key, 0) + cu * cv
            key = wv + wu
            out[key] = out.get(key, 0) - cu * cv
    out = {w: c for w, c in out.items() if c != 0}
    cache[word] = out
    return out


@dataclass(frozen=True)
class LyndonBasis:
    """Graded Lyndon-word basis of the free Lie algebra over {1..width}.

    ``words`` are ordered by length then lexicographically.  For each word
    the bracket expansion is stored sparsely as (flat indices, integer
    coefficients) within its level block.
    """

    width: int
    depth: int
    words: tuple[tuple[int, ...], ...]
    _expansions: tuple[tuple[np.ndarray, np.ndarray], ...] = field(repr=False)
    _self_index: tuple[int, ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.words)

    def grade_slices(self) -> list[slice]:
        """Slice of coordinate positions for each grade 1..depth."""
        out, start = [], 0
        for n in range(1, self.depth + 1):
            cnt = sum(1 for w in self.words if len(w) == n)
            out.append(slice(start, start + cnt))
            start += cnt
        return out

    def expansion(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(flat word indices, coefficients) of basis element i in level len(words[i])."""
        return self._expansions[i]


@functools.lru_cache(maxsize=None)
def lyndon_words(width: int, depth: int) -> LyndonBasis:
    """Construct (and cache) the Lyndon basis for the given width and depth.

    Generation follows Duval's order regraded by length; brackets come from
    the standard factorization w = u v with v the longest proper Lyndon
    suffix, bracket(w) = [bracket(u), bracket(v)].
    """
    if width < 1 or depth < 1:
        raise ValueError("width and depth must be positive")
    by_grade: list[list[tuple[int, ...]]] = [[] for _ in range(depth + 1)]
    for w in _duval(width, depth):
        by_grade[len(w)].append(w)
    words: list[tuple[int, ...]] = []
    for n in range(1, depth + 1):
        words.extend(sorted(by_grade[n]))

    cache: dict = {(letter,): {(letter,): 1} for letter in range(1, width + 1)}
    expansions = []
    self_index = []
    for w in words:
        exp = _bracket_expansion(w, cache)
        idx = np.array([word_index(u, width) for u in exp], dtype=np.int64)
        coeff = np.array([float(c) for c in exp.values()])
        order = np.argsort(idx)
        expansions.append((idx[order], coeff[order]))
        self_index.append(word_index(w, width))
    return LyndonBasis(
        width=width,
        depth=depth,
        words=tuple(words),
        _expansions=tuple(expansions),
        _self_index=tuple(self_index),
    )


@dataclass(frozen=True)
class LieCoords:
    """Coordinates of a Lie element in the Lyndon basis, graded by length."""

    width: int
    depth: int
    coords: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coords, dtype=np.float64, copy=True)
        expected = logsig_dim(self.width, self.depth)
        if arr.shape != (expected,):
            raise ShapeMismatchError(
                f"coords have length {arr.size}, expected {expected} "
                f"for width={self.width} depth={self.depth}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __len__(self) -> int:
        return self.coords.size


def lie_expand(c: LieCoords) -> TensorElement:
    """Linear expansion sum_i c_i * bracket_i as a tensor element."""
    basis = lyndon_words(c.width, c.depth)
    levels = [np.zeros(c.width**k) for k in range(c.depth + 1)]
    for i, w in enumerate(basis.words):
        ci = c.coords[i]
        if ci == 0.0:
            continue
        idx, coeff = basis.expansion(i)
        levels[len(w)][idx] += ci * coeff
    return TensorElement._wrap(c.width, c.depth, levels)


def lie_project(t: TensorElement, tolerance: float = PROJECTION_TOLERANCE) -> LieCoords:
    """Coordinates of a Lie element in the Lyndon basis.

    Runs grade-by-grade back-substitution on the triangular system given by
    the bracket expansions.  The residual left in each level after all
    basis words are peeled off equals ``t - lie_expand(result)`` there; if
    its sup-norm exceeds ``tolerance`` the input was not a Lie element and
    :class:`NotLieElementError` is raised.
    """
    if t.scalar != 0.0:
        raise NotLieElementError(f"Lie elements have scalar term 0, got {t.scalar}")
    basis = lyndon_words(t.width, t.depth)
    coords = np.zeros(basis.dim)
    residual = 0.0
    pos = 0
    for n in range(1, t.depth + 1):
        r = t.levels[n].copy()
        while pos < basis.dim and len(basis.words[pos]) == n:
            c = r[basis._self_index[pos]]
            coords[pos] = c
            if c != 0.0:
                idx, coeff = basis.expansion(pos)
                r[idx] -= c * coeff
            pos += 1
        if r.size:
            residual = max(residual, float(np.max(np.abs(r))))
    if residual > tolerance:
        raise NotLieElementError(
            f"projection residual {residual:.3e} exceeds {tolerance:.1e}; "
            "input is not a Lie element"
        )
    return LieCoords(t.width, t.depth, coords)


def lie_project_vjp(width: int, depth: int, cbar: np.ndarray) -> TensorElement:
    """Adjoint of :func:`lie_project` (a fixed linear map) at upstream cbar.

    Reverses the back-substitution: within each grade the basis words are
    visited in decreasing order, accumulating into the residual adjoint.
    """
    basis = lyndon_words(width, depth)
    cbar = np.asarray(cbar, dtype=np.float64)
    if cbar.shape != (basis.dim,):
        raise ShapeMismatchError(f"upstream has shape {cbar.shape}, expected ({basis.dim},)")
    levels = [np.zeros(width**k) for k in range(depth + 1)]
    for sl, n in zip(basis.grade_slices(), range(1, depth + 1)):
        rbar = levels[n]
        for pos in range(sl.stop - 1, sl.start - 1, -1):
            idx, coeff = basis.expansion(pos)
            g = cbar[pos] - float(coeff @ rbar[idx])
            rbar[basis._self_index[pos]] += g
    return TensorElement._wrap(width, depth, levels)
