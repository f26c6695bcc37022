"""Dense truncated tensor algebra over R^d.

An element of the algebra truncated at degree ``depth`` is a graded stack
of coefficient blocks: block ``k`` holds the ``d**k`` coefficients of all
words ``(i_1, ..., i_k)`` with letters in ``{1..d}``, laid out in
lexicographic (row-major) order, so the flat index of a word is
``sum((i_j - 1) * d**(k - j))``.  Block 0 is the scalar term.

Products silently discard every grade above ``depth``; on that nilpotent
quotient the exponential and logarithm series terminate exactly, which is
what makes signatures of piecewise-linear paths computable in closed form.

All operations are pure and elements are immutable after construction, so
values can be shared freely across threads.
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ScalarTermError, ShapeMismatchError

__all__ = [
    "TensorElement",
    "unit",
    "zero",
    "from_increment",
    "tensor_mul",
    "tensor_exp",
    "tensor_log",
    "word_index",
    "mul_vjp_left",
    "mul_vjp_right",
    "exp_vjp",
    "log_vjp",
]


def word_index(word: Sequence[int], width: int) -> int:
    """Flat index of a word (letters in 1..width) inside its level block."""
    idx = 0
    for letter in word:
        if not 1 <= letter <= width:
            raise ValueError(f"letter {letter} outside alphabet 1..{width}")
        idx = idx * width + (letter - 1)
    return idx


class TensorElement:
    """Immutable element of the truncated tensor algebra T^M(R^d)."""

    __slots__ = ("width", "depth", "levels")

    def __init__(self, width: int, depth: int, levels: Iterable[np.ndarray]):
        if width < 1 or depth < 1:
            raise ValueError("width and depth must be positive")
        lv = []
        for k, block in enumerate(levels):
            # copy so freezing never mutates caller-owned buffers
            arr = np.array(block, dtype=np.float64, copy=True)
            if arr.shape != (width**k,):
                raise ShapeMismatchError(
                    f"level {k} has {arr.size} entries, expected {width ** k}"
                )
            arr.flags.writeable = False
            lv.append(arr)
        if len(lv) != depth + 1:
            raise ShapeMismatchError(
                f"got {len(lv)} levels, expected depth+1 = {depth + 1}"
            )
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "levels", tuple(lv))

    def __setattr__(self, name, value):
        raise AttributeError("TensorElement is immutable")

    @classmethod
    def _wrap(cls, width: int, depth: int, levels: list[np.ndarray]) -> "TensorElement":
        # internal fast constructor: trusts shapes, still freezes buffers
        self = object.__new__(cls)
        for arr in levels:
            arr.flags.writeable = False
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "levels", tuple(levels))
        return self

    @property
    def scalar(self) -> float:
        return float(self.levels[0][0])

    def coefficient(self, word: Sequence[int]) -> float:
        """Coefficient of a word, e.g. ``t.coefficient((1, 2))``."""
        k = len(word)
        if k > self.depth:
            raise ValueError(f"word length {k} exceeds depth {self.depth}")
        return float(self.levels[k][word_index(word, self.width)])

    def __add__(self, other: "TensorElement") -> "TensorElement":
        _check_compatible(self, other)
        return TensorElement._wrap(
            self.width,
            self.depth,
            [a + b for a, b in zip(self.levels, other.levels)],
        )

    def __sub__(self, other: "TensorElement") -> "TensorElement":
        _check_compatible(self, other)
        return TensorElement._wrap(
            self.width,
            self.depth,
            [a - b for a, b in zip(self.levels, other.levels)],
        )

    def __mul__(self, c: float) -> "TensorElement":
        c = float(c)
        return TensorElement._wrap(self.width, self.depth, [c * a for a in self.levels])

    __rmul__ = __mul__

    def __neg__(self) -> "TensorElement":
        return self * -1.0

    def flatten(self, include_scalar: bool = False) -> np.ndarray:
        """Concatenate levels into one vector (levels 1..M by default)."""
        start = 0 if include_scalar else 1
        return np.concatenate(self.levels[start:])

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(a))) for a in self.levels)

    def to_json(self) -> str:
        """Debug serialization: {"width": d, "depth": M, "levels": [[...], ...]}."""
        return json.dumps(
            {
                "width": self.width,
                "depth": self.depth,
                "levels": [a.tolist() for a in self.levels],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TensorElement":
        obj = json.loads(text)
        return cls(obj["width"], obj["depth"], [np.asarray(a) for a in obj["levels"]])

    def __repr__(self) -> str:
        return f"TensorElement(width={self.width}, depth={self.depth}, scalar={self.scalar})"


def _check_compatible(a: TensorElement, b: TensorElement) -> None:
    if a.width != b.width or a.depth != b.depth:
        raise ShapeMismatchError(
            f"incompatible elements: ({a.width},{a.depth}) vs ({b.width},{b.depth})"
        )


def unit(width: int, depth: int) -> TensorElement:
    """Multiplicative identity: scalar 1, all higher blocks 0."""
    levels = [np.zeros(width**k) for k in range(depth + 1)]
    levels[0][0] = 1.0
    return TensorElement._wrap(width, depth, levels)


def zero(width: int, depth: int) -> TensorElement:
    levels = [np.zeros(width**k) for k in range(depth + 1)]
    return TensorElement._wrap(width, depth, levels)


def from_increment(vec: np.ndarray, depth: int) -> TensorElement:
    """Embed a vector of R^d as a pure level-1 element."""
    vec = np.ascontiguousarray(vec, dtype=np.float64)
    if vec.ndim != 1:
        raise ShapeMismatchError("increment must be a 1-d vector")
    d = vec.size
    levels = [np.zeros(d**k) for k in range(depth + 1)]
    levels[1] = vec.copy()
    return TensorElement._wrap(d, depth, levels)


def _raw_mul(a_levels, b_levels, width: int, depth: int) -> list[np.ndarray]:
    out = []
    for k in range(depth + 1):
        acc = np.zeros(width**k)
        for i in range(k + 1):
            ai = a_levels[i]
            bj = b_levels[k - i]
            if i == 0:
                acc += ai[0] * bj
            elif i == k:
                acc += ai * bj[0]
            else:
                acc += np.multiply.outer(ai, bj).ravel()
        out.append(acc)
    return out


def tensor_mul(a: TensorElement, b: TensorElement) -> TensorElement:
    """Tensor product truncated at the common depth.

    Level k of the result is sum over i+j=k of (level i of a) tensor
    (level j of b); the operation is bilinear and associative on the
    truncated algebra.
    """
    _check_compatible(a, b)
    return TensorElement._wrap(
        a.width, a.depth, _raw_mul(a.levels, b.levels, a.width, a.depth)
    )


def tensor_exp(a: TensorElement) -> TensorElement:
    """Exponential of an element with zero scalar term.

    Computed by the Horner-style recurrence
    ``exp(a) = 1 + a (1 + a/2 (1 + a/3 (...)))`` which is exact here
    because ``a`` is nilpotent of order depth+1.
    """
    if a.scalar != 0.0:
        raise ScalarTermError(f"exp requires scalar term 0, got {a.scalar}")
    return TensorElement._wrap(a.width, a.depth, _exp_chain(a)[0])


def _exp_chain(a: TensorElement):
    """Run the exp Horner recurrence, returning (result levels, tape).

    The tape holds the intermediate stages s_{n+1} needed by the reverse
    pass: stage index n runs M..1 with s_n = 1 + (a/n) (x) s_{n+1}.
    """
    d, M = a.width, a.depth
    one = unit(d, M)
    tape = []
    s = one.levels
    for n in range(M, 0, -1):
        tape.append(s)
        prod = _raw_mul(a.levels, s, d, M)
        s = [u + p / n for u, p in zip(one.levels, prod)]
    tape.reverse()  # tape[n-1] = s_{n+1}
    return s, tape


def tensor_log(g: TensorElement) -> TensorElement:
    """Logarithm of an element with scalar term 1.

    Finite alternating series on t = g - 1, exact on the truncated
    algebra; inverse of :func:`tensor_exp`.
    """
    if g.scalar != 1.0:
        raise ScalarTermError(f"log requires scalar term 1, got {g.scalar}")
    return TensorElement._wrap(g.width, g.depth, _log_series(g)[0])


def _log_series(g: TensorElement):
    """Alternating log series; returns (levels, power tape [t, t^2, ...])."""
    d, M = g.width, g.depth
    t = [lvl.copy() for lvl in g.levels]
    t[0] = np.zeros(1)
    powers = [t]
    for _ in range(2, M + 1):
        powers.append(_raw_mul(powers[-1], t, d, M))
    out = [np.zeros(d**k) for k in range(M + 1)]
    for n, p in enumerate(powers, start=1):
        c = (-1.0) ** (n - 1) / n
        for k in range(M + 1):
            out[k] += c * p[k]
    return out, powers


# ---------------------------------------------------------------------------
# Reverse-mode adjoints.  Every operation above is polynomial in its inputs,
# so each adjoint is itself a closed-form tensor expression built from the
# two product contractions below.
# ---------------------------------------------------------------------------


def _raw_mul_vjp_left(cbar_levels, b_levels, width: int, depth: int):
    """Adjoint of c = a (x) b with respect to a, as raw level arrays."""
    abar = []
    for i in range(depth + 1):
        acc = np.zeros(width**i)
        for j in range(depth + 1 - i):
            cb = cbar_levels[i + j]
            bj = b_levels[j]
            if j == 0:
                acc += cb * bj[0]
            elif i == 0:
                acc += cb @ bj
            else:
                acc += cb.reshape(width**i, width**j) @ bj
        abar.append(acc)
    return abar


def _raw_mul_vjp_right(cbar_levels, a_levels, width: int, depth: int):
    """Adjoint of c = a (x) b with respect to b."""
    bbar = []
    for j in range(depth + 1):
        acc = np.zeros(width**j)
        for i in range(depth + 1 - j):
            cb = cbar_levels[i + j]
            ai = a_levels[i]
            if i == 0:
                acc += ai[0] * cb
            elif j == 0:
                acc += ai @ cb
            else:
                acc += ai @ cb.reshape(width**i, width**j)
        bbar.append(acc)
    return bbar


def mul_vjp_left(cbar: TensorElement, b: TensorElement) -> TensorElement:
    """Gradient of <cbar, a (x) b> with respect to a."""
    _check_compatible(cbar, b)
    return TensorElement._wrap(
        cbar.width, cbar.depth, _raw_mul_vjp_left(cbar.levels, b.levels, cbar.width, cbar.depth)
    )


def mul_vjp_right(cbar: TensorElement, a: TensorElement) -> TensorElement:
    """Gradient of <cbar, a (x) b> with respect to b."""
    _check_compatible(cbar, a)
    return TensorElement._wrap(
        cbar.width, cbar.depth, _raw_mul_vjp_right(cbar.levels, a.levels, cbar.width, cbar.depth)
    )


def exp_vjp(a: TensorElement, ebar: TensorElement) -> TensorElement:
    """Adjoint of tensor_exp at a, contracted against upstream ebar."""
    d, M = a.width, a.depth
    _, tape = _exp_chain(a)
    sbar = list(ebar.levels)
    abar = [np.zeros(d**k) for k in range(M + 1)]
    for n in range(1, M + 1):
        s_next = tape[n - 1]
        left = _raw_mul_vjp_left(sbar, s_next, d, M)
        for k in range(M + 1):
            abar[k] += left[k] / n
        sbar = _raw_mul_vjp_right(sbar, a.levels, d, M)
        sbar = [lvl / n for lvl in sbar]
    return TensorElement._wrap(d, M, abar)


def log_vjp(g: TensorElement, lbar: TensorElement) -> TensorElement:
    """Adjoint of tensor_log at g, contracted against upstream lbar.

    The scalar slot of the result is structurally zero: g ranges over
    elements with scalar term fixed at 1.
    """
    d, M = g.width, g.depth
    _, powers = _log_series(g)
    t = powers[0]
    pbar = [None] * (M + 1)  # pbar[n] = adjoint of t^n, 1-based
    for n in range(1, M + 1):
        c = (-1.0) ** (n - 1) / n
        pbar[n] = [c * lvl for lvl in lbar.levels]
    tbar = [np.zeros(d**k) for k in range(M + 1)]
    for n in range(M, 1, -1):
        prev = _raw_mul_vjp_left(pbar[n], t, d, M)
        for k in range(M + 1):
            pbar[n - 1][k] += prev[k]
        right = _raw_mul_vjp_right(pbar[n], powers[n - 2], d, M)
        for k in range(M + 1):
            tbar[k] += right[k]
    for k in range(M + 1):
        tbar[k] += pbar[1][k]
    tbar[0] = np.zeros(1)
    return TensorElement._wrap(d, M, tbar)
