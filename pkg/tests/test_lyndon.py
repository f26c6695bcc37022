import itertools

import numpy as np
import pytest

from logsigrnn.exceptions import NotLieElementError, ShapeMismatchError
from logsigrnn.lyndon import (
    LieCoords,
    lie_expand,
    lie_project,
    lie_project_vjp,
    logsig_dim,
    lyndon_words,
    necklace_count,
)
from logsigrnn.tensoralg import TensorElement, from_increment, tensor_exp, tensor_log, tensor_mul


def brute_lyndon(d, max_len):
    """Oracle: a word is Lyndon iff strictly smaller than all proper rotations."""
    out = []
    for n in range(1, max_len + 1):
        for w in itertools.product(range(1, d + 1), repeat=n):
            if all(w < w[i:] + w[:i] for i in range(1, n)):
                out.append(w)
    out.sort(key=lambda w: (len(w), w))
    return out


class TestWords:
    def test_d2_m2(self):
        assert lyndon_words(2, 2).words == ((1,), (2,), (1, 2))

    def test_d1_any_depth(self):
        assert lyndon_words(1, 5).words == ((1,),)

    def test_d2_m3_against_bruteforce(self):
        assert list(lyndon_words(2, 3).words) == brute_lyndon(2, 3)
        assert len(lyndon_words(2, 3).words) == 5

    @pytest.mark.parametrize("d,M", [(2, 5), (3, 4), (5, 3)])
    def test_larger_against_bruteforce(self, d, M):
        assert list(lyndon_words(d, M).words) == brute_lyndon(d, M)

    def test_triangularity_integer(self):
        # each bracketed word contains itself with coefficient exactly 1 and
        # otherwise only lexicographically greater words of the same length
        for d, M in [(2, 6), (3, 4)]:
            basis = lyndon_words(d, M)
            for i, w in enumerate(basis.words):
                idx, coeff = basis.expansion(i)
                self_pos = basis._self_index[i]
                row = dict(zip(idx.tolist(), coeff.tolist()))
                assert row[self_pos] == 1.0
                for j, c in row.items():
                    assert c == int(c)  # integer arithmetic
                    if j != self_pos:
                        assert j > self_pos  # strictly greater in lex order


class TestDimension:
    @pytest.mark.parametrize("d", range(1, 6))
    @pytest.mark.parametrize("M", range(1, 7))
    def test_matches_word_count(self, d, M):
        assert logsig_dim(d, M) == len(lyndon_words(d, M).words)

    def test_reported_feature_dims(self):
        assert logsig_dim(2, 4) == 8
        assert logsig_dim(2, 2) == 3

    def test_one_dim(self):
        for M in range(1, 7):
            assert logsig_dim(1, M) == 1

    def test_necklace_values(self):
        # classic counts over a binary alphabet
        assert [necklace_count(2, n) for n in range(1, 7)] == [2, 1, 2, 3, 6, 9]


class TestProjectExpand:
    def test_level_one_only(self):
        t = from_increment(np.array([0.3, -1.2]), 3)
        c = lie_project(t)
        expect = np.zeros(logsig_dim(2, 3))
        expect[:2] = [0.3, -1.2]
        assert np.allclose(c.coords, expect, atol=1e-15)

    def test_area_coordinate(self):
        # log(exp(e1) exp(e2)) has Lyndon coordinates [1, 1, 1/2]
        e1 = from_increment(np.array([1.0, 0.0]), 2)
        e2 = from_increment(np.array([0.0, 1.0]), 2)
        g = tensor_mul(tensor_exp(e1), tensor_exp(e2))
        c = lie_project(tensor_log(g))
        assert np.allclose(c.coords, [1.0, 1.0, 0.5], atol=1e-14)

    def test_expand_zero(self):
        c = LieCoords(2, 3, np.zeros(logsig_dim(2, 3)))
        t = lie_expand(c)
        assert all(np.all(lvl == 0) for lvl in t.levels)

    def test_expand_single_bracket(self):
        c = LieCoords(2, 2, np.array([0.0, 0.0, 1.0]))
        t = lie_expand(c)
        assert t.coefficient((1, 2)) == 1.0
        assert t.coefficient((2, 1)) == -1.0

    @pytest.mark.parametrize("d,M,seed", [(2, 3, 0), (3, 4, 1), (2, 5, 2)])
    def test_roundtrip_random_lie_combination(self, d, M, seed):
        rng = np.random.default_rng(seed)
        c = LieCoords(d, M, rng.normal(size=logsig_dim(d, M)))
        back = lie_project(lie_expand(c))
        assert np.max(np.abs(back.coords - c.coords)) < 1e-12

    def test_log_signature_is_lie(self):
        # log of a random group-like element always passes the residual gate
        rng = np.random.default_rng(3)
        for _ in range(10):
            incs = rng.normal(size=(6, 3))
            g = tensor_exp(from_increment(incs[0], 4))
            for inc in incs[1:]:
                g = tensor_mul(g, tensor_exp(from_increment(inc, 4)))
            lie_project(tensor_log(g))  # must not raise

    def test_non_lie_rejected(self):
        t = TensorElement(2, 2, [np.zeros(1), np.zeros(2), np.array([0.0, 1.0, 1.0, 0.0])])
        with pytest.raises(NotLieElementError):
            lie_project(t)  # symmetric level-2 part is not a Lie element

    def test_nonzero_scalar_rejected(self):
        with pytest.raises(NotLieElementError):
            lie_project(TensorElement(2, 1, [np.ones(1), np.zeros(2)]))

    def test_coords_length_checked(self):
        with pytest.raises(ShapeMismatchError):
            LieCoords(2, 3, np.zeros(4))


class TestProjectionVjp:
    @pytest.mark.parametrize("d,M,seed", [(2, 3, 0), (3, 3, 1)])
    def test_adjoint_identity(self, d, M, seed):
        # <cbar, P t> == <P^T cbar, t> for arbitrary t (gate disabled), since
        # the projection is linear on the whole level space
        rng = np.random.default_rng(seed)
        basis = lyndon_words(d, M)
        cbar = rng.normal(size=basis.dim)
        t = TensorElement(d, M, [np.zeros(1)] + [rng.normal(size=d**k) for k in range(1, M + 1)])
        lhs = float(cbar @ lie_project(t, tolerance=np.inf).coords)
        adj = lie_project_vjp(d, M, cbar)
        rhs = sum(float(a @ b) for a, b in zip(adj.levels, t.levels))
        assert lhs == pytest.approx(rhs, rel=1e-12)
