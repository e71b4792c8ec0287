import numpy as np
import pytest

from latticemf.errors import GeometryError, ResourceLimitError
from latticemf.fock import (
    SPIN_HALF,
    SPINLESS,
    ModeSpace,
    annihilator_local,
    creator_local,
    is_even,
    number_local,
    parity_map,
    translate_operator,
)
from latticemf.lattice import Box
from latticemf.draws import random_even_localop, random_local_observable


def all_annihilators(space):
    return [
        space.annihilator(site, s)
        for site in space.box.sites
        for s in space.spins
    ]


def test_single_mode_annihilator_matrix():
    space = ModeSpace(Box(1, 0), SPINLESS)
    a = space.annihilator((0,), "s").mat.toarray()
    assert np.array_equal(a, np.array([[0, 1], [0, 0]], dtype=complex))


def test_car_relations_small():
    space = ModeSpace(Box(1, 1), SPIN_HALF)  # 6 modes
    ops = all_annihilators(space)
    eye = np.eye(space.dim)
    worst = 0.0
    for i, ai in enumerate(ops):
        for j, aj in enumerate(ops):
            anti = (ai @ aj.dagger() + aj.dagger() @ ai).mat.toarray()
            target = eye if i == j else 0.0 * eye
            worst = max(worst, np.abs(anti - target).max())
            worst = max(worst, np.abs((ai @ aj + aj @ ai).mat.toarray()).max())
    assert worst <= 1e-12


def test_nilpotency():
    space = ModeSpace(Box(1, 1), SPINLESS)
    for site in space.box.sites:
        a = space.annihilator(site, "s")
        assert (a @ a).mat.nnz == 0


def test_parity_examples():
    space = ModeSpace(Box(1, 0), SPIN_HALF)
    one = space.identity()
    assert np.allclose(parity_map(one).mat.toarray(), one.mat.toarray())
    a = space.annihilator((0,), "up")
    assert np.allclose(parity_map(a).mat.toarray(), -a.mat.toarray())
    n = space.number_op((0,), "up")
    assert np.allclose(parity_map(n).mat.toarray(), n.mat.toarray())
    pair = space.creator((0,), "up") @ space.creator((0,), "down")
    assert is_even(pair) and is_even(n) and not is_even(a)
    assert a.parity == "odd" and n.parity == "even"


def test_parity_is_involutive_automorphism(rng):
    space = ModeSpace(Box(1, 1), SPINLESS)
    for _ in range(5):
        a = space.embed(random_local_observable(rng, space.box, SPINLESS))
        b = space.embed(random_local_observable(rng, space.box, SPINLESS))
        assert np.allclose(
            parity_map(parity_map(a)).mat.toarray(), a.mat.toarray(), atol=1e-10
        )
        assert np.allclose(
            parity_map(a @ b).mat.toarray(),
            (parity_map(a) @ parity_map(b)).mat.toarray(),
            atol=1e-10,
        )
        assert np.allclose(
            parity_map(a.dagger()).mat.toarray(),
            parity_map(a).dagger().mat.toarray(),
            atol=1e-10,
        )


def test_translate_examples():
    space = ModeSpace(Box(1, 1), SPINLESS)
    n0 = space.number_op((0,), "s")
    assert np.allclose(
        translate_operator(n0, (0,)).mat.toarray(), n0.mat.toarray()
    )
    n1 = translate_operator(n0, (1,))
    assert np.allclose(n1.mat.toarray(), space.number_op((1,), "s").mat.toarray())


def test_translate_composition_and_isometry(rng):
    space = ModeSpace(Box(1, 2), SPINLESS)
    a = space.embed(random_even_localop(rng, ((0,),), SPINLESS))
    once = translate_operator(translate_operator(a, (1,)), (1,))
    twice = translate_operator(a, (2,))
    assert np.abs((once.mat - twice.mat).toarray()).max() <= 1e-10
    assert abs(once.norm() - a.norm()) <= 1e-10


def test_translate_out_of_box():
    space = ModeSpace(Box(1, 1), SPINLESS)
    n0 = space.number_op((1,), "s")
    with pytest.raises(GeometryError):
        translate_operator(n0, (1,))


def test_disjoint_even_commute(rng):
    space = ModeSpace(Box(1, 2), SPINLESS)
    a = random_even_localop(rng, ((-2,), (0,)), SPINLESS)
    b = random_even_localop(rng, ((-1,), (2,)), SPINLESS)
    ea, eb = space.embed(a), space.embed(b)
    comm = (ea @ eb - eb @ ea).mat
    assert (abs(comm).max() if comm.nnz else 0.0) <= 1e-10


def test_embedding_is_homomorphism(rng):
    space = ModeSpace(Box(1, 2), SPINLESS)
    x = random_even_localop(rng, ((-2,), (0,)), SPINLESS)
    y = random_even_localop(rng, ((0,), (1,)), SPINLESS)
    assert np.allclose(
        space.embed(x @ y).mat.toarray(),
        (space.embed(x) @ space.embed(y)).mat.toarray(),
        atol=1e-12,
    )
    z = annihilator_local((-1,), SPINLESS, "s")
    assert np.allclose(
        space.embed((z @ y).dagger()).mat.toarray(),
        (space.embed(z) @ space.embed(y)).dagger().mat.toarray(),
        atol=1e-12,
    )


def test_gap_embedding_strings():
    space = ModeSpace(Box(1, 1), SPINLESS)
    hop = creator_local((-1,), SPINLESS, "s") @ annihilator_local((1,), SPINLESS, "s")
    direct = space.creator((-1,), "s") @ space.annihilator((1,), "s")
    assert np.abs((space.embed(hop).mat - direct.mat).toarray()).max() == 0.0


def test_support_locality(rng):
    space = ModeSpace(Box(1, 2), SPINLESS)
    a = space.embed(random_even_localop(rng, ((-2,), (0,)), SPINLESS))
    for outside in ((-1,), (1,), (2,)):
        n = space.number_op(outside, "s")
        comm = (a @ n - n @ a).mat
        assert (abs(comm).max() if comm.nnz else 0.0) <= 1e-12


def test_mode_caps():
    with pytest.raises(ResourceLimitError):
        ModeSpace(Box(1, 10), SPIN_HALF)  # 42 modes
    space = ModeSpace(Box(1, 7), SPINLESS)  # 15 modes: over dense cap
    with pytest.raises(ResourceLimitError):
        space.require_dense()


def test_localop_norm_matches_embedded(rng):
    space = ModeSpace(Box(1, 1), SPINLESS)
    op = random_even_localop(rng, ((-1,), (1,)), SPINLESS)
    emb = space.embed(op)
    dense = np.linalg.norm(emb.mat.toarray(), 2)
    assert abs(emb.norm() - dense) < 1e-10

def test_number_local_is_projector():
    n = number_local((0,), SPIN_HALF, "down")
    assert np.allclose((n @ n).matrix, n.matrix)
    assert n.is_even() and n.is_hermitian()
