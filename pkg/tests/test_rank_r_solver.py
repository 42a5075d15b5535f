"""Tests for the integer-grid solver: closed-form low stages, the pairing
triangularity, pinning of flow/scale parameters, and the independent
verification of the defining recursion."""

import random

import pytest

from icb.coeffring import ParamSet, rational
from icb.errors import UsageError
from icb.rank_r_solver import (
    RankRInput,
    beta_chain,
    defining_residuals,
    lambda_from_input,
    solution_from_json_dict,
    solve_rank_r,
    verify_defining_relation,
)
from icb.virasoro import ModuleVector, partitions_of


def make_input(r, order):
    """Fully symbolic input: lam0..lam_r (top entry invertible), beta for the
    top flow parameter, Delta, rho."""
    ring = ParamSet()
    for i in range(r + 1):
        ring.add_symbol("lam%d" % i, invertible=(i == r))
    ring.add_symbol("beta_top")
    ring.add_symbol("Delta")
    ring.add_symbol("rho")
    lam = [ring.gen("lam%d" % i) for i in range(r + 1)]
    return RankRInput(
        ring,
        r,
        lam,
        ring.gen("beta_top"),
        ring.gen("Delta"),
        ring.gen("rho"),
        order,
    )


# -- eigenvalue construction ---------------------------------------------------


def test_lambda_construction_rank1():
    inp = make_input(1, 0)
    ring = inp.ring
    Lam, c = lambda_from_input(inp)
    lam0, lam1 = inp.lam
    beta = ring.gen("beta_top")
    rho = ring.gen("rho")
    # Lambda_1 = lam0 lam1 + beta - 2 rho lam1 ; Lambda_2 = lam1^2 / 2
    assert Lam[0] == lam0 * lam1 + beta - (rho * lam1).scale(2)
    assert Lam[1] == (lam1 * lam1).scale(rational(1, 2))
    assert c == ring.const(1) - (rho * rho).scale(12)


def test_lambda_construction_rank2_sign():
    inp = make_input(2, 0)
    ring = inp.ring
    Lam, _ = lambda_from_input(inp)
    lam0, lam1, lam2 = inp.lam
    beta = ring.gen("beta_top")
    rho = ring.gen("rho")
    # at n = r = 2 the flow correction enters with sign (-1)^(r+1) = -1
    expected = lam0 * lam2 + (lam1 * lam1).scale(rational(1, 2))
    expected = expected - beta.scale(2) - (rho * lam2).scale(3)
    assert Lam[0] == expected
    assert Lam[1] == lam1 * lam2
    assert Lam[2] == (lam2 * lam2).scale(rational(1, 2))


def test_input_validation():
    ring = ParamSet()
    ring.add_symbol("x")
    with pytest.raises(UsageError):
        RankRInput(ring, 0, [ring.one()], 0, 0, 0, 1)
    with pytest.raises(UsageError):
        # top lambda entry not a monomial
        RankRInput(ring, 1, [ring.one(), ring.gen("x") + 1], 0, 0, 0, 1)
    with pytest.raises(UsageError):
        RankRInput(ring, 1, [ring.one()], 0, 0, 0, 1)  # wrong length


# -- first stage closed forms -----------------------------------------------------


def test_first_vector_rank1():
    inp = make_input(1, 1)
    ring = inp.ring
    sol = solve_rank_r(inp)
    v1 = sol.vector(1)
    lam1 = ring.gen("lam1")
    beta = ring.gen("beta_top")
    # coefficient 1 on the level-(r+1) word, -beta/lam1^2 on the level-1 word
    assert v1.coefficient((2,)) == ring.one()
    assert v1.coefficient((1,)) == (beta * lam1.invert() * lam1.invert()).scale(-1)
    assert v1.coefficient(()) == ring.gen("c0_1")
    assert set(v1.terms) == {(2,), (1,), ()}


def test_alpha_rank1():
    inp = make_input(1, 1)
    ring = inp.ring
    sol = solve_rank_r(inp)
    Lam, _ = lambda_from_input(inp)
    lam1 = ring.gen("lam1")
    beta = ring.gen("beta_top")
    delta = ring.gen("Delta")
    # alpha = -2 Delta + beta Lambda_1 / (2 Lambda_2), with 2 Lambda_2 = lam1^2
    expected = delta.scale(-2) + beta * Lam[0] * (lam1 * lam1).invert()
    assert sol.alpha == expected


def test_first_vector_rank2_and_beta1():
    inp = make_input(2, 1)
    ring = inp.ring
    sol = solve_rank_r(inp)
    v1 = sol.vector(1)
    lam1 = ring.gen("lam1")
    lam2 = ring.gen("lam2")
    beta = ring.gen("beta_top")
    # sign (-1)^(r+2) = +1 for r = 2: coefficient 2*beta / lam2^2 on the
    # level-1 word, 1 on the level-3 word, nothing else besides the vacuum
    assert v1.coefficient((3,)) == ring.one()
    assert v1.coefficient((1,)) == (beta * (lam2 * lam2).invert()).scale(2)
    assert v1.coefficient(()) == ring.gen("c0_1")
    assert set(v1.terms) == {(3,), (1,), ()}
    # beta_1 = -2 beta lam1 / lam2 pinned at the first stage
    assert sol.betas[1] == (beta * lam1 * lam2.invert()).scale(-2)


def test_first_vector_rank3_and_beta2():
    inp = make_input(3, 1)
    ring = inp.ring
    sol = solve_rank_r(inp)
    v1 = sol.vector(1)
    lam2 = ring.gen("lam2")
    lam3 = ring.gen("lam3")
    beta = ring.gen("beta_top")
    # sign (-1)^(r+2) = -1 for r = 3: coefficient -3*beta / lam3^2
    assert v1.coefficient((4,)) == ring.one()
    assert v1.coefficient((1,)) == (beta * (lam3 * lam3).invert()).scale(-3)
    assert set(v1.terms) == {(4,), (1,), ()}
    # beta_2 = -3 beta lam2 / (2 lam3)
    assert sol.betas[2] == (beta * lam2 * lam3.invert()).scale(rational(-3, 2))


def test_beta_chain_helper():
    inp = make_input(2, 0)
    chain = beta_chain(inp)
    ring = inp.ring
    lam1 = ring.gen("lam1")
    lam2 = ring.gen("lam2")
    beta = ring.gen("beta_top")
    assert chain["betas"][1] == (beta * lam1 * lam2.invert()).scale(-2)
    assert chain["betas"][2] == beta
    assert not chain["alpha"].contains("alpha")


# -- structural invariants ---------------------------------------------------------


def test_support_bound_and_denominators():
    inp = make_input(1, 3)
    sol = solve_rank_r(inp)
    for m in range(0, 4):
        v = sol.vector(m)
        assert v.max_level() <= m * 2, "stage %d exceeds its level bound" % m
        for coeff in v.terms.values():
            # denominators only through inverse powers of lam1
            lo, _ = coeff.exponent_range("lam1")
            assert lo >= -2 * (m * 2 + 2)


def test_solve_order_independence():
    inp1 = make_input(2, 2)
    a = solve_rank_r(inp1)
    inp2 = make_input(2, 2)
    b = solve_rank_r(inp2, _shuffle_seed=7)
    for m in range(0, 3):
        assert a.vector(m).terms == b.vector(m).terms
    assert a.alpha == b.alpha


def test_stage_zero_only():
    inp = make_input(1, 0)
    sol = solve_rank_r(inp)
    assert sol.vector(0).terms == {(): inp.ring.one()}
    assert sol.alpha.contains("alpha")  # unpinned at order 0


# -- pairing triangularity (diagonal and vanishing) ---------------------------------


@pytest.mark.parametrize("r", [1, 2])
def test_pairing_triangularity(r):
    inp = make_input(r, 1)
    sol = solve_rank_r(inp)
    engine = sol._engine
    ring = inp.ring
    two_top = engine.module.Lam[-1].scale(2)
    rng = random.Random(42 + r)
    pool = [nu for nu in partitions_of(4)] + [nu for nu in partitions_of(3)]
    pool += [nu for nu in partitions_of(2)] + [(1,)]
    for _ in range(25):
        nu = pool[rng.randrange(len(pool))]
        mu = pool[rng.randrange(len(pool))]
        if sum(nu) < sum(mu):
            nu, mu = mu, nu
        got = engine.pair_value(nu, mu)
        if nu == mu:
            expected = two_top ** len(nu)
            prod = 1
            for p in nu:
                prod *= p
            assert got == expected.scale(prod)
        else:
            assert got.is_zero(), "pairing (%r, %r) should vanish" % (nu, mu)


# -- full verification ---------------------------------------------------------------


def test_verify_rank1():
    inp = make_input(1, 3)
    sol = solve_rank_r(inp)
    report = verify_defining_relation(sol, n_max=4)
    assert report["ok"], report["failures"]
    assert report["checked"] > 0


def test_verify_rank2():
    inp = make_input(2, 2)
    sol = solve_rank_r(inp)
    report = verify_defining_relation(sol, n_max=6)
    assert report["ok"], report["failures"]


def test_verify_catches_perturbation():
    inp = make_input(1, 2)
    sol = solve_rank_r(inp)
    vectors = dict(sol.vectors)
    v = vectors[1]
    terms = dict(v.terms)
    terms[(1,)] = terms[(1,)] + inp.ring.one()
    vectors[1] = ModuleVector(v.module, terms)
    residuals = defining_residuals(sol, n_max=3, vectors=vectors)
    assert any(not res.is_zero() for res in residuals.values())


# -- serialization --------------------------------------------------------------------


def test_solution_json_round_trip():
    inp = make_input(1, 2)
    sol = solve_rank_r(inp)
    data = sol.to_json_dict()
    back = solution_from_json_dict(data)
    assert back.r == sol.r
    assert back.alpha == sol.alpha
    for m in range(0, 3):
        assert back.vector(m).terms == sol.vector(m).terms
    report = verify_defining_relation(back, n_max=3)
    assert report["ok"], report["failures"]
