"""Exact solver for the distinguished vector family in a rank-r irregular
module on the integer grid.

The family (v_m) starts at the module generator v_0 and is characterized by a
defining recursion expressing (L_n - Lambda_n) v_m, for every n >= r, in
terms of earlier members of the family. Each stage m is solved exactly:

  * coefficients of v_m on basis words are obtained by a triangular system
    whose diagonal entries are (2 Lambda_{2r})^{length} * prod(parts), the
    off-diagonal pairings being computed directly in the module;
  * one extra scalar consistency condition (the vacuum component of the
    n = r relation) pins, in order, the lower flow parameters beta_{r-1},
    ..., beta_1 (stages m < r), then the scale parameter alpha (stage r),
    then the vacuum normalizations of earlier vectors (stages m > r). Any
    nonzero residual left over raises RecursionViolatedError, which
    indicates an implementation fault rather than a user error.

Verification is routed independently of the solve: `verify_defining_relation`
recomputes both sides of the defining recursion from the finished vectors,
and additionally checks the lowering identities (n < r) using the formal
flow derivations D_k acting on coefficient polynomials.
"""

import math
import random

from .coeffring import (
    ParamSet,
    PolyElem,
    poly_div_exact,
    poly_from_json_dict,
    rational,
    rational_from_string,
    solve_linear,
)
from .errors import RecursionViolatedError, UsageError
from .virasoro import (
    IrregularModule,
    ModuleVector,
    apply_L,
    apply_L_tilde,
    apply_word_sequence,
    module_vector_from_json,
    partitions_of,
)


def _as_poly(ring, value):
    if isinstance(value, PolyElem):
        if not ring.same_alphabet(value.ring):
            raise UsageError("input polynomial uses a different parameter set")
        return value
    return ring.const(value)


class RankRInput:
    """Inputs of an integer-grid solve.

    lam is the tuple (lambda_0, .., lambda_r); the top entry lambda_r must be
    an invertible monomial or a nonzero constant, because solved coefficients
    carry powers of its inverse. beta_r, delta and rho may be any ring
    elements. order is the number of stages to solve.
    """

    def __init__(self, ring, r, lam, beta_r, delta, rho, order):
        if r < 1:
            raise UsageError("rank must be >= 1")
        if order < 0:
            raise UsageError("order must be >= 0")
        lam = tuple(_as_poly(ring, x) for x in lam)
        if len(lam) != r + 1:
            raise UsageError(
                "rank %d needs %d lambda entries, got %d" % (r, r + 1, len(lam))
            )
        top = lam[r]
        if top.is_zero() or not top.is_monomial():
            raise UsageError(
                "lambda_%d must be a nonzero constant or an invertible monomial"
                % r
            )
        self.ring = ring
        self.r = r
        self.lam = lam
        self.beta_r = _as_poly(ring, beta_r)
        self.delta = _as_poly(ring, delta)
        self.rho = _as_poly(ring, rho)
        self.order = order

    def with_order(self, order):
        return RankRInput(
            self.ring, self.r, self.lam, self.beta_r, self.delta, self.rho, order
        )


def lambda_from_input(inp):
    """Eigenvalue tuple (Lambda_r..Lambda_2r) and central charge of the input.

    Lambda_n = (1/2) sum_{i+j=n} lambda_i lambda_j, corrected at n = r by
    (-1)^(r+1) r beta_r - (r+1) rho lambda_r; c = 1 - 12 rho^2.
    """
    ring = inp.ring
    r = inp.r
    out = []
    for n in range(r, 2 * r + 1):
        s = ring.zero()
        for i in range(0, r + 1):
            j = n - i
            if 0 <= j <= r:
                s = s + inp.lam[i] * inp.lam[j]
        s = s.scale(rational(1, 2))
        if n == r:
            sign = 1 if (r + 1) % 2 == 0 else -1
            s = s + inp.beta_r.scale(sign * r)
            s = s - (inp.rho * inp.lam[r]).scale(r + 1)
        out.append(s)
    c = ring.const(1) - (inp.rho * inp.rho).scale(12)
    return tuple(out), c


def _ensure_symbol(ring, name, invertible=False):
    if name not in ring:
        ring.add_symbol(name, invertible=invertible)
    return ring.gen(name)


class _Engine:
    """Stage-by-stage solver state (unresolved symbols kept internally)."""

    def __init__(self, inp, shuffle_seed=None):
        self.inp = inp
        self.ring = inp.ring
        self.r = inp.r
        self.order = inp.order
        Lam, c = lambda_from_input(inp)
        self.module = IrregularModule(self.ring, self.r, Lam, c)
        self.alpha = _ensure_symbol(self.ring, "alpha")
        self._beta_syms = {}
        for i in range(1, self.r):
            self._beta_syms[i] = _ensure_symbol(self.ring, "beta%d" % i)
        self._c0_syms = {}
        for m in range(1, self.order + 1):
            self._c0_syms[m] = _ensure_symbol(self.ring, "c0_%d" % m)
        self.vs = {0: self.module.vacuum()}
        self.bindings = {}
        self.pin_order = []
        self._rhs_cache = {}
        self._pair_cache = {}
        self._shuffle = shuffle_seed

    # parameters ---------------------------------------------------------

    def beta(self, i):
        if i == self.r:
            return self.inp.beta_r
        return self._beta_syms[i]

    def vector_at(self, j):
        if j < 0:
            return None
        return self.vs[j]

    # bindings -----------------------------------------------------------

    def bind(self, name, value):
        for k in list(self.bindings):
            self.bindings[k] = self.bindings[k].subs({name: value})
        self.bindings[name] = value
        self.pin_order.append(name)

    def resolve(self, poly):
        if not self.bindings:
            return poly
        return poly.subs(self.bindings)

    def resolve_vector(self, v):
        if not self.bindings:
            return v
        return v.map_coefficients(self.resolve)

    # the defining recursion ----------------------------------------------

    def recursion_rhs(self, n, m):
        """Right side of the defining relation for (L_n - Lambda_n) v_m,
        n >= r, expressed through the already-solved vectors."""
        if n < self.r:
            raise UsageError("the recursion applies to n >= rank")
        key = (n, m)
        if key in self._rhs_cache:
            return self._rhs_cache[key]
        ring = self.ring
        r = self.r
        module = self.module
        out = ModuleVector(module, {})
        # eigenvalue transport: binom(n+1, i+1) Lambda_i v_{m-n+i}, i != n
        for i in range(r, 2 * r + 1):
            if i == n:
                continue
            b = math.comb(n + 1, i + 1)
            if b == 0:
                continue
            v = self.vector_at(m - n + i)
            if v is None:
                continue
            out = out + v.scale(module.eigen(i).scale(b))
        # top flow parameter
        coef = sum((1 if j % 2 else -1) * math.comb(n + 1, j) for j in range(0, r + 2))
        if coef:
            v = self.vector_at(m - n + r)
            if v is not None:
                out = out + v.scale(self.beta(r).scale(coef * r))
        # lower flow parameters
        coef2 = sum((1 if j % 2 else -1) * math.comb(n + 1, j) for j in range(0, r + 1))
        if coef2:
            for i in range(1, r):
                v = self.vector_at(m - n + i)
                if v is not None:
                    out = out + v.scale(self.beta(i).scale(coef2 * i))
        # transported creation operators
        for i in range(0, r):
            bo = math.comb(n + 1, i + 1)
            if bo == 0:
                continue
            for j in range(0, i + 1):
                b = bo * math.comb(i + 1, j) * (-1) ** j
                v = self.vector_at(m - n + i - j)
                if v is None:
                    continue
                out = out + apply_L(i - j, v).scale(rational(b))
        # scalar terms on v_{m-n}
        v = self.vector_at(m - n)
        if v is not None:
            sc = self.alpha.scale(-n) + self.inp.delta.scale(-(n + 1))
            sc = sc - ring.const(n * (m - n))
            for i in range(1, r):
                b = math.comb(n + 1, i + 1) * (-1) ** (i + 1)
                if b:
                    piece = self.alpha + ring.const(m - n) + self.inp.delta.scale(i + 1)
                    sc = sc + piece.scale(b)
            out = out + v.scale(sc)
        self._rhs_cache[key] = out
        return out

    def chain_value(self, nu, m):
        """Vacuum component of the lowering chain for partition nu applied
        to v_m, evaluated through the recursion (smallest part acts first)."""
        X = self.recursion_rhs(nu[-1] + self.r, m)
        for p in reversed(nu[:-1]):
            X = apply_L_tilde(p + self.r, X)
        return X.coefficient(())

    def pair_diagonal(self, nu):
        """Diagonal pairing value: (2 Lambda_{2r})^len * prod(parts) times a
        factorial for each repeated part value."""
        val = (self.module.Lam[-1].scale(2)) ** len(nu)
        mult = math.prod(nu)
        seen = {}
        for p in nu:
            seen[p] = seen.get(p, 0) + 1
        for k in seen.values():
            mult *= math.factorial(k)
        return val.scale(mult)

    def pair_value(self, nu, mu):
        """Vacuum component of the lowering chain for nu against the basis
        word of mu (smallest part acts first)."""
        key = (nu, mu)
        if key in self._pair_cache:
            return self._pair_cache[key]
        X = self.module.basis_vector(mu)
        for p in reversed(nu):
            X = apply_L_tilde(p + self.r, X)
        val = X.coefficient(())
        self._pair_cache[key] = val
        return val

    # stages ---------------------------------------------------------------

    def solve_stage(self, m):
        ring = self.ring
        r = self.r
        coeffs = {}
        for w in range(m * (r + 1), 0, -1):
            parts = partitions_of(w)
            if self._shuffle is not None:
                rng = random.Random((self._shuffle, m, w))
                parts = list(parts)
                rng.shuffle(parts)
            for nu in parts:
                val = self.chain_value(nu, m)
                corr = ring.zero()
                for mu, cmu in coeffs.items():
                    if sum(mu) > w:
                        p = self.pair_value(nu, mu)
                        if not p.is_zero():
                            corr = corr + cmu * p
                num = val - corr
                c = poly_div_exact(num, self.pair_diagonal(nu))
                if not c.is_zero():
                    coeffs[nu] = c
        coeffs[()] = self._c0_syms[m]
        v = ModuleVector(self.module, coeffs)
        self.vs[m] = v
        self._pin_stage(m, v)

    def _pin_stage(self, m, v):
        r = self.r
        E = apply_L_tilde(r, v) - self.recursion_rhs(r, m)
        e0 = self.resolve(E.coefficient(()))
        if m < r:
            target = "beta%d" % (r - m)
        elif m == r:
            target = "alpha"
        else:
            target = "c0_%d" % (m - r)
        if e0.contains(target):
            self.bind(target, solve_linear(e0, target))
        elif not e0.is_zero():
            raise RecursionViolatedError(
                "stage %d consistency condition is nonzero but does not "
                "involve the expected unknown %r; the defining recursion "
                "produced an inconsistent system (implementation fault)"
                % (m, target)
            )
        for mu, coeff in E.terms.items():
            if not self.resolve(coeff).is_zero():
                raise RecursionViolatedError(
                    "stage %d residual is nonzero on basis word %r; the "
                    "defining recursion produced an inconsistent system "
                    "(implementation fault)" % (m, mu)
                )

    def run(self):
        for m in range(1, self.order + 1):
            self.solve_stage(m)


class RankRSolution:
    """Finished integer-grid family with all pinned parameters substituted."""

    def __init__(self, engine):
        self._engine = engine
        self.input = engine.inp
        self.module = engine.module
        self.r = engine.r
        self.order = engine.order
        self.vectors = {
            m: engine.resolve_vector(engine.vs[m]) for m in range(0, engine.order + 1)
        }
        self.alpha = engine.resolve(engine.alpha)
        self.betas = {}
        for i in range(1, engine.r):
            self.betas[i] = engine.resolve(engine.beta(i))
        self.betas[engine.r] = engine.inp.beta_r
        self.c0 = {
            m: engine.resolve(engine._c0_syms[m]) for m in range(1, engine.order + 1)
        }
        self.pinned = list(engine.pin_order)

    def vector(self, m):
        return self.vectors[m]

    def recursion_rhs(self, n, m):
        return self._engine.resolve_vector(self._engine.recursion_rhs(n, m))

    def free_normalizations(self):
        """Stage vacuum coefficients that remain free symbols."""
        out = []
        for m in range(1, self.order + 1):
            val = self.c0[m]
            if val.is_monomial() and val.contains("c0_%d" % m):
                out.append("c0_%d" % m)
        return out

    def to_json_dict(self):
        ring = self.input.ring
        params = {
            "names": list(ring.names),
            "invertible": sorted(ring.invertible_names),
        }
        return {
            "kind": "rank-r",
            "r": self.r,
            "order": self.order,
            "params": params,
            "lambda": [x.to_json_dict() for x in self.input.lam],
            "beta_r": self.input.beta_r.to_json_dict(),
            "delta": self.input.delta.to_json_dict(),
            "rho": self.input.rho.to_json_dict(),
            "alpha": self.alpha.to_json_dict(),
            "betas": {str(i): b.to_json_dict() for i, b in self.betas.items()},
            "c0": {str(m): v.to_json_dict() for m, v in self.c0.items()},
            "vectors": {
                str(m): self.vectors[m].to_json_dict()
                for m in range(0, self.order + 1)
            },
        }


def solve_rank_r(inp, _shuffle_seed=None):
    """Solve the integer-grid family to the requested order."""
    engine = _Engine(inp, shuffle_seed=_shuffle_seed)
    engine.run()
    return RankRSolution(engine)


def beta_chain(inp):
    """Pinned parameters only: run stages 1..r and report alpha and betas."""
    engine = _Engine(inp.with_order(max(inp.r, 0)), shuffle_seed=None)
    engine.run()
    sol = RankRSolution(engine)
    return {"alpha": sol.alpha, "betas": dict(sol.betas)}


# -- independent verification ---------------------------------------------------


def _rhs_direct(module, vmap, alpha, betas, delta, n, m):
    """Recompute the defining right side from finished vectors only."""
    ring = module.ring
    r = module.r

    def vec(j):
        if j < 0:
            return None
        return vmap.get(j)

    out = ModuleVector(module, {})
    for i in range(r, 2 * r + 1):
        if i == n:
            continue
        b = math.comb(n + 1, i + 1)
        if b == 0:
            continue
        v = vec(m - n + i)
        if v is None:
            continue
        out = out + v.scale(module.eigen(i).scale(b))
    coef = sum((1 if j % 2 else -1) * math.comb(n + 1, j) for j in range(0, r + 2))
    if coef:
        v = vec(m - n + r)
        if v is not None:
            out = out + v.scale(betas[r].scale(coef * r))
    coef2 = sum((1 if j % 2 else -1) * math.comb(n + 1, j) for j in range(0, r + 1))
    if coef2:
        for i in range(1, r):
            v = vec(m - n + i)
            if v is not None:
                out = out + v.scale(betas[i].scale(coef2 * i))
    for i in range(0, r):
        bo = math.comb(n + 1, i + 1)
        if bo == 0:
            continue
        for j in range(0, i + 1):
            b = bo * math.comb(i + 1, j) * (-1) ** j
            v = vec(m - n + i - j)
            if v is None:
                continue
            out = out + apply_L(i - j, v).scale(rational(b))
    v = vec(m - n)
    if v is not None:
        sc = alpha.scale(-n) + delta.scale(-(n + 1)) - ring.const(n * (m - n))
        for i in range(1, r):
            b = math.comb(n + 1, i + 1) * (-1) ** (i + 1)
            if b:
                sc = sc + (alpha + ring.const(m - n) + delta.scale(i + 1)).scale(b)
        out = out + v.scale(sc)
    return out


def _single_symbol_name(poly, what):
    if poly.is_monomial() and not poly.is_const():
        data = poly.sorted_terms()[0]
        exps = data[0]
        if len(exps) == 1 and exps[0][1] == 1 and data[1] == rational(1):
            return poly.ring.names[exps[0][0]]
    raise UsageError(
        "%s must be an independent symbol for the lowering-identity check" % what
    )


def _flow_derivation(inp, k, poly):
    """D_k on a coefficient polynomial: sum_p p lambda_{p+k} d/d lambda_p,
    plus (k = 0 only) r beta_r d/d beta_r."""
    ring = inp.ring
    r = inp.r
    out = ring.zero()
    for p in range(1, r - k + 1):
        name = _single_symbol_name(inp.lam[p], "lambda_%d" % p)
        d = poly.derivative(name)
        if not d.is_zero():
            out = out + (inp.lam[p + k] * d).scale(p)
    if k == 0:
        bname = _single_symbol_name(inp.beta_r, "beta_r")
        d = poly.derivative(bname)
        if not d.is_zero():
            out = out + (inp.beta_r * d).scale(r)
    return out


def lowering_residuals(solution, m_max=None):
    """Residuals of the lowering identities (indices 0 <= k < r).

    For each k and stage m, compares D_k applied to the coefficients of v_m
    (plus the word-level trailing action of L_k on the generator) against
    the combination of earlier vectors the identity asserts.
    """
    inp = solution.input
    module = solution.module
    ring = inp.ring
    r = solution.r
    if m_max is None:
        m_max = solution.order
    vmap = solution.vectors
    alpha = solution.alpha
    delta = inp.delta
    betas = solution.betas
    out = {}
    for k in range(0, r):
        base = module.basis_vector((r - k,))  # L_k acting on the generator
        for m in range(0, m_max + 1):
            v = vmap[m]
            lhs = ModuleVector(
                module, {mu: _flow_derivation(inp, k, c) for mu, c in v.terms.items()}
            )
            for mu, c in v.terms.items():
                lhs = lhs + apply_word_sequence(module.word_of(mu), base).scale(c)
            rhs = ModuleVector(module, {})
            for i in range(0, k + 1):
                if m - i < 0:
                    continue
                b = math.comb(k + 1, i) * (-1) ** i
                rhs = rhs + apply_L(k - i, vmap[m - i]).scale(rational(b))
            if m - k >= 0:
                sign = 1 if k % 2 == 0 else -1
                for i in range(1, k):
                    if m - k + i > solution.order:
                        continue
                    rhs = rhs + vmap[m - k + i].scale(betas[i].scale(sign * i))
                sc = alpha + ring.const(m - k) + delta.scale(k + 1)
                if k == 0:
                    sc = sc - alpha - delta
                rhs = rhs + vmap[m - k].scale(sc.scale(-sign))
            out[(k, m)] = lhs - rhs
    return out


def defining_residuals(solution, n_max, m_max=None, vectors=None):
    """Residuals (L_n - Lambda_n) v_m minus the recursion right side for
    r <= n <= n_max, 0 <= m <= m_max, recomputed from finished vectors."""
    module = solution.module
    r = solution.r
    if m_max is None:
        m_max = solution.order
    vmap = vectors if vectors is not None else solution.vectors
    out = {}
    for m in range(0, m_max + 1):
        for n in range(r, n_max + 1):
            lhs = apply_L_tilde(n, vmap[m])
            rhs = _rhs_direct(
                module, vmap, solution.alpha, solution.betas, solution.input.delta, n, m
            )
            out[(n, m)] = lhs - rhs
    return out


def verify_defining_relation(solution, n_max=None, m_max=None, check_lowering=True):
    """Full independent check of the solved family.

    Returns {"ok": bool, "checked": int, "failures": [...]} where failures
    lists (kind, indices) of nonzero residuals.
    """
    r = solution.r
    if n_max is None:
        n_max = 2 * r + 2
    failures = []
    checked = 0
    for key, res in defining_residuals(solution, n_max, m_max).items():
        checked += 1
        if not res.is_zero():
            failures.append(("recursion", key))
    if check_lowering:
        for key, res in lowering_residuals(solution, m_max).items():
            checked += 1
            if not res.is_zero():
                failures.append(("lowering", key))
    return {"ok": not failures, "checked": checked, "failures": failures}


# -- serialization ---------------------------------------------------------------


def ring_from_params(data):
    ring = ParamSet()
    invertible = set(data.get("invertible", []))
    for name in data["names"]:
        ring.add_symbol(name, invertible=name in invertible)
    return ring


def solution_from_json_dict(data):
    """Rebuild a solved integer-grid family from its JSON dict (as produced
    by RankRSolution.to_json_dict)."""
    if data.get("kind") != "rank-r":
        raise UsageError("not an integer-grid solution file")
    ring = ring_from_params(data["params"])
    r = data["r"]
    lam = [poly_from_json_dict(ring, d) for d in data["lambda"]]
    inp = RankRInput(
        ring,
        r,
        lam,
        poly_from_json_dict(ring, data["beta_r"]),
        poly_from_json_dict(ring, data["delta"]),
        poly_from_json_dict(ring, data["rho"]),
        data["order"],
    )
    engine = _Engine.__new__(_Engine)
    engine.inp = inp
    engine.ring = ring
    engine.r = r
    engine.order = data["order"]
    Lam, c = lambda_from_input(inp)
    engine.module = IrregularModule(ring, r, Lam, c)
    engine.alpha = ring.gen("alpha")
    engine._beta_syms = {i: ring.gen("beta%d" % i) for i in range(1, r)}
    engine._c0_syms = {m: ring.gen("c0_%d" % m) for m in range(1, data["order"] + 1)}
    engine.vs = {}
    engine.bindings = {}
    engine.pin_order = []
    engine._rhs_cache = {}
    engine._pair_cache = {}
    engine._shuffle = None
    sol = RankRSolution.__new__(RankRSolution)
    sol._engine = engine
    sol.input = inp
    sol.module = engine.module
    sol.r = r
    sol.order = data["order"]
    sol.vectors = {
        int(m): module_vector_from_json(engine.module, d)
        for m, d in data["vectors"].items()
    }
    engine.vs = dict(sol.vectors)
    sol.alpha = poly_from_json_dict(ring, data["alpha"])
    sol.betas = {int(i): poly_from_json_dict(ring, d) for i, d in data["betas"].items()}
    sol.c0 = {int(m): poly_from_json_dict(ring, d) for m, d in data["c0"].items()}
    sol.pinned = []
    return sol
