"""Virasoro infrastructure: partitions, irregular Verma modules, the
normal-ordered action of any mode on basis vectors, Verma-module singular
vectors, and the left pairing used by conformal blocks.

An irregular module of rank r is generated by a vector on which L_n acts by
the scalar Lambda_n for r <= n <= 2r and by zero for n > 2r. Basis words
are indexed by partitions mu via L_{-mu} = L_{-mu_1+r} ... L_{-mu_k+r}
(parts descending, so the leftmost factor carries the most negative index).
The bracket convention is

    [L_m, L_n] = (m - n) L_{m+n} + delta_{m+n,0} (m^3 - m)/12 * c,

normalized so that [L_2, L_{-2}] = 4 L_0 + c/2.
"""

from .coeffring import (
    ParamSet,
    PolyElem,
    poly_div_exact,
    poly_from_json_dict,
    rational,
)
from .errors import (
    DegenerateSystemError,
    PairingUndefinedError,
    UsageError,
)

# -- partitions --------------------------------------------------------------
# Partitions are plain tuples of weakly decreasing positive integers; the
# empty tuple is the empty partition.


def Partition(parts):
    """Validating constructor: returns the partition as a canonical tuple."""
    mu = tuple(parts)
    if any(not isinstance(p, int) or p <= 0 for p in mu):
        raise UsageError("partition parts must be positive integers: %r" % (mu,))
    if any(mu[i] < mu[i + 1] for i in range(len(mu) - 1)):
        raise UsageError("partition parts must be weakly decreasing: %r" % (mu,))
    return mu


def partitions_of(n, max_part=None):
    """All partitions of n (descending parts), in a fixed deterministic order."""
    if n < 0:
        return []
    if n == 0:
        return [()]
    if max_part is None:
        max_part = n
    out = []
    for first in range(min(n, max_part), 0, -1):
        for rest in partitions_of(n - first, first):
            out.append((first,) + rest)
    return out


def partitions_up_to(n):
    """All partitions of size 0..n."""
    out = []
    for s in range(n + 1):
        out.extend(partitions_of(s))
    return out


# -- modules -----------------------------------------------------------------


class IrregularModule:
    """Irregular Verma module of rank r over a coefficient ring.

    Lam is the tuple (Lambda_r, ..., Lambda_{2r}) of PolyElem; c is the
    central charge as PolyElem. Basis words are partitions; part p of a
    partition corresponds to the operator index r - p.
    """

    def __init__(self, ring, r, Lam, c):
        if r < 0:
            raise UsageError("rank must be non-negative")
        Lam = tuple(Lam)
        if len(Lam) != r + 1:
            raise UsageError(
                "rank %d needs %d eigenvalues Lambda_r..Lambda_2r, got %d"
                % (r, r + 1, len(Lam))
            )
        self.ring = ring
        self.r = r
        self.Lam = tuple(x if isinstance(x, PolyElem) else ring.const(x) for x in Lam)
        self.c = c if isinstance(c, PolyElem) else ring.const(c)
        self._apply_cache = {}

    def eigen(self, n):
        """Lambda_n for n >= r (zero polynomial above 2r); None below r."""
        if n < self.r:
            return None
        if n > 2 * self.r:
            return self.ring.zero()
        return self.Lam[n - self.r]

    def is_irreducible(self):
        """Irreducibility criterion: Lambda_2r != 0 or Lambda_{2r-1} != 0."""
        if self.r == 0:
            raise UsageError("criterion applies to positive rank")
        top = self.Lam[-1]
        sub = self.Lam[-2] if self.r >= 1 else None
        return (not top.is_zero()) or (sub is not None and not sub.is_zero())

    def is_ramified_regime(self):
        """Lambda_2r = 0 with Lambda_{2r-1} != 0 (half-integer-grid regime)."""
        if self.r < 1:
            return False
        return self.Lam[-1].is_zero() and not self.Lam[-2].is_zero()

    def word_of(self, mu):
        """Operator indices of the basis word for partition mu, left to right."""
        return tuple(-p + self.r for p in mu)

    def partition_of(self, word):
        return tuple(self.r - a for a in word)

    def vacuum(self):
        return ModuleVector(self, {(): self.ring.one()})

    def basis_vector(self, mu):
        return ModuleVector(self, {tuple(mu): self.ring.one()})

    def __repr__(self):
        return "IrregularModule(r=%d)" % self.r


class VermaModule(IrregularModule):
    """Verma module: the rank-0 case, generated by a highest-weight vector."""

    def __init__(self, ring, delta, c):
        IrregularModule.__init__(self, ring, 0, (delta,), c)

    @property
    def delta(self):
        return self.Lam[0]


class ModuleVector:
    """Finite linear combination of basis words with PolyElem coefficients."""

    __slots__ = ("module", "terms")

    def __init__(self, module, terms):
        self.module = module
        self.terms = {mu: coeff for mu, coeff in terms.items() if not coeff.is_zero()}

    def is_zero(self):
        return not self.terms

    def coefficient(self, mu):
        return self.terms.get(tuple(mu), self.module.ring.zero())

    def support(self):
        return sorted(self.terms, key=lambda mu: (sum(mu), mu))

    def max_level(self):
        return max((sum(mu) for mu in self.terms), default=0)

    def __eq__(self, other):
        if not isinstance(other, ModuleVector):
            return NotImplemented
        return self.module is other.module and self.terms == other.terms

    def __add__(self, other):
        assert self.module is other.module
        acc = dict(self.terms)
        for mu, coeff in other.terms.items():
            if mu in acc:
                s = acc[mu] + coeff
                if s.is_zero():
                    del acc[mu]
                else:
                    acc[mu] = s
            else:
                acc[mu] = coeff
        return ModuleVector(self.module, acc)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, factor):
        """Multiply every coefficient by a PolyElem or exact rational."""
        if isinstance(factor, PolyElem):
            if factor.is_zero():
                return ModuleVector(self.module, {})
            return ModuleVector(
                self.module, {mu: coeff * factor for mu, coeff in self.terms.items()}
            )
        return ModuleVector(
            self.module, {mu: coeff.scale(factor) for mu, coeff in self.terms.items()}
        )

    def map_coefficients(self, fn):
        return ModuleVector(self.module, {mu: fn(c) for mu, c in self.terms.items()})

    def to_json_dict(self):
        module = {
            "r": self.module.r,
            "Lambda": [x.to_json_dict() for x in self.module.Lam],
            "c": self.module.c.to_json_dict(),
        }
        terms = [
            {"partition": list(mu), "coeff": self.terms[mu].to_json_dict()}
            for mu in self.support()
        ]
        return {"module": module, "terms": terms}

    def __repr__(self):
        if not self.terms:
            return "ModuleVector(0)"
        bits = []
        for mu in self.support():
            word = "".join("L(%d)" % a for a in self.module.word_of(mu)) or "1"
            bits.append("(%s)*%s" % (self.terms[mu].to_text(), word))
        return "ModuleVector(%s)" % " + ".join(bits)


def module_vector_from_json(module, data):
    """Rebuild a ModuleVector over a given module from its JSON dict."""
    terms = {}
    for item in data["terms"]:
        mu = Partition(item["partition"])
        terms[mu] = poly_from_json_dict(module.ring, item["coeff"])
    return ModuleVector(module, terms)


# -- the normal-ordered action ------------------------------------------------


def _acc(dst, mu, poly):
    if poly.is_zero():
        return
    if mu in dst:
        s = dst[mu] + poly
        if s.is_zero():
            del dst[mu]
        else:
            dst[mu] = s
    else:
        dst[mu] = poly


def _apply_word(module, n, word):
    """L_n acting on the basis word `word` (a tuple of operator indices,
    weakly increasing), as a dict {partition: PolyElem}.

    Rewrites to canonical form by commuting L_n rightward: on an empty word
    the eigen/creation rules apply; otherwise, with a = word[0],

        L_n L_a ... = L_a (L_n ...) + (n - a) L_{n+a} ... + central term,

    recursing on strictly smaller (word length, leading index) pairs.
    """
    key = (n, word)
    cache = module._apply_cache
    if key in cache:
        return cache[key]
    r = module.r
    ring = module.ring
    if not word:
        if n >= r:
            lam = module.eigen(n)
            out = {} if lam.is_zero() else {(): lam}
        else:
            out = {(r - n,): ring.one()}
    elif n <= word[0]:
        # Already in canonical (weakly increasing) position; n is a
        # creation index here because word[0] <= r - 1.
        out = {module.partition_of((n,) + word): ring.one()}
    else:
        a = word[0]
        rest = word[1:]
        out = {}
        # L_a applied on top of (L_n . rest)
        for mu, coeff in _apply_word(module, n, rest).items():
            for nu, c2 in _apply_word(module, a, module.word_of(mu)).items():
                _acc(out, nu, coeff * c2)
        # bracket part: (n - a) L_{n+a} . rest
        if n != a:
            for mu, coeff in _apply_word(module, n + a, rest).items():
                _acc(out, mu, coeff.scale(n - a))
        # central part: only when n + a = 0 (n > a forces n > 0)
        if n + a == 0:
            central = module.c.scale(rational(n ** 3 - n, 12))
            _acc(out, module.partition_of(rest), central)
    cache[key] = out
    return out


def apply_L(n, v):
    """Action of the mode L_n on a ModuleVector, in canonical basis form."""
    module = v.module
    out = {}
    for mu, coeff in v.terms.items():
        for nu, c2 in _apply_word(module, n, module.word_of(mu)).items():
            _acc(out, nu, coeff * c2)
    return ModuleVector(module, out)


def apply_L_tilde(n, v):
    """(L_n - Lambda_n) applied to v; defined for n >= rank."""
    module = v.module
    lam = module.eigen(n)
    if lam is None:
        raise UsageError("L-tilde is defined for n >= rank only, got n=%d" % n)
    out = apply_L(n, v)
    if not lam.is_zero():
        out = out - v.scale(lam)
    return out


def apply_word_sequence(indices, v):
    """Apply a sequence of modes left-to-right: indices (a_1, .., a_k)
    produce L_{a_1} ... L_{a_k} v (rightmost acts first)."""
    for a in reversed(tuple(indices)):
        v = apply_L(a, v)
    return v


# -- left pairing --------------------------------------------------------------


def pair_left(delta_prime, v):
    """The block pairing <Delta'| v against an irregular module.

    Absorption rules, applied to each basis word leftmost-first:
    a negative leftmost index annihilates; index 0 multiplies by Delta';
    index 1 annihilates only when Delta' is literally zero; anything else
    is undefined and raises.
    """
    ring = v.module.ring
    if not isinstance(delta_prime, PolyElem):
        delta_prime = ring.const(delta_prime)
    dp_zero = delta_prime.is_zero()
    total = ring.zero()
    for mu, coeff in v.terms.items():
        word = v.module.word_of(mu)
        factor = ring.one()
        dead = False
        for a in word:
            if a <= -1:
                dead = True
                break
            if a == 0:
                factor = factor * delta_prime
                continue
            if a == 1 and dp_zero:
                dead = True
                break
            raise PairingUndefinedError(
                "pairing undefined: leftmost factor L_%d against a nonzero "
                "left weight has no defined absorption (word %r)" % (a, word)
            )
        if not dead:
            total = total + coeff * factor
    return total


# -- Verma-module singular vectors ---------------------------------------------


def c_of_t(ring, t_param):
    """Central charge 13 - 6(t + 1/t) for an invertible t."""
    return ring.const(13) - t_param.scale(6) - t_param.invert().scale(6)


def delta_pq(ring, p, q, t_param):
    """Highest weight ((p t - q)^2 - (t - 1)^2) / (4 t)."""
    t = t_param
    num = (t.scale(p) - q) ** 2 - (t - 1) ** 2
    return poly_div_exact(num, t.scale(4))


def kac_module(p, q, t_param):
    """Verma module at the degenerate weight for (p, q), plus its weight."""
    ring = t_param.ring
    delta = delta_pq(ring, p, q, t_param)
    return VermaModule(ring, delta, c_of_t(ring, t_param)), delta


def _eliminate_rows(rows, unknowns):
    """Fraction-free Gaussian elimination for rows of (coeffs, rhs).

    rows: list of (dict unknown -> PolyElem, PolyElem). Returns the solved
    assignment {unknown: PolyElem}. Rows beyond the pivot set must reduce to
    0 = 0, otherwise the system is degenerate/inconsistent.
    """
    rows = [(dict(cs), rhs) for cs, rhs in rows]
    pivots = []  # (unknown, coeffs, rhs) in elimination order
    prev_pivot = None
    for u in unknowns:
        pivot_idx = None
        for i, (cs, _) in enumerate(rows):
            if u in cs and not cs[u].is_zero():
                pivot_idx = i
                break
        if pivot_idx is None:
            raise DegenerateSystemError("no pivot available for unknown %r" % (u,))
        pcs, prhs = rows.pop(pivot_idx)
        pcoeff = pcs[u]
        zero = pcoeff.ring.zero()
        new_rows = []
        for cs, rhs in rows:
            f = cs.pop(u, zero)
            ncs = {}
            for k in set(cs) | (set(pcs) if not f.is_zero() else set()):
                if k == u:
                    continue
                val = pcoeff * cs.get(k, zero)
                if not f.is_zero():
                    val = val - f * pcs.get(k, zero)
                if prev_pivot is not None:
                    val = poly_div_exact(val, prev_pivot)
                if not val.is_zero():
                    ncs[k] = val
            nrhs = pcoeff * rhs
            if not f.is_zero():
                nrhs = nrhs - f * prhs
            if prev_pivot is not None:
                nrhs = poly_div_exact(nrhs, prev_pivot)
            new_rows.append((ncs, nrhs))
        rows = new_rows
        pivots.append((u, pcs, prhs))
        prev_pivot = pcoeff
    for cs, rhs in rows:
        if any(not c.is_zero() for c in cs.values()) or not rhs.is_zero():
            raise DegenerateSystemError("inconsistent linear system")
    solution = {}
    for u, pcs, prhs in reversed(pivots):
        acc = prhs
        for k, c in pcs.items():
            if k == u or c.is_zero():
                continue
            acc = acc - c * solution[k]
        solution[u] = poly_div_exact(acc, pcs[u])
    return solution


def singular_vector(p, q, t_param, max_level=6):
    """The level-pq singular vector in the degenerate Verma module.

    Solved from L_1 chi = L_2 chi = 0 over the level-pq basis, normalized so
    the coefficient of the all-ones partition (the L_{-1}^{pq} word) is 1.
    t_param must be an invertible generator or a nonzero rational constant.
    """
    if p < 1 or q < 1:
        raise UsageError("p, q must be positive")
    N = p * q
    if N > max_level:
        raise UsageError("level %d exceeds the configured maximum %d" % (N, max_level))
    module, _ = kac_module(p, q, t_param)
    ring = module.ring
    ones = tuple([1] * N)
    basis = [mu for mu in partitions_of(N) if mu != ones]
    # Build the annihilation equations with the normalized word moved to
    # the right-hand side.
    rows = []
    for n in (1, 2):
        image = {}
        columns = {}
        for mu in basis:
            for nu, coeff in _apply_word(module, n, module.word_of(mu)).items():
                columns.setdefault(nu, {})[mu] = coeff
                image.setdefault(nu, None)
        rhs_vec = _apply_word(module, n, module.word_of(ones))
        for nu in sorted(set(image) | set(rhs_vec), key=lambda m: (sum(m), m)):
            coeffs = columns.get(nu, {})
            rhs = rhs_vec.get(nu, ring.zero()).scale(-1)
            if coeffs or not rhs.is_zero():
                rows.append((coeffs, rhs))
    if basis:
        solution = _eliminate_rows(rows, basis)
    else:
        for cs, rhs in rows:
            if not rhs.is_zero():
                raise DegenerateSystemError("inconsistent singular system")
        solution = {}
    terms = {ones: ring.one()}
    for mu, val in solution.items():
        terms[mu] = val
    return ModuleVector(module, terms)
