"""Exact coefficient arithmetic.

Arbitrary-precision rationals plus sparse multivariate Laurent polynomials
over an ordered alphabet of named parameters, a designated subset of which
is invertible (may carry negative exponents). Division is exact-or-error:
denominators in the solvers are guaranteed to be monomials in invertible
generators, so an inexact division always signals a logic fault upstream
rather than something to approximate.

Terms are kept in a canonical graded-lexicographic order (grade first, then
lexicographic in the alphabet order), so structural equality and
serialization are deterministic.
"""

from fractions import Fraction

from mpmath import mp, mpc, mpf

from .errors import ExactDivisionError, UsageError
from .precision import working_precision

try:
    from gmpy2 import mpq as _ratimpl
except ImportError:  # pragma: no cover - gmpy2 is an install requirement
    _ratimpl = Fraction

RAT_ZERO = _ratimpl(0)
RAT_ONE = _ratimpl(1)


def rational(num, den=1):
    """Exact rational from integers (or anything the backend accepts)."""
    return _ratimpl(num, den)


def rational_from_string(s):
    """Parse "p/q", an integer, or a decimal string into an exact rational."""
    try:
        f = Fraction(str(s).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError("cannot parse %r as an exact rational: %s" % (s, exc))
    return _ratimpl(f.numerator, f.denominator)


def rational_to_string(q):
    return str(q)


def _as_rational(x):
    if isinstance(x, _ratimpl):
        return x
    if isinstance(x, int):
        return _ratimpl(x)
    if isinstance(x, Fraction):
        return _ratimpl(x.numerator, x.denominator)
    raise UsageError("expected an exact rational, got %r" % (x,))


class ParamSet:
    """Ordered alphabet of parameter names with an invertible subset.

    The order of names fixes the lexicographic part of the term order and
    the serialization order. Names may be appended later (solvers introduce
    unknowns on the fly); existing polynomials remain valid because
    exponent vectors are stored sparsely.
    """

    def __init__(self, names=(), invertible=()):
        self._names = []
        self._index = {}
        self._invertible = set()
        for n in names:
            self.add_symbol(n)
        for n in invertible:
            if n not in self._index:
                raise UsageError("invertible name %r not among names" % n)
            self._invertible.add(self._index[n])

    @property
    def names(self):
        return tuple(self._names)

    @property
    def invertible_names(self):
        return frozenset(self._names[i] for i in self._invertible)

    def __len__(self):
        return len(self._names)

    def __contains__(self, name):
        return name in self._index

    def __repr__(self):
        return "ParamSet(%r, invertible=%r)" % (
            self._names,
            sorted(self.invertible_names),
        )

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise UsageError("unknown parameter %r" % name)

    def name(self, idx):
        return self._names[idx]

    def is_invertible_index(self, idx):
        return idx in self._invertible

    def add_symbol(self, name, invertible=False):
        """Append a new name; returns its index. Duplicate names are errors."""
        if not isinstance(name, str) or not name:
            raise UsageError("parameter names must be non-empty strings")
        if name in self._index:
            raise UsageError("parameter %r already declared" % name)
        idx = len(self._names)
        self._names.append(name)
        self._index[name] = idx
        if invertible:
            self._invertible.add(idx)
        return idx

    def same_alphabet(self, other):
        return (
            self is other
            or (
                self._names == other._names
                and self._invertible == other._invertible
            )
        )

    # -- constructors ------------------------------------------------------

    def zero(self):
        return PolyElem(self, {})

    def one(self):
        return self.const(1)

    def const(self, value):
        q = _as_rational(value)
        if q == 0:
            return PolyElem(self, {})
        return PolyElem(self, {(): q})

    def gen(self, name, power=1):
        idx = self.index(name)
        if power == 0:
            return self.one()
        if power < 0 and idx not in self._invertible:
            raise UsageError("%r is not invertible" % name)
        return PolyElem(self, {((idx, power),): RAT_ONE})


def _key_mul(k1, k2):
    """Merge two sparse exponent keys additively."""
    if not k1:
        return k2
    if not k2:
        return k1
    acc = dict(k1)
    for idx, e in k2:
        ne = acc.get(idx, 0) + e
        if ne:
            acc[idx] = ne
        else:
            del acc[idx]
    return tuple(sorted(acc.items()))


def _key_grade(key):
    return sum(e for _, e in key)


def _key_cmp(k1, k2):
    """Graded-lex comparison; positive when k1 > k2."""
    g1, g2 = _key_grade(k1), _key_grade(k2)
    if g1 != g2:
        return 1 if g1 > g2 else -1
    # Lexicographic on the dense exponent vectors: walk indices in order.
    i = j = 0
    while i < len(k1) or j < len(k2):
        idx1 = k1[i][0] if i < len(k1) else None
        idx2 = k2[j][0] if j < len(k2) else None
        if idx2 is None or (idx1 is not None and idx1 < idx2):
            e1, e2 = k1[i][1], 0
            pos = idx1
        elif idx1 is None or idx2 < idx1:
            e1, e2 = 0, k2[j][1]
            pos = idx2
        else:
            e1, e2 = k1[i][1], k2[j][1]
            pos = idx1
        if e1 != e2:
            return 1 if e1 > e2 else -1
        if idx1 == pos and i < len(k1):
            i += 1
        if idx2 == pos and j < len(k2):
            j += 1
    return 0


def _key_sort_terms(terms):
    """Terms of a dict {key: coeff} in canonical (descending) order."""
    import functools

    return sorted(terms.items(), key=functools.cmp_to_key(lambda a, b: _key_cmp(a[0], b[0])), reverse=True)


class PolyElem:
    """Sparse Laurent polynomial relative to a ParamSet.

    Stored as a map from sparse exponent vectors (sorted tuples of
    (name-index, nonzero exponent)) to nonzero rationals. Negative
    exponents are allowed only on invertible generators. Instances are
    immutable by convention; all operations return new objects.
    """

    __slots__ = ("ring", "terms")

    def __init__(self, ring, terms, _validate=True):
        self.ring = ring
        self.terms = terms
        if _validate:
            for key, coeff in terms.items():
                assert coeff != 0, "zero coefficient stored"
                for idx, e in key:
                    assert e != 0, "zero exponent stored"
                    if e < 0 and not ring.is_invertible_index(idx):
                        raise ExactDivisionError(
                            "negative exponent on non-invertible %r"
                            % ring.name(idx)
                        )

    # -- predicates and views ----------------------------------------------

    def is_zero(self):
        return not self.terms

    def is_const(self):
        return not self.terms or (len(self.terms) == 1 and () in self.terms)

    def const_value(self):
        if not self.terms:
            return RAT_ZERO
        if len(self.terms) == 1 and () in self.terms:
            return self.terms[()]
        raise UsageError("not a constant: %s" % self)

    def is_monomial(self):
        return len(self.terms) == 1

    def contains(self, name):
        idx = self.ring.index(name)
        return any(i == idx for key in self.terms for i, _ in key)

    def exponent_range(self, name):
        """(min, max) exponent of name across terms; (0, 0) for zero."""
        idx = self.ring.index(name)
        lo = hi = None
        for key in self.terms:
            e = dict(key).get(idx, 0)
            lo = e if lo is None else min(lo, e)
            hi = e if hi is None else max(hi, e)
        if lo is None:
            return 0, 0
        return lo, hi

    def total_degree(self):
        if not self.terms:
            return 0
        return max(_key_grade(k) for k in self.terms)

    def sorted_terms(self):
        return _key_sort_terms(self.terms)

    # -- equality ------------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, PolyElem):
            if isinstance(other, (int, Fraction)) or type(other) is type(RAT_ONE):
                return self.is_const() and self.const_value() == _as_rational(other)
            return NotImplemented
        return self.ring.same_alphabet(other.ring) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    # -- arithmetic ----------------------------------------------------------

    def _check_ring(self, other):
        if not self.ring.same_alphabet(other.ring):
            raise UsageError("operands live over different ParamSets")

    def __neg__(self):
        return PolyElem(self.ring, {k: -c for k, c in self.terms.items()}, _validate=False)

    def __add__(self, other):
        if not isinstance(other, PolyElem):
            other = self.ring.const(other)
        self._check_ring(other)
        acc = dict(self.terms)
        for key, coeff in other.terms.items():
            nc = acc.get(key, RAT_ZERO) + coeff
            if nc:
                acc[key] = nc
            else:
                acc.pop(key, None)
        return PolyElem(self.ring, acc, _validate=False)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, PolyElem):
            other = self.ring.const(other)
        return self.__add__(other.__neg__())

    def __rsub__(self, other):
        return self.__neg__().__add__(self.ring.const(other))

    def __mul__(self, other):
        if not isinstance(other, PolyElem):
            q = _as_rational(other)
            if q == 0:
                return self.ring.zero()
            return PolyElem(self.ring, {k: c * q for k, c in self.terms.items()}, _validate=False)
        self._check_ring(other)
        if not self.terms or not other.terms:
            return self.ring.zero()
        acc = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                key = _key_mul(k1, k2)
                nc = acc.get(key, RAT_ZERO) + c1 * c2
                if nc:
                    acc[key] = nc
                else:
                    del acc[key]
        return PolyElem(self.ring, acc, _validate=False)

    __rmul__ = __mul__

    def scale(self, q):
        """Multiply by an exact rational (fast path)."""
        q = _as_rational(q)
        if q == 0 or not self.terms:
            return self.ring.zero()
        return PolyElem(self.ring, {k: c * q for k, c in self.terms.items()}, _validate=False)

    def __pow__(self, n):
        if not isinstance(n, int):
            raise UsageError("polynomial powers must be integers")
        if n < 0:
            return self.invert() ** (-n)
        result = self.ring.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base_needed = n >> 1
            if base_needed:
                base = base * base
            n >>= 1
        return result

    def invert(self):
        """Inverse of a monomial supported on invertible generators."""
        if len(self.terms) != 1:
            raise ExactDivisionError("only monomials can be inverted, got %s" % self)
        ((key, coeff),) = self.terms.items()
        for idx, _ in key:
            if not self.ring.is_invertible_index(idx):
                raise ExactDivisionError(
                    "cannot invert non-invertible generator %r" % self.ring.name(idx)
                )
        nkey = tuple((idx, -e) for idx, e in key)
        return PolyElem(self.ring, {nkey: 1 / coeff}, _validate=False)

    # -- substitution and differentiation -------------------------------------

    def subs(self, mapping):
        """Substitute values (PolyElem or rational) for named parameters.

        Negative powers of a substituted name require the value to be an
        invertible monomial.
        """
        ring = self.ring
        idx_map = {}
        for name, val in mapping.items():
            if not isinstance(val, PolyElem):
                val = ring.const(val)
            else:
                self._check_ring(val)
            idx_map[ring.index(name)] = val
        if not idx_map:
            return self
        out = ring.zero()
        power_cache = {}
        for key, coeff in self.terms.items():
            kept = []
            factors = []
            for idx, e in key:
                if idx in idx_map:
                    ck = (idx, e)
                    if ck not in power_cache:
                        power_cache[ck] = idx_map[idx] ** e
                    factors.append(power_cache[ck])
                else:
                    kept.append((idx, e))
            term = PolyElem(ring, {tuple(kept): coeff}, _validate=False)
            for f in factors:
                term = term * f
            out = out + term
        return out

    def derivative(self, name):
        """Formal partial derivative with respect to one generator."""
        idx = self.ring.index(name)
        acc = {}
        for key, coeff in self.terms.items():
            kd = dict(key)
            e = kd.get(idx, 0)
            if e == 0:
                continue
            nc = coeff * e
            if e == 1:
                del kd[idx]
            else:
                kd[idx] = e - 1
            nkey = tuple(sorted(kd.items()))
            prev = acc.get(nkey, RAT_ZERO) + nc
            if prev:
                acc[nkey] = prev
            else:
                acc.pop(nkey, None)
        out = PolyElem(self.ring, acc, _validate=False)
        # d/dx of x^-1 keeps exponents on the invertible side, but validate
        # in case the input itself was malformed.
        for key in out.terms:
            for i, e in key:
                if e < 0:
                    assert self.ring.is_invertible_index(i)
        return out

    def extract(self, name):
        """Group terms by the power of one name: {power: name-free PolyElem}."""
        idx = self.ring.index(name)
        groups = {}
        for key, coeff in self.terms.items():
            kd = dict(key)
            e = kd.pop(idx, 0)
            nkey = tuple(sorted(kd.items()))
            bucket = groups.setdefault(e, {})
            prev = bucket.get(nkey, RAT_ZERO) + coeff
            if prev:
                bucket[nkey] = prev
            else:
                bucket.pop(nkey, None)
        return {
            e: PolyElem(self.ring, bucket, _validate=False)
            for e, bucket in groups.items()
            if bucket
        }

    # -- serialization ---------------------------------------------------------

    def to_text(self):
        """Canonical text form: `coeff * name^exp * ...` joined by ` + `."""
        if not self.terms:
            return "0"
        chunks = []
        for key, coeff in self.sorted_terms():
            parts = [rational_to_string(coeff)]
            for idx, e in key:
                name = self.ring.name(idx)
                parts.append(name if e == 1 else "%s^%d" % (name, e))
            chunks.append(" * ".join(parts))
        return " + ".join(chunks)

    def to_json_dict(self):
        out = []
        for key, coeff in self.sorted_terms():
            exps = {self.ring.name(idx): e for idx, e in key}
            out.append({"coeff": rational_to_string(coeff), "exps": exps})
        return {"terms": out}

    def __repr__(self):
        return "PolyElem(%s)" % self.to_text()

    __str__ = __repr__


def poly_from_text(ring, text):
    """Inverse of PolyElem.to_text."""
    text = text.strip()
    if text == "0":
        return ring.zero()
    acc = ring.zero()
    for chunk in text.split(" + "):
        parts = [p.strip() for p in chunk.split(" * ")]
        coeff = rational_from_string(parts[0])
        key = {}
        for factor in parts[1:]:
            if "^" in factor:
                name, _, exp = factor.partition("^")
                e = int(exp)
            else:
                name, e = factor, 1
            key[ring.index(name)] = key.get(ring.index(name), 0) + e
        key = tuple(sorted((i, e) for i, e in key.items() if e))
        acc = acc + PolyElem(ring, {key: coeff})
    return acc


def poly_from_json_dict(ring, data):
    """Inverse of PolyElem.to_json_dict."""
    acc = ring.zero()
    for term in data["terms"]:
        coeff = rational_from_string(term["coeff"])
        key = tuple(
            sorted((ring.index(name), int(e)) for name, e in term["exps"].items() if int(e))
        )
        acc = acc + PolyElem(ring, {key: coeff})
    return acc


def poly_arith(a, b, op):
    """Exact ring arithmetic: op is one of "add", "sub", "mul"."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise UsageError("unknown op %r (expected add/sub/mul)" % op)


def _divide_by_monomial(a, b):
    ((bkey, bcoeff),) = b.terms.items()
    ring = a.ring
    acc = {}
    neg_bkey = tuple((idx, -e) for idx, e in bkey)
    for key, coeff in a.terms.items():
        nkey = _key_mul(key, neg_bkey)
        for idx, e in nkey:
            if e < 0 and not ring.is_invertible_index(idx):
                raise ExactDivisionError(
                    "inexact division: %s does not divide %s" % (b, a)
                )
        acc[nkey] = coeff / bcoeff
    return PolyElem(ring, acc, _validate=False)


def _shift_to_polynomial(p):
    """Monomial shift making all exponents non-negative; returns (shifted, key)."""
    mins = {}
    for key in p.terms:
        for idx, e in key:
            if e < mins.get(idx, 0):
                mins[idx] = e
    shift = tuple(sorted((idx, -e) for idx, e in mins.items() if e < 0))
    if not shift:
        return p, ()
    acc = {_key_mul(key, shift): coeff for key, coeff in p.terms.items()}
    return PolyElem(p.ring, acc, _validate=False), shift


def poly_div_exact(a, b):
    """Exact division a / b.

    b must be a nonzero monomial over invertible generators, or divide a
    exactly as a polynomial; anything else raises ExactDivisionError,
    signaling a solver logic fault.
    """
    if not isinstance(a, PolyElem) or not isinstance(b, PolyElem):
        raise UsageError("poly_div_exact expects PolyElem operands")
    a._check_ring(b)
    ring = a.ring
    if b.is_zero():
        raise ExactDivisionError("division by zero polynomial")
    if a.is_zero():
        return ring.zero()
    if b.is_monomial():
        return _divide_by_monomial(a, b)
    # General exact division: shift both operands into the polynomial range,
    # run graded-lex long division, and require a zero remainder.
    pa, sa = _shift_to_polynomial(a)
    pb, sb = _shift_to_polynomial(b)
    rem = dict(pa.terms)
    bterms = _key_sort_terms(pb.terms)
    bl_key, bl_coeff = bterms[0]
    q = {}
    while rem:
        rl_key, rl_coeff = _key_sort_terms(rem)[0]
        fac_key = _key_mul(rl_key, tuple((i, -e) for i, e in bl_key))
        if any(e < 0 for _, e in fac_key):
            raise ExactDivisionError(
                "inexact division: %s does not divide %s" % (b, a)
            )
        fac_coeff = rl_coeff / bl_coeff
        q[fac_key] = fac_coeff
        for key, coeff in bterms:
            nkey = _key_mul(key, fac_key)
            nc = rem.get(nkey, RAT_ZERO) - coeff * fac_coeff
            if nc:
                rem[nkey] = nc
            else:
                rem.pop(nkey, None)
    # Undo the shifts: q_true = q * sb / sa.
    adjust = _key_mul(tuple(sb), tuple((i, -e) for i, e in sa))
    acc = {}
    for key, coeff in q.items():
        nkey = _key_mul(key, adjust)
        for idx, e in nkey:
            if e < 0 and not ring.is_invertible_index(idx):
                raise ExactDivisionError(
                    "inexact division: quotient of %s by %s leaves a negative "
                    "exponent on non-invertible %r" % (a, b, ring.name(idx))
                )
        acc[nkey] = coeff
    return PolyElem(ring, acc, _validate=False)


def solve_linear(eq, name):
    """Solve eq == 0 for a name appearing linearly: returns its value.

    Requires eq = A*name + B with A, B free of the name and A dividing B
    exactly (A is typically a rational constant or an invertible monomial).
    """
    groups = eq.extract(name)
    if set(groups) - {0, 1} or 1 not in groups:
        raise ExactDivisionError("equation is not linear in %r: %s" % (name, eq))
    a = groups[1]
    b = groups.get(0, eq.ring.zero())
    return poly_div_exact(-b, a)


def _to_mp(value):
    if isinstance(value, (mpf, mpc)):
        return value
    if isinstance(value, complex):
        return mpc(value.real, value.imag)
    if isinstance(value, int):
        return mpf(value)
    if isinstance(value, float):
        return mpf(value)
    if isinstance(value, Fraction):
        return mpf(value.numerator) / mpf(value.denominator)
    if type(value) is type(RAT_ONE):
        return mpf(int(value.numerator)) / mpf(int(value.denominator))
    raise UsageError("cannot convert %r to a number" % (value,))


def rational_to_mp(q):
    return mpf(int(q.numerator)) / mpf(int(q.denominator))


def poly_eval(a, bindings, prec=None):
    """Numeric specialization at the working precision.

    bindings maps every name occurring in `a` to a number (int, float,
    complex, rational, mpf, or mpc). Inverted generators must not be bound
    to zero.
    """
    with working_precision(prec):
        vals = {}
        total = mpf(0)
        for key, coeff in a.sorted_terms():
            term = rational_to_mp(coeff)
            for idx, e in key:
                name = a.ring.name(idx)
                if name not in vals:
                    if name not in bindings:
                        raise UsageError("missing binding for %r" % name)
                    vals[name] = _to_mp(bindings[name])
                v = vals[name]
                if v == 0 and e < 0:
                    raise ExactDivisionError(
                        "%r bound to zero but carries a negative exponent" % name
                    )
                term = term * (v ** e)
            total = total + term
        return total
