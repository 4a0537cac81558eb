"""Exact multivariate polynomial and rational-function arithmetic over the rationals.

All coefficients are ``fractions.Fraction``; there is no floating point in this
layer.  Polynomials live in a shared :class:`Context` (symbol table) that fixes
the variable order; terms are keyed by exponent tuples and compared in graded
lexicographic order, so equal polynomials have identical canonical renderings.

Rational functions are kept lightly reduced: common monomial content is
cancelled, exact polynomial division is attempted in both directions, and the
denominator is normalised to leading coefficient one.  Equality is decided by
cross-multiplication, never by representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Coefficient = Union[int, Fraction, str]

STATE = "state"
PARAM = "parameter"
EPS = "epsilon"


class SymbolicError(Exception):
    """Base class for errors raised by the symbolic layer."""


class SubstitutionError(SymbolicError):
    """A substitution made a denominator vanish identically."""


def Q(x: Coefficient) -> Fraction:
    """Coerce ints, Fractions and 'p/q' strings to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


@dataclass(frozen=True)
class Symbol:
    """A named variable: a state, a parameter, or the small parameter."""

    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in (STATE, PARAM, EPS):
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if not self.name or any(ch.isspace() for ch in self.name):
            raise ValueError(f"bad symbol name {self.name!r}")

    def __repr__(self):
        return f"Symbol({self.name!r}, {self.kind})"


class Context:
    """Shared symbol table.

    Holds the ordered list of symbols (states first, then parameters, then the
    single epsilon symbol) and acts as a factory for polynomials over them.
    Immutable after construction; polynomials from different contexts never mix.
    """

    __slots__ = ("symbols", "index", "states", "params", "eps", "_zero", "_one")

    def __init__(self, states: Sequence[str], params: Sequence[str] = (), eps: str = "eps"):
        syms = [Symbol(n, STATE) for n in states]
        syms += [Symbol(n, PARAM) for n in params]
        syms.append(Symbol(eps, EPS))
        names = [s.name for s in syms]
        if len(set(names)) != len(names):
            raise ValueError("symbol names must be unique")
        self.symbols: tuple[Symbol, ...] = tuple(syms)
        self.index: dict[str, int] = {s.name: i for i, s in enumerate(syms)}
        self.states: tuple[Symbol, ...] = tuple(s for s in syms if s.kind == STATE)
        self.params: tuple[Symbol, ...] = tuple(s for s in syms if s.kind == PARAM)
        self.eps: Symbol = syms[-1]
        self._zero = Polynomial(self, {})
        nvars = len(syms)
        self._one = Polynomial(self, {(0,) * nvars: Fraction(1)})

    @property
    def nvars(self) -> int:
        return len(self.symbols)

    def zero(self) -> "Polynomial":
        return self._zero

    def one(self) -> "Polynomial":
        return self._one

    def const(self, c: Coefficient) -> "Polynomial":
        c = Q(c)
        if c == 0:
            return self._zero
        return Polynomial(self, {(0,) * self.nvars: c})

    def sym(self, name: str) -> "Polynomial":
        i = self.index[name]
        expo = [0] * self.nvars
        expo[i] = 1
        return Polynomial(self, {tuple(expo): Fraction(1)})

    def symbol(self, name: str) -> Symbol:
        return self.symbols[self.index[name]]

    def state_index(self, name: str) -> int:
        """Position of a state among the states (not the global symbol index)."""
        sym = self.symbol(name)
        if sym.kind != STATE:
            raise ValueError(f"{name} is not a state")
        return self.states.index(sym)

    def parse(self, text: str) -> "RationalFunction":
        return _Parser(self, text).parse()

    def parse_poly(self, text: str) -> "Polynomial":
        rf = self.parse(text)
        if not rf.den.is_one():
            raise ValueError(f"expected a polynomial, got denominator {rf.den}")
        return rf.num

    def with_states(self, states: Sequence[str], params: Sequence[str] | None = None) -> "Context":
        """New context with the given state names (parameters kept by default)."""
        pnames = [p.name for p in self.params] if params is None else list(params)
        return Context(states, pnames, eps=self.eps.name)

    def __repr__(self):
        return f"Context(states={[s.name for s in self.states]}, params={[p.name for p in self.params]})"


def _grlex_key(expo: tuple[int, ...]) -> tuple:
    return (sum(expo), expo)


class Polynomial:
    """Sparse multivariate polynomial with exact rational coefficients.

    ``terms`` maps exponent tuples (one entry per context symbol) to nonzero
    Fractions.  Instances are immutable by convention: no method mutates
    ``terms`` after construction.
    """

    __slots__ = ("ctx", "terms")

    def __init__(self, ctx: Context, terms: dict[tuple[int, ...], Fraction]):
        self.ctx = ctx
        self.terms = {e: c for e, c in terms.items() if c != 0}

    # -- constructors ------------------------------------------------------

    @staticmethod
    def monomial(ctx: Context, expo: tuple[int, ...], coeff: Coefficient) -> "Polynomial":
        return Polynomial(ctx, {expo: Q(coeff)})

    # -- predicates --------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_one(self) -> bool:
        return self.terms == {(0,) * self.ctx.nvars: Fraction(1)}

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self) -> Fraction:
        if self.is_zero():
            return Fraction(0)
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return next(iter(self.terms.values()))

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.ctx is not self.ctx:
                raise SymbolicError("polynomials from different contexts")
            return other
        if isinstance(other, (int, Fraction)):
            return self.ctx.const(other)
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, Fraction(0)) + c
            if s == 0:
                out.pop(e, None)
            else:
                out[e] = s
        return Polynomial(self.ctx, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.ctx, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, RationalFunction):
            return NotImplemented
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero() or other.is_zero():
            return self.ctx.zero()
        out: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, Fraction(0)) + c1 * c2
                if s == 0:
                    out.pop(e, None)
                else:
                    out[e] = s
        return Polynomial(self.ctx, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("polynomial powers must be nonnegative integers")
        result = self.ctx.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __truediv__(self, other):
        return RationalFunction.of(self) / other

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.ctx.const(other)
        if isinstance(other, RationalFunction):
            return other == self
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.ctx is other.ctx and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # -- structure ---------------------------------------------------------

    def total_degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if self.is_zero():
            return -1
        return max(sum(e) for e in self.terms)

    def degree_in(self, name: str) -> int:
        i = self.ctx.index[name]
        if self.is_zero():
            return -1
        return max(e[i] for e in self.terms)

    def state_degree(self) -> int:
        """Total degree counting state symbols only."""
        if self.is_zero():
            return -1
        idx = [self.ctx.index[s.name] for s in self.ctx.states]
        return max(sum(e[i] for i in idx) for e in self.terms)

    def symbols_used(self) -> set[str]:
        used: set[str] = set()
        for e in self.terms:
            for i, k in enumerate(e):
                if k > 0:
                    used.add(self.ctx.symbols[i].name)
        return used

    def leading(self) -> tuple[tuple[int, ...], Fraction]:
        """Leading term in graded lexicographic order."""
        if self.is_zero():
            raise ValueError("zero polynomial has no leading term")
        e = max(self.terms, key=_grlex_key)
        return e, self.terms[e]

    def sorted_terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        return sorted(self.terms.items(), key=lambda t: _grlex_key(t[0]), reverse=True)

    # -- calculus ----------------------------------------------------------

    def diff(self, name: str) -> "Polynomial":
        i = self.ctx.index[name]
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.terms.items():
            k = e[i]
            if k == 0:
                continue
            ne = list(e)
            ne[i] = k - 1
            ne_t = tuple(ne)
            s = out.get(ne_t, Fraction(0)) + c * k
            if s == 0:
                out.pop(ne_t, None)
            else:
                out[ne_t] = s
        return Polynomial(self.ctx, out)

    # -- substitution and evaluation ----------------------------------------

    def subs(self, bindings: Mapping[str, "Polynomial | Coefficient"]) -> "Polynomial":
        """Simultaneous substitution with polynomial (or constant) values."""
        binds: dict[int, Polynomial] = {}
        for name, val in bindings.items():
            i = self.ctx.index[name]
            binds[i] = val if isinstance(val, Polynomial) else self.ctx.const(val)
        if not binds:
            return self
        total = self.ctx.zero()
        pow_cache: dict[tuple[int, int], Polynomial] = {}
        for e, c in self.terms.items():
            rest = list(e)
            factor = self.ctx.const(c)
            for i, val in binds.items():
                k = e[i]
                if k == 0:
                    continue
                rest[i] = 0
                key = (i, k)
                if key not in pow_cache:
                    pow_cache[key] = val ** k
                factor = factor * pow_cache[key]
            term = Polynomial.monomial(self.ctx, tuple(rest), 1)
            total = total + term * factor
        return total

    def subs_rf(self, bindings: Mapping[str, "RationalFunction | Polynomial | Coefficient"]) -> "RationalFunction":
        """Simultaneous substitution allowing rational-function values."""
        binds: dict[int, RationalFunction] = {}
        for name, val in bindings.items():
            i = self.ctx.index[name]
            binds[i] = RationalFunction.coerce(self.ctx, val)
        total = RationalFunction.of(self.ctx.zero())
        pow_cache: dict[tuple[int, int], RationalFunction] = {}
        for e, c in self.terms.items():
            rest = list(e)
            factor = RationalFunction.of(self.ctx.const(c))
            for i, val in binds.items():
                k = e[i]
                if k == 0:
                    continue
                rest[i] = 0
                key = (i, k)
                if key not in pow_cache:
                    pow_cache[key] = val ** k
                factor = factor * pow_cache[key]
            term = RationalFunction.of(Polynomial.monomial(self.ctx, tuple(rest), 1))
            total = total + term * factor
        return total

    def eval(self, point: Mapping[str, Coefficient]) -> Fraction:
        """Exact evaluation; every symbol occurring in the polynomial must be bound."""
        vals: dict[int, Fraction] = {self.ctx.index[n]: Q(v) for n, v in point.items()}
        total = Fraction(0)
        for e, c in self.terms.items():
            prod = c
            for i, k in enumerate(e):
                if k == 0:
                    continue
                if i not in vals:
                    raise SymbolicError(f"unbound symbol {self.ctx.symbols[i].name} in evaluation")
                prod *= vals[i] ** k
            total += prod
        return total

    # -- epsilon grading -----------------------------------------------------

    def eps_coefficients(self) -> dict[int, "Polynomial"]:
        """Split into {k: coefficient of eps^k}, each coefficient eps-free."""
        i = self.ctx.index[self.ctx.eps.name]
        out: dict[int, dict[tuple[int, ...], Fraction]] = {}
        for e, c in self.terms.items():
            k = e[i]
            ne = list(e)
            ne[i] = 0
            out.setdefault(k, {})[tuple(ne)] = c
        return {k: Polynomial(self.ctx, t) for k, t in out.items()}

    def eps_free(self) -> bool:
        i = self.ctx.index[self.ctx.eps.name]
        return all(e[i] == 0 for e in self.terms)

    # -- division -----------------------------------------------------------

    def exact_divide(self, divisor: "Polynomial") -> "Polynomial | None":
        """Return self/divisor when the division is exact, else None."""
        if divisor.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        if self.is_zero():
            return self.ctx.zero()
        if divisor.is_constant():
            inv = 1 / divisor.constant_value()
            return Polynomial(self.ctx, {e: c * inv for e, c in self.terms.items()})
        lead_e, lead_c = divisor.leading()
        quotient: dict[tuple[int, ...], Fraction] = {}
        rem = self
        # Graded lex is multiplicative, so exactness shows up term by term.
        while not rem.is_zero():
            re, rc = rem.leading()
            qe = tuple(a - b for a, b in zip(re, lead_e))
            if any(k < 0 for k in qe):
                return None
            qc = rc / lead_c
            quotient[qe] = qc
            rem = rem - Polynomial.monomial(self.ctx, qe, qc) * divisor
        return Polynomial(self.ctx, quotient)

    def monomial_content(self) -> tuple[int, ...]:
        """Componentwise minimum exponent over all terms (zero poly: all zeros)."""
        if self.is_zero():
            return (0,) * self.ctx.nvars
        mins = None
        for e in self.terms:
            mins = e if mins is None else tuple(min(a, b) for a, b in zip(mins, e))
        return mins  # type: ignore[return-value]

    def shift_down(self, content: tuple[int, ...]) -> "Polynomial":
        return Polynomial(
            self.ctx,
            {tuple(a - b for a, b in zip(e, content)): c for e, c in self.terms.items()},
        )

    # -- rendering -----------------------------------------------------------

    def render(self) -> str:
        """Canonical text form: graded-lex descending terms, explicit '*' and '^'.

        Within a monomial, parameters are printed before states (rate-law
        style); the term order itself uses the fixed symbol indices.
        """
        if self.is_zero():
            return "0"
        order = [self.ctx.index[p.name] for p in self.ctx.params]
        order += [self.ctx.index[s.name] for s in self.ctx.states]
        order.append(self.ctx.index[self.ctx.eps.name])
        parts: list[str] = []
        for e, c in self.sorted_terms():
            factors = []
            for i in order:
                k = e[i]
                if k == 0:
                    continue
                name = self.ctx.symbols[i].name
                factors.append(name if k == 1 else f"{name}^{k}")
            if not factors:
                body = _render_coeff(abs(c), standalone=True)
            elif abs(c) == 1:
                body = "*".join(factors)
            else:
                body = _render_coeff(abs(c), standalone=False) + "*" + "*".join(factors)
            if not parts:
                parts.append(body if c > 0 else "-" + body)
            else:
                parts.append(("+ " if c > 0 else "- ") + body)
        return " ".join(parts)

    def __str__(self):
        return self.render()

    def __repr__(self):
        return f"Poly({self.render()})"


def _render_coeff(c: Fraction, standalone: bool) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


# Cap on exact-division attempts during rational-function normalisation;
# beyond this the cancellation is skipped (correctness is unaffected since
# equality uses cross-multiplication).
_CANCEL_TERM_LIMIT = 2000


class RationalFunction:
    """Quotient of two polynomials over the same context.

    The denominator is never identically zero.  Reduction cancels monomial
    content and exact polynomial factors; the denominator's leading coefficient
    is normalised to one.  Equality is by cross-multiplication.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: Polynomial, den: Polynomial):
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.ctx is not den.ctx:
            raise SymbolicError("numerator and denominator from different contexts")
        num, den = _reduce_pair(num, den)
        self.num = num
        self.den = den

    @property
    def ctx(self) -> Context:
        return self.num.ctx

    @staticmethod
    def of(p: Polynomial) -> "RationalFunction":
        return RationalFunction(p, p.ctx.one())

    @staticmethod
    def coerce(ctx: Context, v) -> "RationalFunction":
        if isinstance(v, RationalFunction):
            if v.ctx is not ctx:
                raise SymbolicError("rational functions from different contexts")
            return v
        if isinstance(v, Polynomial):
            return RationalFunction.of(v)
        return RationalFunction.of(ctx.const(v))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.is_one()

    def as_polynomial(self) -> Polynomial:
        if not self.den.is_one():
            raise ValueError(f"{self} is not a polynomial")
        return self.num

    # -- arithmetic ----------------------------------------------------------

    def _coerce_other(self, other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            if other.ctx is not self.ctx:
                raise SymbolicError("rational functions from different contexts")
            return other
        if isinstance(other, Polynomial):
            return RationalFunction.of(other)
        if isinstance(other, (int, Fraction)):
            return RationalFunction.of(self.ctx.const(other))
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other):
        other = self._coerce_other(other)
        if other is NotImplemented:
            return NotImplemented
        if self.den == other.den:
            return RationalFunction(self.num + other.num, self.den)
        # common-denominator shortcuts keep the factors from piling up
        q = other.den.exact_divide(self.den)
        if q is not None:
            return RationalFunction(self.num * q + other.num, other.den)
        q = self.den.exact_divide(other.den)
        if q is not None:
            return RationalFunction(self.num + other.num * q, self.den)
        return RationalFunction(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        other = self._coerce_other(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce_other(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self.num, self.den
        c, d = other.num, other.den
        # cross-cancel before multiplying to control swell
        if not d.is_one() and not a.is_zero():
            q = a.exact_divide(d)
            if q is not None:
                a, d = q, d.ctx.one()
            elif not a.is_constant():
                q = d.exact_divide(a)
                if q is not None:
                    a, d = a.ctx.one(), q
        if not b.is_one() and not c.is_zero():
            q = c.exact_divide(b)
            if q is not None:
                c, b = q, b.ctx.one()
            elif not c.is_constant():
                q = b.exact_divide(c)
                if q is not None:
                    c, b = c.ctx.one(), q
        return RationalFunction(a * c, b * d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce_other(other)
        if other is NotImplemented:
            return NotImplemented
        if other.num.is_zero():
            raise ZeroDivisionError("division by zero rational function")
        return RationalFunction(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        other = self._coerce_other(other)
        if other is NotImplemented:
            return NotImplemented
        return other / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise ValueError("rational function powers must be integers")
        if n < 0:
            return RationalFunction(self.den, self.num) ** (-n)
        return RationalFunction(self.num ** n, self.den ** n)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, Polynomial)):
            other = self._coerce_other(other)
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return (self.num * other.den) == (other.num * self.den)

    def __hash__(self):
        # Weak but consistent: equal RFs reduce monomial content identically
        # only in simple cases, so hash on the zero/nonzero distinction plus
        # context identity.  RFs are not meant for hashing-heavy use.
        return hash((id(self.ctx), self.num.is_zero()))

    # -- calculus -------------------------------------------------------------

    def diff(self, name: str) -> "RationalFunction":
        """Exact partial derivative (quotient rule)."""
        dn = self.num.diff(name)
        if self.den.is_one():
            return RationalFunction.of(dn)
        dd = self.den.diff(name)
        if dd.is_zero():
            return RationalFunction(dn, self.den)
        return RationalFunction(dn * self.den - self.num * dd, self.den * self.den)

    def subs(self, bindings: Mapping[str, "RationalFunction | Polynomial | Coefficient"]) -> "RationalFunction":
        num = self.num.subs_rf(bindings)
        den = self.den.subs_rf(bindings)
        if den.is_zero():
            names = ", ".join(sorted(bindings))
            raise SubstitutionError(
                f"denominator {self.den.render()} vanishes identically under bindings {{{names}}}"
            )
        return num / den

    def eval(self, point: Mapping[str, Coefficient]) -> Fraction:
        d = self.den.eval(point)
        if d == 0:
            raise ZeroDivisionError(f"denominator {self.den.render()} vanishes at sample point")
        return self.num.eval(point) / d

    def evalf(self, point: Mapping[str, float]) -> float:
        num = 0.0
        den = 0.0
        for poly, acc in ((self.num, "n"), (self.den, "d")):
            total = 0.0
            for e, c in poly.terms.items():
                prod = float(c)
                for i, k in enumerate(e):
                    if k:
                        prod *= point[poly.ctx.symbols[i].name] ** k
                total += prod
            if acc == "n":
                num = total
            else:
                den = total
        return num / den

    # -- epsilon structure ------------------------------------------------------

    def eps_expansion(self) -> tuple[int, "RationalFunction"]:
        """(valuation k, leading coefficient) of the expansion in the small parameter.

        Requires the denominator to have nonzero epsilon-order-zero part after
        removing common eps powers; holds for every quotient formed from
        eps-free denominators.
        """
        if self.is_zero():
            return (0, self)
        num_parts = self.num.eps_coefficients()
        den_parts = self.den.eps_coefficients()
        vn = min(num_parts)
        vd = min(den_parts)
        lead = RationalFunction(num_parts[vn], den_parts[vd])
        return (vn - vd, lead)

    def eps_free(self) -> bool:
        return self.num.eps_free() and self.den.eps_free()

    # -- rendering ---------------------------------------------------------------

    def render(self) -> str:
        if self.den.is_one():
            return self.num.render()
        num = self.num.render()
        den = self.den.render()
        if len(self.num.terms) > 1:
            num = f"({num})"
        if len(self.den.terms) > 1 or "*" in den or "^" in den:
            den = f"({den})"
        return f"{num} / {den}"

    def __str__(self):
        return self.render()

    def __repr__(self):
        return f"RF({self.render()})"


def _reduce_pair(num: Polynomial, den: Polynomial) -> tuple[Polynomial, Polynomial]:
    ctx = num.ctx
    if num.is_zero():
        return ctx.zero(), ctx.one()
    # monomial content
    cn = num.monomial_content()
    cd = den.monomial_content()
    common = tuple(min(a, b) for a, b in zip(cn, cd))
    if any(common):
        num = num.shift_down(common)
        den = den.shift_down(common)
    # exact syntactic factor cancellation
    if not den.is_constant() and len(num.terms) * len(den.terms) <= _CANCEL_TERM_LIMIT:
        q = num.exact_divide(den)
        if q is not None:
            num, den = q, ctx.one()
        else:
            q = den.exact_divide(num)
            if q is not None:
                # num/den = 1/q
                num, den = ctx.one(), q
    # normalise the denominator's leading coefficient to 1
    _, lc = den.leading()
    if lc != 1:
        inv = 1 / lc
        num = Polynomial(ctx, {e: c * inv for e, c in num.terms.items()})
        den = Polynomial(ctx, {e: c * inv for e, c in den.terms.items()})
    return num, den


def differentiate(p: "Polynomial | RationalFunction", name: str) -> RationalFunction:
    """Exact partial derivative, returned as a rational function."""
    if isinstance(p, Polynomial):
        return RationalFunction.of(p.diff(name))
    return p.diff(name)


def substitute(p: "Polynomial | RationalFunction", bindings: Mapping[str, object]) -> RationalFunction:
    """Simultaneous exact substitution, returned as a rational function."""
    if isinstance(p, Polynomial):
        rf = RationalFunction.of(p)
    else:
        rf = p
    return rf.subs(bindings)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# Expression parser
# ---------------------------------------------------------------------------


class _Parser:
    """Recursive-descent parser for '+ - * / ^ ( )' expressions over a context.

    Numbers are integers or p/q handled through division; names must exist in
    the context.  Produces a RationalFunction.
    """

    def __init__(self, ctx: Context, text: str):
        self.ctx = ctx
        self.tokens = self._lex(text)
        self.pos = 0

    @staticmethod
    def _lex(text: str) -> list[str]:
        tokens: list[str] = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
            elif ch in "+-*/^()":
                tokens.append(ch)
                i += 1
            elif ch.isdigit():
                j = i
                while j < len(text) and text[j].isdigit():
                    j += 1
                tokens.append(text[i:j])
                i = j
            elif ch.isalpha() or ch == "_":
                j = i
                while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                tokens.append(text[i:j])
                i = j
            else:
                raise ValueError(f"unexpected character {ch!r} in expression")
        return tokens

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ValueError("unexpected end of expression")
        self.pos += 1
        return tok

    def parse(self) -> RationalFunction:
        rf = self.expr()
        if self.peek() is not None:
            raise ValueError(f"trailing input at token {self.peek()!r}")
        return rf

    def expr(self) -> RationalFunction:
        sign = 1
        while self.peek() in ("+", "-"):
            if self.take() == "-":
                sign = -sign
        total = self.term() * sign
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.term()
            total = total + rhs if op == "+" else total - rhs
        return total

    def term(self) -> RationalFunction:
        total = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take()
            rhs = self.factor()
            total = total * rhs if op == "*" else total / rhs
        return total

    def factor(self) -> RationalFunction:
        if self.peek() == "-":
            self.take()
            return -self.factor()
        base = self.atom()
        if self.peek() == "^":
            self.take()
            neg = False
            if self.peek() == "-":
                self.take()
                neg = True
            tok = self.take()
            if not tok.isdigit():
                raise ValueError(f"expected integer exponent, got {tok!r}")
            n = int(tok)
            return base ** (-n if neg else n)
        return base

    def atom(self) -> RationalFunction:
        tok = self.take()
        if tok == "(":
            inner = self.expr()
            if self.take() != ")":
                raise ValueError("unbalanced parentheses")
            return inner
        if tok.isdigit():
            return RationalFunction.of(self.ctx.const(int(tok)))
        if tok in self.ctx.index:
            return RationalFunction.of(self.ctx.sym(tok))
        raise ValueError(f"unknown symbol {tok!r}")


PolyVector = list  # list[Polynomial]; alias used for readability in signatures


def poly_vector(ctx: Context, exprs: Iterable[str]) -> list[Polynomial]:
    return [ctx.parse_poly(s) for s in exprs]
