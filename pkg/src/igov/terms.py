"""Interned term model for institutional reasoning.

Everything an institution talks about is a Term: events (observable,
institutional, compliance, rule-modification), fluents (domain facts,
empowerments, active-rule markers) and normative fluents obl(aim, deadline)
/ pro(aim, deadline) whose aim and deadline may themselves be events,
fluents or further norms.

Terms are hash-consed: building the same term twice yields the same object,
so deeply nested norms compare and hash in O(1).  This matters because the
deontic-abstraction closure repeatedly constructs nested norms.

Norm equivalence follows the discharge/violation reading: obliging `a`
before `d` and prohibiting `d` before `a` coincide in when they are
discharged and violated, so ``obl(a, d) == pro(d, a)`` up to equivalence,
recursively through nested norms.  We realise the relation as equality of
canonical forms (every prohibition is rewritten to its obligation twin),
which makes it a genuine equivalence relation at every nesting depth.
"""

from __future__ import annotations

from typing import Iterable, Iterator

# Heads with built-in meaning; everything else is a declared symbol.
OBL = "obl"
PRO = "pro"
DISCH = "disch"
VIOL = "viol"
POW = "pow"
MOD = "mod"
ACTIVE = "active"
NOW = "now"
NEVER = "never"
NULL = "null"

RESERVED_HEADS = frozenset(
    {OBL, PRO, DISCH, VIOL, POW, MOD, ACTIVE, NOW, NEVER, NULL}
)

MOD_OPS = ("act", "deact")


class Term:
    """An interned term; compare with ``is`` / ``==`` interchangeably."""

    __slots__ = ("head", "args", "_hash", "_canon")

    def __init__(self, head: str, args: tuple):
        self.head = head
        self.args = args
        self._hash = hash((head, args))
        self._canon = None  # filled lazily

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return self is other  # interning guarantees identity

    def __repr__(self) -> str:
        return f"Term({term_str(self)})"

    def __lt__(self, other: "Term") -> bool:
        # Deterministic ordering for reports and canonical serialization.
        return term_key(self) < term_key(other)


_INTERN: dict[tuple, Term] = {}


def mk(head: str, *args) -> Term:
    """Intern and return the term ``head(*args)``."""
    key = (head, args)
    t = _INTERN.get(key)
    if t is None:
        t = Term(head, args)
        _INTERN[key] = t
    return t


def atom(name: str, *args: str) -> Term:
    """A declared event or fluent symbol applied to constants."""
    return mk(name, *args)


def obl(aim: Term, deadline: Term) -> Term:
    return mk(OBL, aim, deadline)


def pro(aim: Term, deadline: Term) -> Term:
    return mk(PRO, aim, deadline)


def disch(norm: Term) -> Term:
    return mk(DISCH, norm)


def viol(norm: Term) -> Term:
    return mk(VIOL, norm)


def pow_(event: Term) -> Term:
    return mk(POW, event)


def mod(op: str, rule_id: str, t: int) -> Term:
    if op not in MOD_OPS:
        raise ValueError(f"modification op must be one of {MOD_OPS}: {op}")
    return mk(MOD, op, rule_id, t)


def active(rule_id: str) -> Term:
    return mk(ACTIVE, rule_id)


NOW_T = mk(NOW)
NEVER_T = mk(NEVER)
NULL_T = mk(NULL)


def is_norm(t: Term) -> bool:
    return t.head is OBL or t.head is PRO or t.head in (OBL, PRO)


def is_compliance(t: Term) -> bool:
    return t.head in (DISCH, VIOL)


def is_mod(t: Term) -> bool:
    return t.head == MOD


def norm_aim(t: Term) -> Term:
    return t.args[0]


def norm_deadline(t: Term) -> Term:
    return t.args[1]


def canon(t: Term) -> Term:
    """Canonical form: prohibitions become their equivalent obligations.

    pro(a, d) is equivalent to obl(d, a); applying the rewrite bottom-up
    yields a normal form, so two norms are equivalent iff their canonical
    forms are identical.
    """
    c = t._canon
    if c is not None:
        return c
    if t.head == PRO:
        c = mk(OBL, canon(t.args[1]), canon(t.args[0]))
    elif t.head == OBL:
        c = mk(OBL, canon(t.args[0]), canon(t.args[1]))
    elif t.head in (DISCH, VIOL, POW):
        c = mk(t.head, canon(t.args[0]))
    else:
        c = t
    t._canon = c
    return c


def norm_equiv(a: Term, b: Term) -> bool:
    """Whether two fluents coincide in their discharge/violation conditions."""
    return a is b or canon(a) is canon(b)


def entails_fluent(state: frozenset, f: Term) -> bool:
    """State entailment: membership, or an equivalent norm is a member."""
    if f in state:
        return True
    if is_norm(f):
        cf = canon(f)
        for m in state:
            if is_norm(m) and canon(m) is cf:
                return True
    return False


class Context:
    """A social context: positive and weakly negative fluent conditions.

    Holds in a state when every positive fluent is entailed and no negative
    fluent is entailed; the empty context always holds.
    """

    __slots__ = ("pos", "neg")

    def __init__(self, pos: Iterable[Term] = (), neg: Iterable[Term] = ()):
        self.pos = frozenset(pos)
        self.neg = frozenset(neg)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Context)
            and self.pos == other.pos
            and self.neg == other.neg
        )

    def __hash__(self) -> int:
        return hash((self.pos, self.neg))

    def __repr__(self) -> str:
        return f"Context(pos={sorted(map(term_str, self.pos))}, neg={sorted(map(term_str, self.neg))})"

    def is_empty(self) -> bool:
        return not self.pos and not self.neg

    def literals(self) -> Iterator[tuple[bool, Term]]:
        for f in self.pos:
            yield True, f
        for f in self.neg:
            yield False, f


EMPTY_CONTEXT = Context()


def entails_context(state: frozenset, x: Context) -> bool:
    return all(entails_fluent(state, f) for f in x.pos) and not any(
        entails_fluent(state, f) for f in x.neg
    )


def term_str(t: Term) -> str:
    """Render a term in concrete syntax, e.g. ``obl(pay(ada), now)``."""
    if t.head == MOD:
        op, rid, at = t.args
        return f"mod({op}, {rid}, {at})"
    if not t.args:
        return t.head
    inner = ", ".join(
        term_str(a) if isinstance(a, Term) else str(a) for a in t.args
    )
    return f"{t.head}({inner})"


def term_key(t: Term) -> str:
    return term_str(t)


def sorted_terms(ts: Iterable[Term]) -> list[Term]:
    return sorted(ts, key=term_key)


def subterms(t: Term) -> Iterator[Term]:
    """All Term-valued subterms, including ``t`` itself."""
    yield t
    for a in t.args:
        if isinstance(a, Term):
            yield from subterms(a)


def norm_depth(t: Term) -> int:
    """Nesting depth of normative fluents (non-norms have depth 0)."""
    if not is_norm(t):
        return 0
    inner = (a for a in t.args if isinstance(a, Term))
    return 1 + max((norm_depth(a) for a in inner), default=0)
