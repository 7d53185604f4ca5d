"""Core term model: interning, norm equivalence, entailment."""

import itertools

import pytest
from hypothesis import given, strategies as st

from igov import terms as T
from igov.terms import (
    Context,
    atom,
    canon,
    entails_context,
    entails_fluent,
    norm_equiv,
    obl,
    pro,
)

pay = atom("pay")
fine = atom("fine")
a = atom("a")
d = atom("d")
q = atom("q")


def test_interning_identity():
    assert obl(pay, fine) is obl(pay, fine)
    assert pro(a, d) is pro(a, d)
    assert obl(obl(a, d), T.NOW_T) is obl(obl(a, d), T.NOW_T)


def test_norm_equiv_modality_swap():
    # Obliging pay before fine coincides with prohibiting fine before pay.
    assert norm_equiv(obl(pay, fine), pro(fine, pay))


def test_norm_equiv_reflexive():
    assert norm_equiv(obl(pay, fine), obl(pay, fine))


def test_norm_equiv_higher_order_swap():
    n = obl(a, d)
    assert norm_equiv(obl(n, q), pro(q, n))


def test_norm_equiv_inner_rewrite():
    # obl(obl(a,d), q) == obl(pro(d,a), q): same modality, equivalent aims.
    assert norm_equiv(obl(obl(a, d), q), obl(pro(d, a), q))


def _all_norms(depth: int):
    """Every normative fluent of nesting depth <= depth over {a, d}."""
    level = [a, d, T.NOW_T, T.NEVER_T]
    norms = []
    for _ in range(depth):
        new = [
            f(x, y)
            for f in (obl, pro)
            for x, y in itertools.product(level, repeat=2)
        ]
        norms.extend(new)
        level = [a, d, T.NOW_T, T.NEVER_T] + new[: 24]  # keep the blow-up in check
    return norms


def _oracle_equiv(x, y) -> bool:
    """Direct recursion on the defining clauses: syntactic identity, the
    modality swap, and congruence."""
    if x is y:
        return True
    if not (T.is_norm(x) and T.is_norm(y)):
        return False
    xa, xd = x.args
    ya, yd = y.args
    if x.head == y.head:
        return _oracle_equiv(xa, ya) and _oracle_equiv(xd, yd)
    return _oracle_equiv(xa, yd) and _oracle_equiv(xd, ya)


def test_norm_equiv_matches_oracle_to_depth_3():
    norms = _all_norms(3)
    assert len(norms) > 200
    for x in norms:
        for y in norms:
            assert norm_equiv(x, y) == _oracle_equiv(x, y), (x, y)


def test_norm_equiv_is_equivalence_relation_to_depth_3():
    norms = _all_norms(2)
    for x in norms:
        assert norm_equiv(x, x)
    sample = norms[:64]
    for x in sample:
        for y in sample:
            assert norm_equiv(x, y) == norm_equiv(y, x)
            if norm_equiv(x, y):
                for z in sample:
                    if norm_equiv(y, z):
                        assert norm_equiv(x, z)


def test_entails_fluent_membership():
    state = frozenset({obl(a, d), q})
    assert entails_fluent(state, q)
    assert entails_fluent(state, obl(a, d))


def test_entails_fluent_equivalence():
    state = frozenset({pro(fine, pay)})
    assert entails_fluent(state, obl(pay, fine))


def test_entails_fluent_empty_state():
    assert not entails_fluent(frozenset(), obl(pay, fine))
    assert not entails_fluent(frozenset(), q)


def test_entails_context_negative():
    consented = atom("consented", "ada")
    state = frozenset({consented})
    assert not entails_context(state, Context(neg=[consented]))


def test_entails_context_empty_always_holds():
    assert entails_context(frozenset(), Context())
    assert entails_context(frozenset({q}), Context())


def test_entails_context_equivalence():
    state = frozenset({pro(d, a)})
    assert entails_context(state, Context(pos=[obl(a, d)]))


def _small_states(fluents, max_size=2):
    out = [frozenset()]
    for r in range(1, max_size + 1):
        out.extend(frozenset(c) for c in itertools.combinations(fluents, r))
    return out


def test_entails_context_exhaustive_small_state_oracle():
    fluents = [q, obl(a, d), pro(d, a), pro(a, d)]
    for state in _small_states(fluents):
        for f in fluents:
            expected = any(_oracle_equiv(f, m) or f is m for m in state)
            assert entails_fluent(state, f) == expected


_atoms = st.sampled_from([a, d, q, pay, fine, T.NOW_T, T.NEVER_T])


def _norm_strategy():
    base = _atoms
    level1 = st.builds(lambda m, x, y: T.mk(m, x, y), st.sampled_from([T.OBL, T.PRO]), base, base)
    level2 = st.builds(
        lambda m, x, y: T.mk(m, x, y),
        st.sampled_from([T.OBL, T.PRO]),
        st.one_of(base, level1),
        st.one_of(base, level1),
    )
    return st.one_of(level1, level2)


@given(
    state=st.frozensets(st.one_of(_atoms, _norm_strategy()), max_size=5),
    xs=st.lists(st.one_of(_atoms, _norm_strategy()), max_size=3),
    ys=st.lists(st.one_of(_atoms, _norm_strategy()), max_size=3),
)
def test_context_conjunction_splits(state, xs, ys):
    both = Context(pos=xs + ys)
    assert entails_context(state, both) == (
        entails_context(state, Context(pos=xs))
        and entails_context(state, Context(pos=ys))
    )


@given(state=st.frozensets(_norm_strategy(), min_size=1, max_size=4), f=_norm_strategy())
def test_entailment_invariant_under_equivalent_replacement(state, f):
    before = entails_fluent(state, f)
    swapped = frozenset(
        T.mk(T.PRO, m.args[1], m.args[0]) if m.head == T.OBL else T.mk(T.OBL, m.args[1], m.args[0])
        for m in state
    )
    assert entails_fluent(swapped, f) == before
