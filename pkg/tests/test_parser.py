"""Parser, printer round-trip, and grounder behaviour."""

import pytest

from igov import parse, print_spec, ground
from igov import terms as T
from igov.errors import (
    ExplosionLimitError,
    IgovSyntaxError,
    TypeMismatchError,
    UnknownSymbolError,
)

CFR_FRAGMENT = """
mode mlg;
institution cfr level 3;
type Agent = {ada, charles};
type Prov = {isp};
type Data = {content, metadata, personal};
exogenous event exStoreData(Prov, Agent, Data);
inst event storeData(Prov, Agent, Data);
inst event nonConsensualDataProcessing(Agent);
fluent consentedDataProcessing(Agent, Prov);
noninertial fluent unfairDataProcessing(Agent);
rule gx: exStoreData(C, A, D) generates storeData(C, A, D);
rule g2: storeData(C, A, metadata) generates storeData(C, A, personal);
rule g3: storeData(C, A, personal) generates nonConsensualDataProcessing(A)
    in {not consentedDataProcessing(A, C)};
rule d1: obl(nonConsensualDataProcessing(A), now) derives unfairDataProcessing(A);
initially pro(unfairDataProcessing(A), never);
initially pow(storeData(C, A, D));
"""


def test_parse_cfr_fragment_initial_prohibition_reaches_delta():
    graph = ground(parse(CFR_FRAGMENT))
    cfr = graph.institutions[0]
    expected = T.pro(T.atom("unfairDataProcessing", "ada"), T.NEVER_T)
    assert expected in cfr.delta
    assert T.pro(T.atom("unfairDataProcessing", "charles"), T.NEVER_T) in cfr.delta


def test_parse_empty_file():
    ast = parse("")
    assert ast.institutions == []


def test_undeclared_symbol_rejected():
    bad = CFR_FRAGMENT + "\nrule oops: storeData(C, A, personal) generates mystery(A);\n"
    with pytest.raises(UnknownSymbolError):
        ground(parse(bad))


def test_syntax_error_carries_position():
    with pytest.raises(IgovSyntaxError) as e:
        parse("institution;")
    assert e.value.line == 1


def test_ground_expands_over_agents():
    graph = ground(parse(CFR_FRAGMENT))
    cfr = graph.institutions[0]
    # g2 grounds over Prov x Agent: 1 x 2 substitutions.
    g2 = [g for g in cfr.gen_rules if g.rule_id == "g2"]
    assert len(g2) == 2


def test_ground_no_variables_is_identity():
    src = """
institution solo level 1;
type Agent = {ada};
exogenous event ping(Agent);
inst event pong(Agent);
fluent seen(Agent);
rule r1: ping(ada) generates pong(ada);
rule c1: pong(ada) initiates seen(ada);
initially pow(pong(ada));
"""
    graph = ground(parse(src))
    inst = graph.institutions[0]
    assert len(inst.gen_rules) == 1
    assert inst.gen_rules[0].triggers == (T.atom("ping", "ada"),)
    assert inst.gen_rules[0].outputs == (T.atom("pong", "ada"),)


def test_ground_deterministic_and_order_independent():
    g1 = ground(parse(CFR_FRAGMENT))
    g2 = ground(parse(CFR_FRAGMENT))
    i1, i2 = g1.institutions[0], g2.institutions[0]
    assert i1.delta == i2.delta
    assert [r.instance_id for r in i1.all_rules()] == [r.instance_id for r in i2.all_rules()]


def test_ground_symbols_all_declared():
    graph = ground(parse(CFR_FRAGMENT))
    inst = graph.institutions[0]
    for r in inst.all_rules():
        for t in r.triggers + r.outputs:
            assert inst.knows_term(t), t


def test_explosion_limit():
    with pytest.raises(ExplosionLimitError):
        ground(parse(CFR_FRAGMENT), max_instances=3)


def test_bindings_filter_substitutions():
    src = """
institution solo level 1;
type Agent = {ada, bertrand};
exogenous event greet(Agent, Agent);
inst event selfgreet(Agent);
rule b1: greet(A, B) generates selfgreet(A) where A = B;
initially pow(selfgreet(A));
"""
    graph = ground(parse(src))
    rules = [g for g in graph.institutions[0].gen_rules if g.rule_id == "b1"]
    assert len(rules) == 2  # only A = B substitutions survive
    for g in rules:
        sub = dict(g.subst)
        assert sub["A"] == sub["B"]


def test_roundtrip_print_parse():
    ast = parse(CFR_FRAGMENT)
    printed = print_spec(ast)
    ast2 = parse(printed)
    assert print_spec(ast2) == printed
    assert ast2.mode == ast.mode
    assert [i.name for i in ast2.institutions] == [i.name for i in ast.institutions]
    assert [len(i.rules) for i in ast2.institutions] == [len(i.rules) for i in ast.institutions]


def test_governs_must_point_upward():
    src = """
institution low level 2;
type Agent = {ada};
fluent f(Agent);
institution high level 1;
type Agent = {ada};
fluent f(Agent);
governs low by high;
"""
    with pytest.raises(TypeMismatchError):
        ground(parse(src))


def test_rulechange_requires_horizon():
    src = """
mode rulechange;
institution sgov;
obs event vote(op, ruleid, time);
fluent crim;
modrule leg0: vote(Op, Id, T) generates mod(Op, Id, T);
initially active(leg0);
"""
    with pytest.raises(TypeMismatchError):
        ground(parse(src))
    graph = ground(parse(src), horizon=2)
    inst = graph.institutions[0]
    # vote grounds over 2 ops x 1 declared-rule id x 3 instants.
    assert len(inst.gen_rules) == 2 * 1 * 3
