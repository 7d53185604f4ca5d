"""Grounder: expands rule templates into ground institutions.

Variables are typed by the argument positions they occupy in declared
symbols (monadic typing); every template is expanded over all
type-respecting substitutions that satisfy its binding constraints.
Rule identifiers are template-level: every ground instance of a template
carries the declared id plus its substitution.

Besides expansion, grounding derives each institution's normative
signature: concrete norms (imposed by consequence rules or the initial
state, inertial) and the abstract-norm universe (norms only producible by
deontic abstraction or passed up from governed institutions, non-inertial).
The abstract universe is computed as a closure over the counts-as pair
graph in canonical norm space, capped at the nesting depth present in the
specification.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import (
    ArityMismatchError,
    EmptyTypeError,
    ExplosionLimitError,
    TypeMismatchError,
    UnknownSymbolError,
    UntypedVariableError,
)
from .spec import (
    BUILTIN_OP_TYPE,
    BUILTIN_RULEID_TYPE,
    BUILTIN_TIME_TYPE,
    CtxAnd,
    CtxImplies,
    CtxLit,
    CtxNot,
    CtxOr,
    CtxRetro,
    CtxTemporal,
    CtxTrue,
    GovernanceGraph,
    GroundRule,
    InstitutionDecl,
    InstitutionSpec,
    KIND_DERIVES,
    KIND_GENERATES,
    KIND_INITIATES,
    KIND_TERMINATES,
    MODE_MLG,
    MODE_RULECHANGE,
    Pattern,
    SpecAst,
    SymbolDecl,
    SYM_FLUENT,
    SYM_INST_EVENT,
    SYM_NONINERTIAL_FLUENT,
    SYM_OBS_EVENT,
    Var,
)
from . import terms as T
from .terms import Context, Term, canon

DEFAULT_INSTANCE_CAP = 200_000

# Cap extra norm-nesting introduced by the abstraction closure beyond what
# the specification itself writes down; rewriting aims along counts-as
# pairs normally preserves depth, but derivation rules with norm outputs
# can in principle pump nesting without bound.
ABSTRACTION_DEPTH_MARGIN = 1


@dataclass
class _InstEnv:
    decl: InstitutionDecl
    types: dict[str, tuple]
    symbols: dict[str, SymbolDecl]
    mode: str


def _build_env(decl: InstitutionDecl, mode: str, horizon: int | None, rule_ids: list[str]) -> _InstEnv:
    types: dict[str, tuple] = {}
    for td in decl.types:
        if td.name in types and types[td.name] != tuple(td.constants):
            raise TypeMismatchError(
                f"{decl.name}: type {td.name} redeclared with different constants"
            )
        types[td.name] = tuple(td.constants)
    if mode == MODE_RULECHANGE:
        types[BUILTIN_OP_TYPE] = T.MOD_OPS
        types[BUILTIN_RULEID_TYPE] = tuple(rule_ids)
        types[BUILTIN_TIME_TYPE] = tuple(range((horizon or 0) + 1))
    symbols: dict[str, SymbolDecl] = {}
    for sd in decl.symbols:
        if sd.name in symbols:
            prev = symbols[sd.name]
            if prev.arg_types != sd.arg_types or prev.kind != sd.kind:
                raise TypeMismatchError(
                    f"{decl.name}: symbol {sd.name} redeclared inconsistently"
                )
        for ty in sd.arg_types:
            if ty not in types:
                raise UnknownSymbolError(
                    f"{decl.name}: symbol {sd.name} uses undeclared type {ty}"
                )
        symbols[sd.name] = sd
    return _InstEnv(decl=decl, types=types, symbols=symbols, mode=mode)


# ---------------------------------------------------------------------------
# Variable typing


def _walk_pattern(env: _InstEnv, p: Pattern, var_types: dict[str, str], where: str) -> None:
    """Assign types to variables by the positions they occupy."""
    head = p.head
    if head in (T.NOW, T.NEVER, T.NULL):
        if p.args:
            raise ArityMismatchError(f"{where}: {head} takes no arguments")
        return
    if head in (T.OBL, T.PRO):
        if len(p.args) != 2:
            raise ArityMismatchError(f"{where}: {head} takes aim and deadline")
        for a in p.args:
            if isinstance(a, Pattern):
                _walk_pattern(env, a, var_types, where)
            else:
                raise UntypedVariableError(
                    f"{where}: bare argument {a} of {head} has no type"
                )
        return
    if head in (T.DISCH, T.VIOL, T.POW):
        if len(p.args) != 1 or not isinstance(p.args[0], Pattern):
            raise ArityMismatchError(f"{where}: {head} takes one term")
        _walk_pattern(env, p.args[0], var_types, where)
        return
    if head == T.MOD:
        if len(p.args) != 3:
            raise ArityMismatchError(f"{where}: mod takes (op, id, time)")
        for a, ty in zip(p.args, (BUILTIN_OP_TYPE, BUILTIN_RULEID_TYPE, BUILTIN_TIME_TYPE)):
            _assign_arg(env, a, ty, var_types, where)
        return
    if head == T.ACTIVE:
        if len(p.args) != 1:
            raise ArityMismatchError(f"{where}: active takes one rule id")
        _assign_arg(env, p.args[0], BUILTIN_RULEID_TYPE, var_types, where)
        return
    decl = env.symbols.get(head)
    if decl is None:
        raise UnknownSymbolError(f"{where}: undeclared symbol {head}")
    if len(p.args) != len(decl.arg_types):
        raise ArityMismatchError(
            f"{where}: {head} expects {len(decl.arg_types)} arguments, got {len(p.args)}"
        )
    for a, ty in zip(p.args, decl.arg_types):
        _assign_arg(env, a, ty, var_types, where)


def _assign_arg(env: _InstEnv, a, ty: str, var_types: dict[str, str], where: str) -> None:
    if isinstance(a, Var):
        prev = var_types.get(a.name)
        if prev is not None and prev != ty:
            raise TypeMismatchError(
                f"{where}: variable {a.name} used at types {prev} and {ty}"
            )
        var_types[a.name] = ty
        return
    if isinstance(a, Pattern):
        raise TypeMismatchError(
            f"{where}: nested term {a} where a constant of type {ty} is expected"
        )
    consts = env.types.get(ty, ())
    if not consts:
        raise EmptyTypeError(f"{where}: type {ty} has no constants")
    if ty == BUILTIN_TIME_TYPE:
        if not str(a).isdigit():
            raise TypeMismatchError(f"{where}: {a} is not a time constant")
        return
    if a not in consts:
        raise TypeMismatchError(f"{where}: constant {a} is not of type {ty}")


def _ctx_patterns(e) -> list[Pattern]:
    if isinstance(e, CtxLit):
        return [e.pattern]
    if isinstance(e, CtxNot):
        return _ctx_patterns(e.sub)
    if isinstance(e, (CtxAnd, CtxOr, CtxImplies)):
        return _ctx_patterns(e.left) + _ctx_patterns(e.right)
    if isinstance(e, CtxTemporal):
        return _ctx_patterns(e.sub)
    return []


# ---------------------------------------------------------------------------
# Pattern instantiation


def _inst_pattern(env: _InstEnv, p: Pattern, sub: dict[str, object]) -> Term:
    head = p.head
    if head == T.NOW:
        return T.NOW_T
    if head == T.NEVER:
        return T.NEVER_T
    if head == T.NULL:
        return T.NULL_T
    if head in (T.OBL, T.PRO, T.DISCH, T.VIOL, T.POW):
        return T.mk(head, *(_inst_pattern(env, a, sub) for a in p.args))
    if head == T.MOD:
        op = _inst_arg(p.args[0], sub)
        rid = _inst_arg(p.args[1], sub)
        t = _inst_arg(p.args[2], sub)
        return T.mod(str(op), str(rid), int(t))
    if head == T.ACTIVE:
        return T.active(str(_inst_arg(p.args[0], sub)))
    args = []
    decl = env.symbols[head]
    for a, ty in zip(p.args, decl.arg_types):
        v = _inst_arg(a, sub)
        args.append(int(v) if ty == BUILTIN_TIME_TYPE else v)
    return T.mk(head, *args)


def _inst_arg(a, sub: dict[str, object]):
    if isinstance(a, Var):
        return sub[a.name]
    return a


def _inst_ctx(env: _InstEnv, e, sub: dict[str, object]):
    if isinstance(e, CtxLit):
        return CtxLit(pattern=_GroundLit(_inst_pattern(env, e.pattern, sub)))
    if isinstance(e, CtxNot):
        return CtxNot(_inst_ctx(env, e.sub, sub))
    if isinstance(e, CtxAnd):
        return CtxAnd(_inst_ctx(env, e.left, sub), _inst_ctx(env, e.right, sub))
    if isinstance(e, CtxOr):
        return CtxOr(_inst_ctx(env, e.left, sub), _inst_ctx(env, e.right, sub))
    if isinstance(e, CtxImplies):
        return CtxImplies(_inst_ctx(env, e.left, sub), _inst_ctx(env, e.right, sub))
    if isinstance(e, CtxTemporal):
        return CtxTemporal(op=e.op, sub=_inst_ctx(env, e.sub, sub))
    return e  # CtxTrue / CtxRetro


@dataclass(frozen=True)
class _GroundLit:
    """Wrapper marking a ground Term inside a temporal-context literal."""

    term: Term

    def __str__(self) -> str:
        return T.term_str(self.term)


# ---------------------------------------------------------------------------
# Template expansion


def _expand(env: _InstEnv, patterns_for_typing, triggers, outputs, ctx_pos, ctx_neg,
            temporal_ctx, bindings, where: str, counter: list[int], cap: int):
    var_types: dict[str, str] = {}
    for p in patterns_for_typing:
        _walk_pattern(env, p, var_types, where)
    for a, b in bindings:
        ta, tb = var_types.get(a), var_types.get(b)
        if ta is None and tb is None:
            raise UntypedVariableError(f"{where}: binding over unknown variables {a}={b}")
        ty = ta or tb
        if (ta or ty) != (tb or ty):
            raise TypeMismatchError(f"{where}: binding {a}={b} joins different types")
        var_types.setdefault(a, ty)
        var_types.setdefault(b, ty)
    names = sorted(var_types)
    domains = []
    for v in names:
        consts = env.types.get(var_types[v], ())
        if not consts:
            raise EmptyTypeError(f"{where}: type {var_types[v]} of {v} has no constants")
        domains.append(consts)
    for combo in itertools.product(*domains) if names else [()]:
        sub = dict(zip(names, combo))
        if any(sub[a] != sub[b] for a, b in bindings):
            continue
        counter[0] += 1
        if counter[0] > cap:
            raise ExplosionLimitError(
                f"ground instance count exceeded the cap of {cap}"
            )
        yield (
            tuple(sorted(sub.items())),
            tuple(_inst_pattern(env, t, sub) for t in triggers),
            tuple(_inst_pattern(env, o, sub) for o in outputs),
            Context(
                pos=(_inst_pattern(env, c, sub) for c in ctx_pos),
                neg=(_inst_pattern(env, c, sub) for c in ctx_neg),
            ),
            _inst_ctx(env, temporal_ctx, sub) if temporal_ctx is not None else None,
        )


# ---------------------------------------------------------------------------
# Signature helpers


def _is_event_term(env: _InstEnv, t: Term) -> bool:
    if t.head in (T.NOW, T.NEVER, T.NULL, T.DISCH, T.VIOL, T.MOD):
        return True
    d = env.symbols.get(t.head)
    return d is not None and d.kind in (SYM_OBS_EVENT, SYM_INST_EVENT)


def _is_fluent_term(env: _InstEnv, t: Term) -> bool:
    if t.head in (T.OBL, T.PRO, T.POW, T.ACTIVE):
        return True
    d = env.symbols.get(t.head)
    return d is not None and d.kind in (SYM_FLUENT, SYM_NONINERTIAL_FLUENT)


def _knows_term(env: _InstEnv, t: Term) -> bool:
    """Whether every symbol in ``t`` belongs to this institution's signature."""
    if t.head in (T.NOW, T.NEVER, T.NULL):
        return True
    if t.head in (T.OBL, T.PRO, T.DISCH, T.VIOL, T.POW):
        return all(_knows_term(env, a) for a in t.args)
    if t.head in (T.MOD, T.ACTIVE):
        return env.mode == MODE_RULECHANGE
    d = env.symbols.get(t.head)
    return d is not None and len(d.arg_types) == len(t.args)


def _is_inertial(env: _InstEnv, t: Term) -> bool:
    """Inertial fluents persist until terminated: domain fluents declared
    inertial, empowerments, active-rule markers and concrete norms."""
    if t.head in (T.POW, T.ACTIVE):
        return True
    if t.head in (T.OBL, T.PRO):
        return True  # concreteness is decided by cnorm membership
    d = env.symbols.get(t.head)
    return d is not None and d.kind == SYM_FLUENT


# ---------------------------------------------------------------------------
# Abstract-norm universe (deontic abstraction closure, canonical space)


def _abstraction_universe(
    seeds: set[Term], pairs: set[tuple[Term, Term]], depth_cap: int
) -> frozenset[Term]:
    """All norms reachable from ``seeds`` by rewriting along counts-as pairs.

    Works in canonical (obligation-only) space.  A pair (x, y) rewrites an
    obligation on x to an obligation on y, and via equivalence a deadline x
    to a deadline y; pairs between the produced norms realise the
    higher-order recursion.  Over-approximates the prohibition case (which
    requires all routes at run time) - safe for a signature bound.
    """
    cpairs = {(canon(x), canon(y)) for x, y in pairs}
    universe = {canon(s) for s in seeds}
    changed = True
    while changed:
        changed = False
        for n in list(universe):
            a, d = n.args
            for x, y in list(cpairs):
                if x is a:
                    m = T.mk(T.OBL, y, d)
                    if T.norm_depth(m) <= depth_cap:
                        if m not in universe:
                            universe.add(m)
                            changed = True
                        if (n, m) not in cpairs:
                            cpairs.add((n, m))
                            changed = True
                if x is d:
                    m = T.mk(T.OBL, a, y)
                    if T.norm_depth(m) <= depth_cap:
                        if m not in universe:
                            universe.add(m)
                            changed = True
                        if (n, m) not in cpairs:
                            cpairs.add((n, m))
                            changed = True
    return frozenset(universe)


# ---------------------------------------------------------------------------
# Entry point


def ground(
    ast: SpecAst,
    horizon: int | None = None,
    max_instances: int = DEFAULT_INSTANCE_CAP,
) -> GovernanceGraph:
    """Expand an AST into a governance graph of ground institutions."""
    if ast.mode == MODE_RULECHANGE and horizon is None:
        raise TypeMismatchError("rulechange specifications need a trace horizon to ground")
    names = [d.name for d in ast.institutions]
    if len(set(names)) != len(names):
        raise TypeMismatchError("institution names must be unique")
    order = sorted(ast.institutions, key=lambda d: (d.level, names.index(d.name)))
    specs: list[InstitutionSpec] = []
    counter = [0]
    for decl in order:
        specs.append(
            _ground_institution(
                ast, decl, horizon, counter, max_instances, specs, ast.edges
            )
        )
    index = {s.name: i for i, s in enumerate(specs)}
    relation = set()
    for lower, higher in ast.edges:
        if lower not in index or higher not in index:
            raise UnknownSymbolError(f"governs clause names unknown institution: {lower} by {higher}")
        i, j = index[lower], index[higher]
        if specs[i].level >= specs[j].level:
            raise TypeMismatchError(
                f"{higher} must operate at a higher level than {lower}"
            )
        relation.add((i, j))
    return GovernanceGraph(institutions=specs, relation=frozenset(relation), ast=ast)


def _ground_institution(
    ast: SpecAst,
    decl: InstitutionDecl,
    horizon: int | None,
    counter: list[int],
    cap: int,
    lower_specs: list[InstitutionSpec],
    edges: list[tuple[str, str]],
) -> InstitutionSpec:
    rule_ids = [r.rule_id for r in decl.rules]
    if len(set(rule_ids)) != len(rule_ids):
        raise TypeMismatchError(f"{decl.name}: duplicate rule ids")
    env = _build_env(decl, ast.mode, horizon, rule_ids)

    gen, ini, trm, der = [], [], [], []
    for r in decl.rules:
        where = f"{decl.name}.{r.rule_id}"
        if ast.mode == MODE_RULECHANGE and r.kind == KIND_DERIVES:
            raise TypeMismatchError(f"{where}: derivation rules are not available with rule change")
        if ast.mode == MODE_MLG and len(r.triggers) != 1:
            raise TypeMismatchError(f"{where}: multi-event triggers need rule change mode")
        typing_pats = list(r.triggers) + list(r.outputs) + list(r.ctx_pos) + list(r.ctx_neg)
        if r.temporal_ctx is not None:
            typing_pats += _ctx_patterns(r.temporal_ctx)
        for (subst, triggers, outputs, ctx, tctx) in _expand(
            env, typing_pats, r.triggers, r.outputs, r.ctx_pos, r.ctx_neg,
            r.temporal_ctx, r.bindings, where, counter, cap,
        ):
            g = GroundRule(
                rule_id=r.rule_id,
                subst=subst,
                kind=r.kind,
                triggers=triggers,
                outputs=outputs,
                ctx=ctx,
                temporal_ctx=tctx,
            )
            _validate_ground_rule(env, g, where, r.is_modrule)
            {KIND_GENERATES: gen, KIND_INITIATES: ini,
             KIND_TERMINATES: trm, KIND_DERIVES: der}[r.kind].append(g)

    delta: set[Term] = set()
    initially_items: list[tuple[str, Term]] = []
    for item in decl.initially:
        where = f"{decl.name}.{item.item_id}"
        for (_s, _t, outputs, _c, _tc) in _expand(
            env, [item.pattern], (), (item.pattern,), (), (), None, (), where, counter, cap
        ):
            f = outputs[0]
            if not _is_fluent_term(env, f):
                raise TypeMismatchError(f"{where}: initial item {T.term_str(f)} is not a fluent")
            if not _is_inertial(env, f):
                raise TypeMismatchError(
                    f"{where}: initial item {T.term_str(f)} is non-inertial"
                )
            delta.add(f)
            initially_items.append((item.item_id, f))

    obs_events = set(_enumerate_symbol_terms(env, SYM_OBS_EVENT))
    inst_events = set(_enumerate_symbol_terms(env, SYM_INST_EVENT))
    for item in decl.observables:
        where = f"{decl.name}.{item.item_id}"
        for (_s, _t, outputs, _c, _tc) in _expand(
            env, [item.pattern], (), (item.pattern,), (), (), None, (), where, counter, cap
        ):
            e = outputs[0]
            d = env.symbols.get(e.head)
            if d is None or d.kind != SYM_INST_EVENT:
                raise TypeMismatchError(
                    f"{where}: observable grants apply to institutional event instances"
                )
            inst_events.discard(e)
            obs_events.add(e)
    obs_events = frozenset(obs_events)
    inst_events = frozenset(inst_events)
    # Generated events must stay institutional: with instance-level
    # observability this is a per-instance condition.
    for g in gen:
        for o in g.outputs:
            if o.head != T.MOD and o in obs_events:
                raise TypeMismatchError(
                    f"{decl.name}.{g.rule_id}: generated event {T.term_str(o)} "
                    "is declared observable"
                )

    cnorm = {f for f in delta if T.is_norm(f)}
    for g in ini + trm:
        cnorm.update(o for o in g.outputs if T.is_norm(o))

    anorm: frozenset[Term] = frozenset()
    depth_hint = 1
    if ast.mode == MODE_MLG:
        pairs: set[tuple[Term, Term]] = set()
        for g in gen:
            for o in g.outputs:
                pairs.add((g.triggers[0], o))
        for g in der:
            for o in g.outputs:
                pairs.add((g.triggers[0], o))
        seeds = set(cnorm)
        for g in der:
            seeds.update(o for o in g.outputs if T.is_norm(o))
            if T.is_norm(g.triggers[0]):
                seeds.add(g.triggers[0])
        lower_names = {lo for lo, hi in edges if hi == decl.name}
        for ls in lower_specs:
            if ls.name in lower_names:
                for n in ls.cnorm | ls.anorm:
                    if _knows_term(env, n):
                        seeds.add(n)
        if seeds:
            depth_hint = max(T.norm_depth(n) for n in seeds) + ABSTRACTION_DEPTH_MARGIN
            universe = _abstraction_universe(seeds, pairs, depth_hint)
            ccnorm = {canon(n) for n in cnorm}
            anorm = frozenset(n for n in universe if n not in ccnorm)

    return InstitutionSpec(
        name=decl.name,
        level=decl.level,
        mode=ast.mode,
        symbols=dict(env.symbols),
        types=dict(env.types),
        obs_events=obs_events,
        inst_events=inst_events,
        cnorm=frozenset(cnorm),
        anorm=anorm,
        gen_rules=tuple(gen),
        init_rules=tuple(ini),
        term_rules=tuple(trm),
        der_rules=tuple(der),
        delta=frozenset(delta),
        initially_items=tuple(initially_items),
        rule_ids=tuple(r.rule_id for r in decl.rules),
        depth_hint=depth_hint,
    )


def _enumerate_symbol_terms(env: _InstEnv, kind: str) -> frozenset[Term]:
    out: set[Term] = set()
    for sd in env.symbols.values():
        if sd.kind != kind:
            continue
        domains = []
        for ty in sd.arg_types:
            consts = env.types.get(ty, ())
            if not consts:
                raise EmptyTypeError(f"{env.decl.name}: type {ty} has no constants")
            domains.append(consts)
        for combo in itertools.product(*domains) if domains else [()]:
            out.add(T.mk(sd.name, *combo))
    return frozenset(out)


def _validate_ground_rule(env: _InstEnv, g: GroundRule, where: str, is_modrule: bool) -> None:
    if env.mode == MODE_RULECHANGE:
        for t in g.triggers + g.outputs + tuple(g.ctx.pos) + tuple(g.ctx.neg):
            for s in T.subterms(t):
                if T.is_norm(s):
                    raise TypeMismatchError(
                        f"{where}: normative fluents are not available with rule change"
                    )
    if g.kind == KIND_GENERATES:
        for t in g.triggers:
            if not _is_event_term(env, t) or t.head in (T.NOW, T.NEVER, T.NULL):
                raise TypeMismatchError(f"{where}: trigger {T.term_str(t)} is not an event")
        for o in g.outputs:
            if o.head == T.MOD:
                if env.mode != MODE_RULECHANGE:
                    raise TypeMismatchError(f"{where}: mod events need rule change mode")
                if not is_modrule:
                    raise TypeMismatchError(
                        f"{where}: rules producing mod events must be declared with modrule"
                    )
                continue
            d = env.symbols.get(o.head)
            if d is None or d.kind != SYM_INST_EVENT:
                raise TypeMismatchError(
                    f"{where}: generated event {T.term_str(o)} must be an institutional event"
                )
    elif g.kind in (KIND_INITIATES, KIND_TERMINATES):
        for t in g.triggers:
            if not _is_event_term(env, t) or t.head in (T.NOW, T.NEVER, T.NULL):
                raise TypeMismatchError(f"{where}: trigger {T.term_str(t)} is not an event")
        for o in g.outputs:
            if not _is_fluent_term(env, o) or not _is_inertial(env, o):
                raise TypeMismatchError(
                    f"{where}: {T.term_str(o)} cannot be initiated/terminated (non-inertial)"
                )
            if env.mode == MODE_RULECHANGE and o.head in (T.POW, T.ACTIVE):
                raise TypeMismatchError(
                    f"{where}: active-rule fluents change only through mod events"
                )
    else:  # derives
        t = g.triggers[0]
        if not _is_fluent_term(env, t):
            raise TypeMismatchError(f"{where}: derivation trigger {T.term_str(t)} is not a fluent")
        for o in g.outputs:
            if T.is_norm(o):
                continue  # abstract norm output, non-inertial by construction
            d = env.symbols.get(o.head)
            if d is None or d.kind != SYM_NONINERTIAL_FLUENT:
                raise TypeMismatchError(
                    f"{where}: derivation output {T.term_str(o)} must be a non-inertial fluent"
                )
    for lit in tuple(g.ctx.pos) + tuple(g.ctx.neg):
        if not _is_fluent_term(env, lit):
            raise TypeMismatchError(f"{where}: context literal {T.term_str(lit)} is not a fluent")
