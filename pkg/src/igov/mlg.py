"""Multi-level governance engine.

Runs ground institutions over a shared trace of observable events and
reports norm violations.  Per instant, each institution generates events as
a least fixed point (event generation, norm discharges, then violations for
undischarged norms), compliance events flow upward along the
governs-relation within the same instant, and every institution then
transitions: inertial survivors plus initiated fluents plus norms passed up
from governed institutions, closed under fluent derivation and deontic
abstraction.

Deontic abstraction turns concrete norms into abstract ones along the
counts-as pair graph: an obligation on any route to an abstract concept
lifts to an obligation on the concept; a prohibition lifts only when every
route to the concept is prohibited.  Pairs derived this way feed back into
the relation, which lifts higher-order norms, and norm equivalence makes
deadline abstraction fall out of the same machinery.

Where the semantics is partial (a violation forcing a discharge of the same
norm, a derivation contradicting its own context, or two mutually exclusive
closures) the engine raises instead of repairing, naming the institution
and instant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import ExplosionLimitError, SemanticsAmbiguousError, SemanticsUndefinedError
from .spec import GovernanceGraph, GroundRule, InstitutionSpec, SYM_INST_EVENT, SYM_OBS_EVENT
from . import terms as T
from .terms import Term, canon, entails_context, entails_fluent

State = frozenset  # of fluent Terms
EventSet = frozenset  # of event Terms


# ---------------------------------------------------------------------------
# Small helpers


def _is_eventish(inst: InstitutionSpec, t: Term) -> bool:
    if t.head in (T.NOW, T.NEVER, T.NULL, T.DISCH, T.VIOL, T.MOD):
        return True
    d = inst.symbols.get(t.head)
    return d is not None and d.kind in (SYM_OBS_EVENT, SYM_INST_EVENT)


def _ev_in(e: Term, events: frozenset, events_canon: set) -> bool:
    """Event occurrence; compliance events match up to norm equivalence."""
    if e in events:
        return True
    if T.is_compliance(e):
        return canon(e) in events_canon
    return False


def _occurs_or_holds(inst: InstitutionSpec, a: Term, events, events_canon, state) -> bool:
    if a is T.NOW_T:
        return T.NOW_T in events
    if a is T.NEVER_T:
        return False
    if _is_eventish(inst, a):
        return _ev_in(a, events, events_canon)
    return entails_fluent(state, a)


def _state_norms(state: frozenset) -> list[Term]:
    return [f for f in state if T.is_norm(f)]


# ---------------------------------------------------------------------------
# Event generation (per-institution least fixed point)


def event_generation(
    inst: InstitutionSpec,
    state: frozenset,
    seed: frozenset,
    lower_compliance: frozenset = frozenset(),
    instant: int | None = None,
) -> frozenset:
    """Events occurring in ``state`` given seed events and lower-level
    compliance events; least fixed point of generation, discharge and
    violation conditions."""
    events: set[Term] = {T.NOW_T}
    events |= seed
    events |= lower_compliance
    events_canon: set[Term] = {canon(e) for e in events if T.is_compliance(e)}
    norms = _state_norms(state)

    def add(e: Term) -> bool:
        if e in events:
            return False
        events.add(e)
        if T.is_compliance(e):
            events_canon.add(canon(e))
        return True

    def monotone_close() -> None:
        changed = True
        while changed:
            changed = False
            for g in inst.gen_rules:
                trig = g.triggers[0]
                if not _ev_in(trig, events, events_canon):
                    continue
                if not entails_context(state, g.ctx):
                    continue
                for out in g.outputs:
                    if out in events:
                        continue
                    if entails_fluent(state, T.pow_(out)):
                        changed |= add(out)
            for n in norms:
                if T.disch(n) in events:
                    continue
                aim, deadline = n.args
                if n.head == T.OBL:
                    hit = _occurs_or_holds(inst, aim, events, events_canon, state)
                else:
                    hit = _occurs_or_holds(inst, deadline, events, events_canon, state)
                if hit:
                    changed |= add(T.disch(n))

    monotone_close()
    changed = True
    while changed:
        changed = False
        for n in norms:
            v = T.viol(n)
            if v in events or canon(T.disch(n)) in events_canon:
                continue
            aim, deadline = n.args
            if n.head == T.OBL:
                hit = _occurs_or_holds(inst, deadline, events, events_canon, state)
            else:
                hit = _occurs_or_holds(inst, aim, events, events_canon, state)
            if hit:
                add(v)
                changed = True
        if changed:
            monotone_close()

    for e in list(events):
        if e.head == T.VIOL and canon(T.disch(e.args[0])) in events_canon:
            raise SemanticsUndefinedError(
                f"violation of {T.term_str(e.args[0])} forces its own discharge "
                "through event generation",
                institution=inst.name,
                instant=instant,
            )
    return frozenset(events)


# ---------------------------------------------------------------------------
# State closure: fluent derivation + deontic abstraction


def _base_pairs(inst: InstitutionSpec, state: frozenset) -> set[tuple[Term, Term]]:
    """Single-step concrete-to-abstract pairs licensed by the state."""
    pairs: set[tuple[Term, Term]] = set()
    for g in inst.gen_rules:
        if not entails_context(state, g.ctx):
            continue
        for out in g.outputs:
            if entails_fluent(state, T.pow_(out)):
                pairs.add((g.triggers[0], out))
    for g in inst.der_rules:
        if entails_context(state, g.ctx):
            for out in g.outputs:
                pairs.add((g.triggers[0], out))
    return pairs


def abstracting_base(inst: InstitutionSpec, state: frozenset) -> set[tuple[Term, Term]]:
    """Public view of the single-step counts-as base for a state."""
    return _base_pairs(inst, state)


def _dc_closure_core(
    inst: InstitutionSpec, entailed_canon: set[Term], pairs_state: frozenset,
    depth_cap: int,
) -> set[Term]:
    """Abstract norms (canonical forms) added by deontic counts-as.

    ``entailed_canon`` is the canonical-form view of the norms the growing
    state entails; ``pairs_state`` is the state against which pair
    availability (rule contexts, empowerment) is judged - these coincide
    except inside the stable-closure verification pass.

    Works in canonical norm space, where a prohibition pro(a, d) is the
    obligation obl(d, a); lifting a pair along the aim realises the
    obligation rule, lifting along the deadline realises the prohibition
    rule, and pairs derived between norms replay both rules one nesting
    level up.  Lifting is driven by the entailed norms, so the recursion
    stays within the finite signature.
    """
    base = {(canon(x), canon(y)) for x, y in _base_pairs(inst, pairs_state)}
    # Each pair is (routes, target): an obligation on every route counts as
    # an obligation on the target (for base pairs routes are singletons;
    # prohibition lifts produce wider route sets one level up).
    pair_set: set[tuple[frozenset, Term]] = {(frozenset((x,)), y) for x, y in base}
    known: set[Term] = set(entailed_canon)
    additions: set[Term] = set()

    def admissible(n: Term) -> bool:
        return T.norm_depth(n) <= depth_cap and inst.knows_term(n)

    changed = True
    while changed:
        changed = False
        route_map: dict[Term, set[Term]] = {}
        for A, b in pair_set:
            route_map.setdefault(b, set()).update(A)
        deadlines = {n.args[1] for n in known} | {n.args[0] for n in known}
        for A, b in list(pair_set):
            for cd in deadlines:
                # Obligation rule: obligations on all of A lift to b.
                produced = T.mk(T.OBL, b, cd)
                if not admissible(produced):
                    continue
                if produced not in known and all(
                    T.mk(T.OBL, a, cd) in known for a in A
                ):
                    additions.add(produced)
                    known.add(produced)
                    changed = True
                lifted = (
                    frozenset(T.mk(T.OBL, a, cd) for a in A),
                    produced,
                )
                if lifted not in pair_set:
                    pair_set.add(lifted)
                    changed = True
        for b, routes in route_map.items():
            if not routes:
                continue
            for cd in deadlines:
                # Prohibition rule: prohibiting every route to b counts as
                # prohibiting b; pro(x, cd) is canonically obl(cd, x).
                produced = T.mk(T.OBL, cd, b)
                if not admissible(produced):
                    continue
                if produced not in known and all(
                    T.mk(T.OBL, cd, x) in known for x in routes
                ):
                    additions.add(produced)
                    known.add(produced)
                    changed = True
                lifted = (
                    frozenset(T.mk(T.OBL, cd, x) for x in routes),
                    produced,
                )
                if lifted not in pair_set:
                    pair_set.add(lifted)
                    changed = True
    return additions


def _depth_cap(inst: InstitutionSpec, state: frozenset) -> int:
    member_depth = max((T.norm_depth(f) for f in state if T.is_norm(f)), default=1)
    return max(inst.depth_hint, member_depth + 1)


def _dc_additions(inst: InstitutionSpec, state: frozenset) -> set[Term]:
    entailed = {canon(f) for f in state if T.is_norm(f)}
    return _dc_closure_core(inst, entailed, state, _depth_cap(inst, state))


def _display_norm(c: Term) -> Term:
    """Render a canonical norm for state membership.

    Canonical forms are obligation-shaped; a canonical ``obl(never, x)``
    reads far more naturally as ``pro(x, never)``, and similarly when the
    aim position is ``never``-free but the term came from a prohibition
    lift.  We keep obligations as they are and rewrite only the
    never-deadline pattern, which is unambiguous.
    """
    if c.head == T.OBL and c.args[0] is T.NEVER_T:
        return T.pro(c.args[1], T.NEVER_T)
    return c


def deontic_closure(inst: InstitutionSpec, state: frozenset) -> frozenset:
    """State closed under deontic abstraction (single step to fixpoint)."""
    s = set(state)
    while True:
        adds = _dc_additions(inst, frozenset(s))
        new = {_display_norm(a) for a in adds}
        new = {n for n in new if not entails_fluent(frozenset(s), n)}
        if not new:
            return frozenset(s)
        s |= new


def _fd_additions(inst: InstitutionSpec, state: frozenset) -> tuple[set[Term], list[GroundRule]]:
    adds: set[Term] = set()
    fired: list[GroundRule] = []
    for g in inst.der_rules:
        if not entails_fluent(state, g.triggers[0]):
            continue
        if not entails_context(state, g.ctx):
            continue
        for out in g.outputs:
            if not entails_fluent(state, out):
                adds.add(out)
                fired.append(g)
    return adds, fired


def fluent_derivation_closure(
    inst: InstitutionSpec, state: frozenset, instant: int | None = None
) -> frozenset:
    """State closed under the derivation rules, verified minimal and
    self-consistent (raises otherwise)."""
    closed = _greedy_close(inst, state, derive_only=True)
    _verify_closure(inst, state, closed, instant, derive_only=True)
    return closed


def _greedy_close(inst: InstitutionSpec, state: frozenset, derive_only: bool = False) -> frozenset:
    s = frozenset(state)
    while True:
        adds, _ = _fd_additions(inst, s)
        if adds:
            s = s | adds
            continue
        if derive_only:
            return s
        s2 = deontic_closure(inst, s)
        if s2 == s:
            return s
        s = s2


def _reduct_close(
    inst: InstitutionSpec, base: frozenset, final: frozenset, derive_only: bool = False
) -> frozenset:
    """Least fixpoint with negative conditions frozen against ``final``.

    Mirrors the stable-model reduct: if the greedy closure is a minimal
    model of the closure conditions, re-deriving it this way reproduces it
    exactly.
    """
    s = set(base)
    changed = True
    while changed:
        changed = False
        fs = frozenset(s)
        for g in inst.der_rules:
            if not entails_fluent(fs, g.triggers[0]):
                continue
            if not all(entails_fluent(fs, p) for p in g.ctx.pos):
                continue
            if any(entails_fluent(final, n) for n in g.ctx.neg):
                continue
            for out in g.outputs:
                if not entails_fluent(fs, out):
                    s.add(out)
                    changed = True
        if not derive_only and not changed:
            # DC additions with pair availability frozen against `final`.
            adds = _dc_additions_frozen(inst, frozenset(s), final)
            for a in adds:
                disp = _display_norm(a)
                if not entails_fluent(frozenset(s), disp):
                    s.add(disp)
                    changed = True
    return frozenset(s)


def _dc_additions_frozen(inst: InstitutionSpec, state: frozenset, final: frozenset) -> set[Term]:
    entailed = {canon(f) for f in state if T.is_norm(f)}
    return _dc_closure_core(inst, entailed, final, _depth_cap(inst, final))


def _verify_closure(
    inst: InstitutionSpec,
    base: frozenset,
    closed: frozenset,
    instant: int | None,
    derive_only: bool = False,
) -> None:
    redone = _reduct_close(inst, base, closed, derive_only=derive_only)
    if {canon(f) for f in redone} != {canon(f) for f in closed}:
        raise SemanticsUndefinedError(
            "state closure is not stable: a derived fluent or abstraction "
            "contradicts its own licensing condition",
            institution=inst.name,
            instant=instant,
        )
    _probe_ambiguity(inst, base, closed, instant, derive_only)


def _probe_ambiguity(
    inst: InstitutionSpec,
    base: frozenset,
    closed: frozenset,
    instant: int | None,
    derive_only: bool,
) -> None:
    # A derivation rule is contested when its trigger is entailed but a
    # weakly negative condition got derived during closure; applying it
    # first may yield a different, equally stable closure.
    contested = []
    for g in inst.der_rules:
        if not entails_fluent(closed, g.triggers[0]):
            continue
        if entails_context(closed, g.ctx):
            continue
        blockers = [n for n in g.ctx.neg if entails_fluent(closed, n) and not entails_fluent(base, n)]
        if blockers and all(entails_fluent(closed, p) for p in g.ctx.pos):
            contested.append(g)
    for g in contested:
        seeded = base | set(g.outputs)
        alt = _greedy_close(inst, seeded, derive_only=derive_only)
        redone = _reduct_close(inst, base, alt, derive_only=derive_only)
        if {canon(f) for f in redone} == {canon(f) for f in alt} and {
            canon(f) for f in alt
        } != {canon(f) for f in closed}:
            raise SemanticsAmbiguousError(
                f"two mutually exclusive state closures exist (rule {g.instance_id} "
                "admits an alternative)",
                institution=inst.name,
                instant=instant,
            )


def close_state(inst: InstitutionSpec, state: frozenset, instant: int | None = None) -> frozenset:
    closed = _greedy_close(inst, state)
    _verify_closure(inst, state, closed, instant)
    return closed


# ---------------------------------------------------------------------------
# Transitions


def init_term_sets(
    inst: InstitutionSpec, state: frozenset, events: frozenset
) -> tuple[frozenset, frozenset]:
    """Initiated and terminated fluent sets for a completed event set."""
    events_canon = {canon(e) for e in events if T.is_compliance(e)}
    initiated: set[Term] = set()
    for g in inst.init_rules:
        if _ev_in(g.triggers[0], events, events_canon) and entails_context(state, g.ctx):
            initiated.update(g.outputs)
    terminated: set[Term] = set()
    for g in inst.term_rules:
        if _ev_in(g.triggers[0], events, events_canon) and entails_context(state, g.ctx):
            for out in g.outputs:
                if entails_fluent(state, out):
                    terminated.add(out)
    # Discharged or violated norms stop persisting.
    for e in events:
        if T.is_compliance(e):
            terminated.add(e.args[0])
    return frozenset(initiated), frozenset(terminated)


def _inertial_members(inst: InstitutionSpec, state: frozenset) -> set[Term]:
    from .spec import SYM_FLUENT

    out = set()
    ccn = {canon(n) for n in inst.cnorm}
    for f in state:
        if T.is_norm(f):
            if canon(f) in ccn:
                out.add(f)
            continue
        if f.head in (T.POW, T.ACTIVE):
            out.add(f)
            continue
        d = inst.symbols.get(f.head)
        if d is not None and d.kind == SYM_FLUENT:
            out.add(f)
    return out


def transition(
    inst: InstitutionSpec,
    state: frozenset,
    events: frozenset,
    passed_up: frozenset = frozenset(),
    instant: int | None = None,
) -> frozenset:
    initiated, terminated = init_term_sets(inst, state, events)
    term_canon = {canon(f) for f in terminated}
    survivors = {
        f for f in _inertial_members(inst, state) if canon(f) not in term_canon
    }
    base = survivors | set(initiated) | set(passed_up)
    return close_state(inst, frozenset(base), instant)


# ---------------------------------------------------------------------------
# Model construction


@dataclass
class ModelTrace:
    """Per-institution state and event-set sequences for a composite trace."""

    graph: GovernanceGraph
    ctr: tuple[Term, ...]
    states: dict[str, list[frozenset]] = field(default_factory=dict)
    events: dict[str, list[frozenset]] = field(default_factory=dict)

    def state(self, inst: str, t: int) -> frozenset:
        return self.states[inst][t]

    def event_set(self, inst: str, t: int) -> frozenset:
        return self.events[inst][t]


@dataclass
class ViolationReport:
    """Violation events per institution with the instant of occurrence."""

    by_institution: dict[str, list[tuple[int, Term]]]

    def is_compliant(self) -> bool:
        return all(not v for v in self.by_institution.values())

    def norms(self, inst: str) -> set[Term]:
        return {n.args[0] for (_t, n) in self.by_institution.get(inst, ())}


def synchronize(inst: InstitutionSpec, ctr: list[Term]) -> list[Term]:
    """Project a composite trace onto one institution: unrecognised events
    become the null event so all institutions advance in step."""
    return [e if e in inst.obs_events else T.NULL_T for e in ctr]


def passed_up_norms(
    graph: GovernanceGraph, i: int, states_now: dict[int, frozenset]
) -> frozenset:
    inst = graph.institutions[i]
    out: set[Term] = set()
    for h in graph.governed_by(i):
        st = states_now.get(h)
        if st is None:
            continue
        lower = graph.institutions[h]
        for f in st:
            if (
                T.is_norm(f)
                and lower.knows_term(f)
                and inst.knows_term(f)
                and not inst.is_concrete_norm(f)
            ):
                out.add(f)
    return frozenset(out)


def lower_compliance_events(
    graph: GovernanceGraph, i: int, events_now: dict[int, frozenset]
) -> frozenset:
    inst = graph.institutions[i]
    out: set[Term] = set()
    for h in graph.governed_by(i):
        ev = events_now.get(h)
        if ev is None:
            continue
        lower = graph.institutions[h]
        for e in ev:
            if T.is_compliance(e) and lower.knows_term(e.args[0]) and inst.knows_term(e.args[0]):
                out.add(e)
    return frozenset(out)


def initial_states(graph: GovernanceGraph) -> list[frozenset]:
    n = len(graph.institutions)
    states: dict[int, frozenset] = {}
    for i in range(n):
        inst = graph.institutions[i]
        passed = passed_up_norms(graph, i, states)
        states[i] = close_state(inst, inst.delta | passed, instant=0)
    # Joint fixpoint across levels (upward flow converges in one pass, but
    # iterate to be safe).
    while True:
        changed = False
        for i in range(n):
            inst = graph.institutions[i]
            passed = passed_up_norms(graph, i, states)
            s = close_state(inst, inst.delta | passed, instant=0)
            if s != states[i]:
                states[i] = s
                changed = True
        if not changed:
            return [states[i] for i in range(n)]


def validate_composite_trace(graph: GovernanceGraph, ctr: list[Term]) -> None:
    known = graph.observable_union()
    for j, e in enumerate(ctr):
        if e is T.NULL_T:
            continue
        if e not in known:
            raise SemanticsUndefinedError(
                f"trace event {T.term_str(e)} at instant {j} is not observable "
                "in any institution"
            )


def build_model(graph: GovernanceGraph, ctr: list[Term]) -> ModelTrace:
    """Run the joint per-instant semantics over a composite trace."""
    validate_composite_trace(graph, ctr)
    n = len(graph.institutions)
    names = [inst.name for inst in graph.institutions]
    states = initial_states(graph)
    model = ModelTrace(graph=graph, ctr=tuple(ctr))
    for name, s0 in zip(names, states):
        model.states[name] = [s0]
        model.events[name] = []
    current = {i: states[i] for i in range(n)}
    for j, ev in enumerate(ctr):
        # Joint event generation: compliance events pass upward within the
        # same instant's fixed point.
        evsets: dict[int, frozenset] = {}
        while True:
            changed = False
            for i in range(n):
                inst = graph.institutions[i]
                seed = frozenset({ev if ev in inst.obs_events else T.NULL_T})
                lower = lower_compliance_events(graph, i, evsets)
                e = event_generation(inst, current[i], seed, lower, instant=j)
                if evsets.get(i) != e:
                    evsets[i] = e
                    changed = True
            if not changed:
                break
        # Joint transition: norms pass upward at the target instant.
        new_states: dict[int, frozenset] = {}
        while True:
            changed = False
            for i in range(n):
                inst = graph.institutions[i]
                passed = passed_up_norms(graph, i, new_states)
                s = transition(inst, current[i], evsets[i], passed, instant=j)
                if new_states.get(i) != s:
                    new_states[i] = s
                    changed = True
            if not changed:
                break
        for i in range(n):
            model.events[names[i]].append(evsets[i])
            model.states[names[i]].append(new_states[i])
        current = new_states
    return model


def collect_violations(model: ModelTrace) -> ViolationReport:
    by_inst: dict[str, list[tuple[int, Term]]] = {}
    for inst in model.graph.institutions:
        found: list[tuple[int, Term]] = []
        for j, evset in enumerate(model.events[inst.name]):
            for e in T.sorted_terms(evset):
                if e.head == T.VIOL and inst.knows_term(e.args[0]):
                    found.append((j, e))
        by_inst[inst.name] = found
    return ViolationReport(by_institution=by_inst)


def explore_traces(
    graph: GovernanceGraph,
    length: int,
    cap: int = 100_000,
    first_only: bool = False,
):
    """Exhaustively check all composite traces of a given length (one
    observable event per instant); yields (trace, report) for the
    non-compliant ones."""
    alphabet = T.sorted_terms(graph.observable_union())
    total = len(alphabet) ** length
    if total > cap:
        raise ExplosionLimitError(
            f"{total} traces exceed the exploration cap of {cap}"
        )
    for combo in itertools.product(alphabet, repeat=length):
        model = build_model(graph, list(combo))
        report = collect_violations(model)
        if not report.is_compliant():
            yield list(combo), report
            if first_only:
                return
