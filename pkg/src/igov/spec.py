"""Specification model: AST produced by the parser and the ground form.

The AST keeps first-order rule templates with typed variables; grounding
expands them over all type-respecting constant substitutions into ground
institutions assembled into a governance graph (ordered institutions plus
an acyclic governs-relation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .terms import Context, Term

MODE_MLG = "mlg"
MODE_RULECHANGE = "rulechange"

KIND_GENERATES = "generates"
KIND_INITIATES = "initiates"
KIND_TERMINATES = "terminates"
KIND_DERIVES = "derives"

# Symbol declaration kinds.
SYM_OBS_EVENT = "obs_event"
SYM_INST_EVENT = "inst_event"
SYM_FLUENT = "fluent"
SYM_NONINERTIAL_FLUENT = "noninertial_fluent"

# Built-in types available in rulechange mode.
BUILTIN_OP_TYPE = "op"
BUILTIN_RULEID_TYPE = "ruleid"
BUILTIN_TIME_TYPE = "time"


@dataclass(frozen=True)
class Pattern:
    """A term pattern: constants, ``Var`` markers and nested patterns."""

    head: str
    args: tuple = ()

    def __str__(self) -> str:
        if not self.args:
            return self.head
        return f"{self.head}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


# ---------------------------------------------------------------------------
# Temporal context expressions (rulechange mode)


@dataclass(frozen=True)
class CtxTrue:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class CtxLit:
    pattern: Pattern

    def __str__(self) -> str:
        return str(self.pattern)


@dataclass(frozen=True)
class CtxNot:
    sub: "CtxExpr"

    def __str__(self) -> str:
        return f"not {_paren(self.sub)}"


@dataclass(frozen=True)
class CtxAnd:
    left: "CtxExpr"
    right: "CtxExpr"

    def __str__(self) -> str:
        return f"{_paren(self.left)} and {_paren(self.right)}"


@dataclass(frozen=True)
class CtxOr:
    left: "CtxExpr"
    right: "CtxExpr"

    def __str__(self) -> str:
        return f"{_paren(self.left)} or {_paren(self.right)}"


@dataclass(frozen=True)
class CtxImplies:
    left: "CtxExpr"
    right: "CtxExpr"

    def __str__(self) -> str:
        return f"{_paren(self.left)} -> {_paren(self.right)}"


@dataclass(frozen=True)
class CtxRetro:
    """True when the state lies in the version's retroactive past."""

    def __str__(self) -> str:
        return "P"


@dataclass(frozen=True)
class CtxTemporal:
    """prev / always_past / prev_version / all_past_versions / next."""

    op: str
    sub: "CtxExpr"

    def __str__(self) -> str:
        return f"{self.op}({self.sub})"


CtxExpr = (
    CtxTrue
    | CtxLit
    | CtxNot
    | CtxAnd
    | CtxOr
    | CtxImplies
    | CtxRetro
    | CtxTemporal
)


def _paren(e: CtxExpr) -> str:
    if isinstance(e, (CtxTrue, CtxLit, CtxRetro, CtxTemporal)):
        return str(e)
    return f"({e})"


# ---------------------------------------------------------------------------
# AST


@dataclass
class TypeDecl:
    name: str
    constants: tuple[str, ...]
    line: int = 0


@dataclass
class SymbolDecl:
    name: str
    arg_types: tuple[str, ...]
    kind: str
    line: int = 0


@dataclass
class RuleTemplate:
    rule_id: str
    kind: str
    triggers: tuple[Pattern, ...]  # >1 only for rulechange generation rules
    outputs: tuple[Pattern, ...]
    ctx_pos: tuple[Pattern, ...] = ()
    ctx_neg: tuple[Pattern, ...] = ()
    temporal_ctx: Optional[CtxExpr] = None
    bindings: tuple[tuple[str, str], ...] = ()
    is_modrule: bool = False
    line: int = 0


@dataclass
class InitiallyDecl:
    item_id: str
    pattern: Pattern
    line: int = 0


@dataclass
class InstitutionDecl:
    name: str
    level: int
    types: list[TypeDecl] = field(default_factory=list)
    symbols: list[SymbolDecl] = field(default_factory=list)
    rules: list[RuleTemplate] = field(default_factory=list)
    initially: list[InitiallyDecl] = field(default_factory=list)
    # Instance-level observability grants on institutional event symbols:
    # the named ground instances are exogenous, the rest stay institutional.
    observables: list[InitiallyDecl] = field(default_factory=list)
    line: int = 0


@dataclass
class SpecAst:
    mode: str = MODE_MLG
    institutions: list[InstitutionDecl] = field(default_factory=list)
    edges: list[tuple[str, str]] = field(default_factory=list)  # (lower, higher)

    def institution(self, name: str) -> InstitutionDecl:
        for inst in self.institutions:
            if inst.name == name:
                return inst
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Ground form


@dataclass(frozen=True)
class GroundRule:
    rule_id: str  # declared template id
    subst: tuple[tuple[str, str], ...]  # variable assignment, sorted by name
    kind: str
    triggers: tuple[Term, ...]
    outputs: tuple[Term, ...]
    ctx: Context = None
    temporal_ctx: Optional[CtxExpr] = None  # ground literals inside

    @property
    def instance_id(self) -> str:
        if not self.subst:
            return self.rule_id
        binds = ",".join(f"{v}={c}" for v, c in self.subst)
        return f"{self.rule_id}[{binds}]"


@dataclass
class InstitutionSpec:
    """A ground institution: signature plus rule maps and initial state."""

    name: str
    level: int
    mode: str
    # Symbol tables (name -> SymbolDecl) for signature-membership checks.
    symbols: dict[str, SymbolDecl]
    types: dict[str, tuple[str, ...]]
    obs_events: frozenset[Term]
    inst_events: frozenset[Term]
    cnorm: frozenset[Term]
    anorm: frozenset[Term]
    gen_rules: tuple[GroundRule, ...]
    init_rules: tuple[GroundRule, ...]
    term_rules: tuple[GroundRule, ...]
    der_rules: tuple[GroundRule, ...]
    delta: frozenset[Term]
    initially_items: tuple[tuple[str, Term], ...] = ()
    rule_ids: tuple[str, ...] = ()  # declared template ids (rulechange targets)
    depth_hint: int = 1  # max norm nesting seen anywhere in the specification
    _canon_cnorm: frozenset[Term] = None

    def __post_init__(self):
        from .terms import canon

        self._canon_cnorm = frozenset(canon(n) for n in self.cnorm)

    # -- signature predicates -------------------------------------------------

    def is_concrete_norm(self, n: Term) -> bool:
        from .terms import canon

        return canon(n) in self._canon_cnorm

    def knows_term(self, t: Term) -> bool:
        """Whether ``t`` is built solely from this institution's symbols."""
        from . import terms as T

        if t.head in (T.NOW, T.NEVER, T.NULL):
            return True
        if t.head in (T.OBL, T.PRO, T.DISCH, T.VIOL, T.POW):
            return all(self.knows_term(a) for a in t.args)
        if t.head in (T.MOD, T.ACTIVE):
            return self.mode == MODE_RULECHANGE
        d = self.symbols.get(t.head)
        return d is not None and len(d.arg_types) == len(t.args)

    def is_observable(self, e: Term) -> bool:
        return e in self.obs_events

    def all_rules(self) -> tuple[GroundRule, ...]:
        return self.gen_rules + self.init_rules + self.term_rules + self.der_rules


@dataclass
class GovernanceGraph:
    """Ordered institutions plus the acyclic governs-relation.

    ``relation`` holds index pairs (i, j) with i < j meaning institution j
    governs institution i (j interprets and constrains i's regulatory
    effects).
    """

    institutions: list[InstitutionSpec]
    relation: frozenset[tuple[int, int]]
    ast: Optional[SpecAst] = None

    def __post_init__(self):
        for i, j in self.relation:
            if not i < j:
                raise ValueError(f"governs-relation must point upward: ({i}, {j})")

    def index_of(self, name: str) -> int:
        for i, inst in enumerate(self.institutions):
            if inst.name == name:
                return i
        raise KeyError(name)

    def governed_by(self, j: int) -> list[int]:
        """Indices of institutions directly governed by institution j."""
        return [i for (i, jj) in self.relation if jj == j]

    def observable_union(self) -> frozenset[Term]:
        out: set[Term] = set()
        for inst in self.institutions:
            out |= inst.obs_events
        return frozenset(out)
