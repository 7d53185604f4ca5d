"""Canonical printer: emits a normalized ``.igov`` form of an AST.

``parse(print_spec(ast))`` reproduces the AST, which the test suite checks
as a round-trip property.  Declaration order is preserved; spacing and
punctuation are normalized.
"""

from __future__ import annotations

from .spec import (
    InstitutionDecl,
    KIND_GENERATES,
    Pattern,
    RuleTemplate,
    SpecAst,
    SYM_FLUENT,
    SYM_INST_EVENT,
    SYM_NONINERTIAL_FLUENT,
    SYM_OBS_EVENT,
    Var,
)

_SYM_KEYWORD = {
    SYM_OBS_EVENT: "exogenous event",
    SYM_INST_EVENT: "inst event",
    SYM_FLUENT: "fluent",
    SYM_NONINERTIAL_FLUENT: "noninertial fluent",
}


def _pat(p) -> str:
    if isinstance(p, Var):
        return p.name
    if isinstance(p, Pattern):
        if not p.args:
            return p.head
        return f"{p.head}({', '.join(_pat(a) for a in p.args)})"
    return str(p)


def _rule(r: RuleTemplate) -> str:
    kw = "modrule" if r.is_modrule else "rule"
    if len(r.triggers) == 1:
        trig = _pat(r.triggers[0])
    else:
        trig = "{" + ", ".join(_pat(t) for t in r.triggers) + "}"
    out = ", ".join(_pat(o) for o in r.outputs)
    s = f"{kw} {r.rule_id}: {trig} {r.kind} {out}"
    if r.temporal_ctx is not None:
        s += f" in {r.temporal_ctx}"
    elif r.ctx_pos or r.ctx_neg:
        lits = [_pat(c) for c in r.ctx_pos] + [f"not {_pat(c)}" for c in r.ctx_neg]
        s += " in {" + ", ".join(lits) + "}"
    if r.bindings:
        s += " where " + ", ".join(f"{a} = {b}" for a, b in r.bindings)
    return s + ";"


def print_institution(inst: InstitutionDecl) -> str:
    lines = [f"institution {inst.name} level {inst.level};"]
    for td in inst.types:
        lines.append(f"type {td.name} = {{{', '.join(td.constants)}}};")
    for sd in inst.symbols:
        args = f"({', '.join(sd.arg_types)})" if sd.arg_types else ""
        lines.append(f"{_SYM_KEYWORD[sd.kind]} {sd.name}{args};")
    for r in inst.rules:
        lines.append(_rule(r))
    for item in inst.observables:
        lines.append(f"observable {_pat(item.pattern)};")
    for item in inst.initially:
        lines.append(f"initially {_pat(item.pattern)};")
    return "\n".join(lines)


def print_spec(ast: SpecAst) -> str:
    parts = [f"mode {ast.mode};"]
    for inst in ast.institutions:
        parts.append(print_institution(inst))
    for lower, higher in ast.edges:
        parts.append(f"governs {lower} by {higher};")
    return "\n\n".join(parts) + "\n"
