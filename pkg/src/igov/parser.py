"""Parser for ``.igov`` institution specifications.

The concrete syntax is line-oriented and InstAL-flavoured::

    mode mlg;
    institution cfr level 3;
    type Agent = {ada, charles};
    exogenous event exConsent(Agent, Prov);
    inst event consent(Agent, Prov);
    fluent consented(Agent, Prov);
    noninertial fluent unfair(Agent);
    rule g1: storeData(C, A, metadata) generates storeData(C, A, personal);
    rule g3: storeData(C, A, personal) generates nonConsensual(A)
        in {not consented(A, C)};
    rule c1: consent(A, C) initiates consented(A, C);
    rule d1: obl(nonConsensual(A), now) derives unfair(A);
    initially pro(unfair(A), never);
    governs drr by drd;

Rule-change specifications (``mode rulechange;``) additionally allow
multi-event trigger sets, ``modrule`` declarations producing
``mod(op, id, t)`` events, and temporal contexts built from ``P``,
``prev(..)``, ``always_past(..)``, ``prev_version(..)``,
``all_past_versions(..)`` and ``next(..)``.

Comments start with ``#`` and run to end of line.  Variables are
capitalised identifiers; constants are lower-case.
"""

from __future__ import annotations

import re

from .errors import IgovSyntaxError
from .spec import (
    CtxAnd,
    CtxImplies,
    CtxLit,
    CtxNot,
    CtxOr,
    CtxRetro,
    CtxTemporal,
    CtxTrue,
    InitiallyDecl,
    InstitutionDecl,
    MODE_MLG,
    MODE_RULECHANGE,
    KIND_DERIVES,
    KIND_GENERATES,
    KIND_INITIATES,
    KIND_TERMINATES,
    Pattern,
    RuleTemplate,
    SpecAst,
    SymbolDecl,
    SYM_FLUENT,
    SYM_INST_EVENT,
    SYM_NONINERTIAL_FLUENT,
    SYM_OBS_EVENT,
    TypeDecl,
    Var,
)
from .terms import MOD, NEVER, NOW, RESERVED_HEADS

TEMPORAL_OPS = ("prev", "always_past", "prev_version", "all_past_versions", "next")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(){},;:=])
    """,
    re.VERBOSE,
)


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.kind}:{self.text}@{self.line}:{self.col}"


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise IgovSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        raw = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, raw, line, col))
        nl = raw.count("\n")
        if nl:
            line += nl
            col = len(raw) - raw.rfind("\n")
        else:
            col += len(raw)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


KEYWORDS = {
    "mode",
    "institution",
    "level",
    "type",
    "exogenous",
    "obs",
    "inst",
    "event",
    "fluent",
    "noninertial",
    "rule",
    "modrule",
    "initially",
    "governs",
    "observable",
    "by",
    "generates",
    "initiates",
    "terminates",
    "derives",
    "in",
    "where",
    "not",
    "and",
    "or",
    "true",
}


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.ast = SpecAst()
        self.current: InstitutionDecl | None = None
        self._auto_init = 0

    # -- token helpers ------------------------------------------------------

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise IgovSyntaxError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def expect_ident(self) -> _Tok:
        t = self.next()
        if t.kind != "ident":
            raise IgovSyntaxError(f"expected identifier, found {t.text!r}", t.line, t.col)
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text

    # -- grammar ------------------------------------------------------------

    def parse(self) -> SpecAst:
        while self.peek().kind != "eof":
            self.statement()
        return self.ast

    def need_inst(self, tok: _Tok) -> InstitutionDecl:
        if self.current is None:
            raise IgovSyntaxError(
                "declaration outside an institution block", tok.line, tok.col
            )
        return self.current

    def statement(self) -> None:
        t = self.peek()
        if t.text == "mode":
            self.next()
            m = self.expect_ident()
            if m.text not in (MODE_MLG, MODE_RULECHANGE):
                raise IgovSyntaxError(f"unknown mode {m.text!r}", m.line, m.col)
            self.ast.mode = m.text
            self.expect(";")
        elif t.text == "institution":
            self.next()
            name = self.expect_ident()
            level = 1
            if self.at("level"):
                self.next()
                lv = self.next()
                if lv.kind != "int":
                    raise IgovSyntaxError("level must be an integer", lv.line, lv.col)
                level = int(lv.text)
            self.expect(";")
            decl = InstitutionDecl(name=name.text, level=level, line=t.line)
            self.ast.institutions.append(decl)
            self.current = decl
        elif t.text == "type":
            self.next()
            name = self.expect_ident()
            self.expect("=")
            self.expect("{")
            consts = []
            while not self.at("}"):
                c = self.expect_ident()
                consts.append(c.text)
                if self.at(","):
                    self.next()
            self.expect("}")
            self.expect(";")
            self.need_inst(t).types.append(
                TypeDecl(name=name.text, constants=tuple(consts), line=t.line)
            )
        elif t.text in ("exogenous", "obs", "inst", "fluent", "noninertial"):
            self.symbol_decl()
        elif t.text in ("rule", "modrule"):
            self.rule_decl()
        elif t.text == "initially":
            self.next()
            pat = self.pattern()
            self.expect(";")
            inst = self.need_inst(t)
            self._auto_init += 1
            inst.initially.append(
                InitiallyDecl(
                    item_id=f"{inst.name}_init{self._auto_init}",
                    pattern=pat,
                    line=t.line,
                )
            )
        elif t.text == "observable":
            self.next()
            pat = self.pattern()
            self.expect(";")
            inst = self.need_inst(t)
            inst.observables.append(
                InitiallyDecl(
                    item_id=f"{inst.name}_obs{len(inst.observables) + 1}",
                    pattern=pat,
                    line=t.line,
                )
            )
        elif t.text == "governs":
            self.next()
            lower = self.expect_ident()
            self.expect("by")
            higher = self.expect_ident()
            self.expect(";")
            self.ast.edges.append((lower.text, higher.text))
        else:
            raise IgovSyntaxError(f"unexpected token {t.text!r}", t.line, t.col)

    def symbol_decl(self) -> None:
        t = self.next()
        if t.text in ("exogenous", "obs"):
            self.expect("event")
            kind = SYM_OBS_EVENT
        elif t.text == "inst":
            self.expect("event")
            kind = SYM_INST_EVENT
        elif t.text == "noninertial":
            self.expect("fluent")
            kind = SYM_NONINERTIAL_FLUENT
        else:  # fluent
            kind = SYM_FLUENT
        name = self.expect_ident()
        if name.text in RESERVED_HEADS:
            raise IgovSyntaxError(
                f"{name.text!r} is a reserved term head", name.line, name.col
            )
        arg_types = []
        if self.at("("):
            self.next()
            while not self.at(")"):
                a = self.expect_ident()
                arg_types.append(a.text)
                if self.at(","):
                    self.next()
            self.expect(")")
        self.expect(";")
        self.need_inst(t).symbols.append(
            SymbolDecl(name=name.text, arg_types=tuple(arg_types), kind=kind, line=t.line)
        )

    def rule_decl(self) -> None:
        t = self.next()
        is_modrule = t.text == "modrule"
        rid = self.expect_ident()
        self.expect(":")
        triggers = self.trigger_patterns()
        kw = self.next()
        if kw.text not in (KIND_GENERATES, KIND_INITIATES, KIND_TERMINATES, KIND_DERIVES):
            raise IgovSyntaxError(
                f"expected a rule kind, found {kw.text!r}", kw.line, kw.col
            )
        outputs = [self.pattern()]
        while self.at(","):
            self.next()
            outputs.append(self.pattern())
        ctx_pos: list[Pattern] = []
        ctx_neg: list[Pattern] = []
        temporal = None
        if self.at("in"):
            self.next()
            if self.ast.mode == MODE_RULECHANGE:
                temporal = self.ctx_expr()
            else:
                self.expect("{")
                while not self.at("}"):
                    if self.at("not"):
                        self.next()
                        ctx_neg.append(self.pattern())
                    else:
                        ctx_pos.append(self.pattern())
                    if self.at(","):
                        self.next()
                self.expect("}")
        bindings: list[tuple[str, str]] = []
        if self.at("where"):
            self.next()
            while True:
                a = self.expect_ident()
                self.expect("=")
                b = self.expect_ident()
                bindings.append((a.text, b.text))
                if self.at(","):
                    self.next()
                else:
                    break
        self.expect(";")
        self.need_inst(t).rules.append(
            RuleTemplate(
                rule_id=rid.text,
                kind=kw.text,
                triggers=tuple(triggers),
                outputs=tuple(outputs),
                ctx_pos=tuple(ctx_pos),
                ctx_neg=tuple(ctx_neg),
                temporal_ctx=temporal,
                bindings=tuple(bindings),
                is_modrule=is_modrule,
                line=t.line,
            )
        )

    def trigger_patterns(self) -> list[Pattern]:
        if self.at("{"):
            self.next()
            pats = []
            while not self.at("}"):
                pats.append(self.pattern())
                if self.at(","):
                    self.next()
            self.expect("}")
            return pats
        return [self.pattern()]

    def pattern(self) -> Pattern:
        t = self.next()
        if t.kind == "int":
            return Pattern(head=t.text)
        if t.kind != "ident":
            raise IgovSyntaxError(f"expected a term, found {t.text!r}", t.line, t.col)
        name = t.text
        if not self.at("("):
            if name[0].isupper():
                raise IgovSyntaxError(
                    f"a bare variable {name!r} cannot stand for a whole term",
                    t.line,
                    t.col,
                )
            return Pattern(head=name)
        self.next()
        args = []
        while not self.at(")"):
            nxt = self.peek()
            if nxt.kind == "int":
                self.next()
                args.append(nxt.text)
            elif nxt.kind == "ident" and self._is_plain_arg():
                self.next()
                if nxt.text[0].isupper():
                    args.append(Var(nxt.text))
                elif nxt.text in RESERVED_HEADS:
                    # now / never / null read as nullary terms, not constants
                    args.append(Pattern(head=nxt.text))
                else:
                    args.append(nxt.text)
            else:
                args.append(self.pattern())
            if self.at(","):
                self.next()
        self.expect(")")
        return Pattern(head=name, args=tuple(args))

    def _is_plain_arg(self) -> bool:
        # Lookahead: identifier not followed by '(' is a constant/variable.
        return self.toks[self.i + 1].text != "("

    # -- temporal context expressions (rulechange) ---------------------------

    def ctx_expr(self) -> object:
        return self.ctx_implies()

    def ctx_implies(self) -> object:
        left = self.ctx_or()
        if self.at("->"):
            self.next()
            right = self.ctx_implies()  # right-associative
            return CtxImplies(left, right)
        return left

    def ctx_or(self) -> object:
        left = self.ctx_and()
        while self.at("or"):
            self.next()
            left = CtxOr(left, self.ctx_and())
        return left

    def ctx_and(self) -> object:
        left = self.ctx_unary()
        while self.at("and"):
            self.next()
            left = CtxAnd(left, self.ctx_unary())
        return left

    def ctx_unary(self) -> object:
        t = self.peek()
        if t.text == "not":
            self.next()
            return CtxNot(self.ctx_unary())
        if t.text == "(":
            self.next()
            e = self.ctx_expr()
            self.expect(")")
            return e
        if t.text == "true":
            self.next()
            return CtxTrue()
        if t.text == "P":
            self.next()
            return CtxRetro()
        if t.text in TEMPORAL_OPS:
            self.next()
            self.expect("(")
            e = self.ctx_expr()
            self.expect(")")
            return CtxTemporal(op=t.text, sub=e)
        return CtxLit(self.pattern())


def parse(text: str) -> SpecAst:
    """Parse ``.igov`` source text into a specification AST."""
    return _Parser(text).parse()


def parse_trace(text: str) -> list[tuple[int, str]]:
    """Parse a ``.itr`` trace file into (instant, raw-event-text) pairs.

    Format: one event per line, ``observed exEnter(ada, street_b) @ 0;``.
    ``null`` marks an instant with no observable event.
    """
    entries: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"observed\s+(.+?)\s*@\s*(\d+)\s*;$", line)
        if not m:
            raise IgovSyntaxError(f"bad trace line: {raw.strip()!r}", lineno, 1)
        entries.append((int(m.group(2)), m.group(1)))
    return entries
