"""Quantifier-free first-order formulas over gridworld state predicates.

Grammar (EBNF)::

    formula    = implies ;
    implies    = or_expr [ "->" implies ] ;
    or_expr    = and_expr { "||" and_expr } ;
    and_expr   = unary { "&&" unary } ;
    unary      = "!" unary | atom ;
    atom       = "true" | "false" | "(" formula ")" | term CMP term ;
    term       = INT | "-" INT | coord | NAME [ "[" term "]" ] | NAME "(" term { "," term } ")" ;
    coord      = "(" [ "-" ] INT "," [ "-" ] INT ")" ;
    CMP        = "==" | "!=" | "<" | "<=" | ">" | ">=" ;

``NAME`` resolves, in order, to a builtin function (``manhattan``), a symbolic
constant (``OPEN``/``CLOSED``/``LOCKED``, a colour name), a declared state
predicate, or a task variable.  Coordinates may only be compared with ``==``
and ``!=``; comparing a coordinate with the literal ``-1`` tests for the
missing/occluded sentinel ``(-1, -1)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Union

COLORS = ("red", "green", "blue", "purple", "yellow", "grey")
COLOR_INDEX = {c: i for i, c in enumerate(COLORS)}

OPEN, CLOSED, LOCKED = 0, 1, 2
ABSENT = -1
NOWHERE = (-1, -1)
ENUM_CONSTANTS = {"OPEN": OPEN, "CLOSED": CLOSED, "LOCKED": LOCKED}

SCALAR = "scalar"
COORD2 = "coord2"

# value types used by the checker
BOOL, INT, COORD, COLOR = "bool", "int", "coord", "color"


class FormulaError(ValueError):
    """Base class for formula parse and type errors."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class FormulaSyntaxError(FormulaError):
    pass


class UnknownPredicateError(FormulaError):
    pass


class UnknownTaskVariableError(FormulaError):
    pass


class FormulaTypeError(FormulaError):
    pass


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    kind: str  # SCALAR or COORD2
    colored: bool = False


@dataclass(frozen=True)
class EnvSchema:
    """Predicates, ordered action names and grid size of one environment."""

    predicates: tuple[PredicateDecl, ...]
    actions: tuple[str, ...]
    grid_size: int

    def __post_init__(self):
        if len(set(self.actions)) != len(self.actions):
            raise ValueError("action names must be unique")
        if not self.actions:
            raise ValueError("schema needs at least one action")
        if self.grid_size <= 0:
            raise ValueError("grid_size must be positive")
        names = [p.name for p in self.predicates]
        if len(set(names)) != len(names):
            raise ValueError("predicate names must be unique")

    def predicate(self, name: str) -> PredicateDecl | None:
        for p in self.predicates:
            if p.name == name:
                return p
        return None

    @property
    def full_mask(self) -> int:
        return (1 << len(self.actions)) - 1

    def mask_of(self, names: Iterable[str]) -> int:
        bits = 0
        for n in names:
            try:
                bits |= 1 << self.actions.index(n)
            except ValueError:
                raise ValueError(f"unknown action {n!r}") from None
        return bits

    def mask_names(self, mask: int) -> list[str]:
        return [a for i, a in enumerate(self.actions) if mask >> i & 1]


# ---------------------------------------------------------------- AST nodes


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class Implies:
    lhs: object
    rhs: object


@dataclass(frozen=True)
class Cmp:
    op: str
    lhs: object
    rhs: object


@dataclass(frozen=True)
class IntConst:
    value: int
    # printed name for symbolic constants (OPEN, red, ...)
    symbol: str | None = None


@dataclass(frozen=True)
class Coord2Const:
    x: int
    y: int


@dataclass(frozen=True)
class PredRef:
    name: str
    index: object = None


@dataclass(frozen=True)
class TaskVarRef:
    name: str


@dataclass(frozen=True)
class FnCall:
    name: str
    args: tuple


Node = Union[BoolConst, And, Or, Not, Implies, Cmp, IntConst, Coord2Const, PredRef, TaskVarRef, FnCall]

CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")

BUILTINS = {
    # name: (arg types, return type)
    "manhattan": ((COORD, COORD), INT),
}


def _manhattan(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


_BUILTIN_IMPL = {"manhattan": _manhattan}


# ---------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|==|!=|<=|>=|&&|\|\||[<>!()\[\],\-])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "ws":
            for i, ch in enumerate(m.group()):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        else:
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# ---------------------------------------------------------------- parser


@dataclass(frozen=True)
class Formula:
    """A parsed, type-checked formula.  Equality is structural on the AST."""

    ast: Node
    text: str = field(compare=False, default="")

    def __str__(self):
        return to_text(self.ast)

    def __call__(self, preds: Mapping, bindings: Mapping) -> bool:
        return self.compiled(preds, bindings)

    @property
    def compiled(self) -> Callable[[Mapping, Mapping], bool]:
        fn = self.__dict__.get("_compiled")
        if fn is None:
            fn = _compile(self.ast)
            object.__setattr__(self, "_compiled", fn)
        return fn

    def task_vars(self) -> set[str]:
        return {n.name for n in walk(self.ast) if isinstance(n, TaskVarRef)}


TRUE = Formula(BoolConst(True), "true")
FALSE = Formula(BoolConst(False), "false")


class _Parser:
    def __init__(self, text, schema: EnvSchema, task_vars):
        self.toks = _tokenize(text)
        self.i = 0
        self.schema = schema
        self.task_vars = set(task_vars)

    def peek(self, k=0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text) -> _Tok:
        t = self.next()
        if t.text != text:
            found = t.text or "end of input"
            raise FormulaSyntaxError(f"expected {text!r}, found {found!r}", t.line, t.col)
        return t

    def error(self, tok, msg, cls=FormulaSyntaxError):
        return cls(msg, tok.line, tok.col)

    # formula level -------------------------------------------------------

    def parse(self):
        node = self.implies()
        t = self.peek()
        if t.kind != "eof":
            raise self.error(t, f"unexpected {t.text!r}")
        return node

    def implies(self):
        lhs = self.or_expr()
        if self.peek().text == "->":
            self.next()
            return Implies(lhs, self.implies())
        return lhs

    def or_expr(self):
        args = [self.and_expr()]
        while self.peek().text == "||":
            self.next()
            args.append(self.and_expr())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def and_expr(self):
        args = [self.unary()]
        while self.peek().text == "&&":
            self.next()
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args))

    def unary(self):
        if self.peek().text == "!":
            self.next()
            return Not(self.unary())
        return self.atom()

    def _is_coord_literal(self):
        # "(" ["-"] INT ","
        j = 1
        if self.peek(j).text == "-":
            j += 1
        return self.peek(j).kind == "int" and self.peek(j + 1).text == ","

    def atom(self):
        t = self.peek()
        if t.kind == "name" and t.text in ("true", "false"):
            self.next()
            return BoolConst(t.text == "true")
        if t.text == "(" and not self._is_coord_literal():
            self.next()
            node = self.implies()
            self.expect(")")
            return node
        lhs, lt = self.term()
        op = self.peek()
        if op.text not in CMP_OPS:
            found = op.text or "end of input"
            raise self.error(op, f"expected comparison operator, found {found!r}")
        self.next()
        rhs, rt = self.term()
        self.check_cmp(op, lhs, lt, rhs, rt)
        return Cmp(op.text, lhs, rhs)

    def check_cmp(self, tok, lhs, lt, rhs, rt):
        sentinel = lambda n: isinstance(n, IntConst) and n.value == -1 and n.symbol is None  # noqa: E731
        if lt == rt:
            if lt in (COORD, COLOR) and tok.text not in ("==", "!="):
                raise self.error(tok, f"operator {tok.text} not defined on {lt} values", FormulaTypeError)
            return
        if {lt, rt} == {COORD, INT} and tok.text in ("==", "!=") and (sentinel(lhs) or sentinel(rhs)):
            return
        raise self.error(tok, f"type mismatch: cannot compare {lt} with {rt}", FormulaTypeError)

    # term level ----------------------------------------------------------

    def term(self):
        t = self.peek()
        if t.text == "-":
            self.next()
            n = self.next()
            if n.kind != "int":
                raise self.error(n, "expected integer after '-'")
            return IntConst(-int(n.text)), INT
        if t.kind == "int":
            self.next()
            return IntConst(int(t.text)), INT
        if t.text == "(":
            if not self._is_coord_literal():
                raise self.error(t, "expected a term")
            self.next()
            x = self._signed_int()
            self.expect(",")
            y = self._signed_int()
            self.expect(")")
            return Coord2Const(x, y), COORD
        if t.kind != "name":
            found = t.text or "end of input"
            raise self.error(t, f"expected a term, found {found!r}")
        self.next()
        name = t.text
        if name in BUILTINS:
            return self.fncall(t)
        if name in ENUM_CONSTANTS:
            return IntConst(ENUM_CONSTANTS[name], name), INT
        if name in COLOR_INDEX:
            return IntConst(COLOR_INDEX[name], name), COLOR
        decl = self.schema.predicate(name)
        if decl is not None:
            return self.predref(t, decl)
        if name in self.task_vars:
            return TaskVarRef(name), COLOR
        if self.peek().text in ("[", "("):
            raise self.error(t, f"unknown predicate {name!r}", UnknownPredicateError)
        raise self.error(t, f"unknown name {name!r}: not a predicate or task variable", UnknownTaskVariableError)

    def _signed_int(self):
        neg = False
        if self.peek().text == "-":
            self.next()
            neg = True
        n = self.next()
        if n.kind != "int":
            raise self.error(n, "expected integer")
        return -int(n.text) if neg else int(n.text)

    def fncall(self, tok):
        argtypes, ret = BUILTINS[tok.text]
        self.expect("(")
        args = []
        while True:
            at = self.peek()
            node, ty = self.term()
            if len(args) < len(argtypes) and ty != argtypes[len(args)]:
                raise self.error(at, f"{tok.text} argument {len(args) + 1} must be {argtypes[len(args)]}, got {ty}",
                                 FormulaTypeError)
            args.append(node)
            if self.peek().text == ",":
                self.next()
                continue
            self.expect(")")
            break
        if len(args) != len(argtypes):
            raise self.error(tok, f"{tok.text} takes {len(argtypes)} arguments, got {len(args)}", FormulaTypeError)
        return FnCall(tok.text, tuple(args)), ret

    def predref(self, tok, decl: PredicateDecl):
        ty = COORD if decl.kind == COORD2 else INT
        if self.peek().text == "[":
            if not decl.colored:
                raise self.error(self.peek(), f"predicate {decl.name!r} is not colour-indexed", FormulaTypeError)
            self.next()
            it = self.peek()
            idx, ity = self.term()
            if ity != COLOR:
                raise self.error(it, "predicate index must be a colour", FormulaTypeError)
            self.expect("]")
            return PredRef(decl.name, idx), ty
        if decl.colored:
            raise self.error(tok, f"predicate {decl.name!r} needs a colour index", FormulaTypeError)
        return PredRef(decl.name), ty


def parse_formula(text: str, schema: EnvSchema, task_vars: Iterable[str] = ()) -> Formula:
    if not text or not text.strip():
        raise FormulaSyntaxError("empty formula", 1, 1)
    ast = _Parser(text, schema, task_vars).parse()
    return Formula(ast, text)


# ---------------------------------------------------------------- printer

_PREC = {Implies: 1, Or: 2, And: 3, Not: 4}


def _prec(node):
    return _PREC.get(type(node), 5)


def to_text(node: Node) -> str:
    if isinstance(node, BoolConst):
        return "true" if node.value else "false"
    if isinstance(node, Implies):
        lhs = to_text(node.lhs)
        # implication is right-associative
        if _prec(node.lhs) <= 1:
            lhs = f"({lhs})"
        rhs = to_text(node.rhs)
        if _prec(node.rhs) < 1:
            rhs = f"({rhs})"
        return f"{lhs} -> {rhs}"
    if isinstance(node, (Or, And)):
        sep = " || " if isinstance(node, Or) else " && "
        mine = _prec(node)
        parts = []
        for a in node.args:
            s = to_text(a)
            if _prec(a) <= mine:
                s = f"({s})"
            parts.append(s)
        return sep.join(parts)
    if isinstance(node, Not):
        s = to_text(node.arg)
        if _prec(node.arg) < 5 and not isinstance(node.arg, Not):
            s = f"({s})"
        return f"!{s}"
    if isinstance(node, Cmp):
        return f"{to_text(node.lhs)} {node.op} {to_text(node.rhs)}"
    if isinstance(node, IntConst):
        return node.symbol if node.symbol is not None else str(node.value)
    if isinstance(node, Coord2Const):
        return f"({node.x}, {node.y})"
    if isinstance(node, PredRef):
        if node.index is None:
            return node.name
        return f"{node.name}[{to_text(node.index)}]"
    if isinstance(node, TaskVarRef):
        return node.name
    if isinstance(node, FnCall):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(f"not a formula node: {node!r}")


def walk(node):
    yield node
    if isinstance(node, (And, Or)):
        for a in node.args:
            yield from walk(a)
    elif isinstance(node, Not):
        yield from walk(node.arg)
    elif isinstance(node, (Implies, Cmp)):
        yield from walk(node.lhs)
        yield from walk(node.rhs)
    elif isinstance(node, PredRef) and node.index is not None:
        yield from walk(node.index)
    elif isinstance(node, FnCall):
        for a in node.args:
            yield from walk(a)


# ---------------------------------------------------------------- evaluation
#
# ``preds`` maps predicate name -> value; colour-indexed predicates map to a
# sequence (or dict) indexed by colour number.  Missing colours and missing
# predicates evaluate to the sentinel.  ``bindings`` maps task variable name
# -> colour index.

_CMP_FN = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class UnboundTaskVariable(RuntimeError):
    pass


def _lookup(preds, name, idx):
    v = preds.get(name, ABSENT)
    if idx is None:
        return v
    t = type(v)
    if t is list or t is tuple:
        return v[idx] if 0 <= idx < len(v) else ABSENT
    if isinstance(v, Mapping):
        return v.get(idx, ABSENT)
    return ABSENT


def _norm_coord(v):
    if v == ABSENT or v is None:
        return NOWHERE
    return tuple(v)


def _compile_term(node):
    if isinstance(node, IntConst):
        v = node.value
        return lambda p, b: v
    if isinstance(node, Coord2Const):
        v = (node.x, node.y)
        return lambda p, b: v
    if isinstance(node, TaskVarRef):
        name = node.name

        def var(p, b):
            try:
                return b[name]
            except KeyError:
                raise UnboundTaskVariable(name) from None
        return var
    if isinstance(node, PredRef):
        name = node.name
        if node.index is None:
            return lambda p, b: _lookup(p, name, None)
        idx = _compile_term(node.index)
        return lambda p, b: _lookup(p, name, idx(p, b))
    if isinstance(node, FnCall):
        impl = _BUILTIN_IMPL[node.name]
        args = [_compile_term(a) for a in node.args]
        argtypes = BUILTINS[node.name][0]
        conv = [(_norm_coord if t == COORD else (lambda x: x)) for t in argtypes]
        return lambda p, b: impl(*(c(a(p, b)) for c, a in zip(conv, args)))
    raise TypeError(f"not a term: {node!r}")


def _compile(node) -> Callable:
    if isinstance(node, BoolConst):
        v = node.value
        return lambda p, b: v
    if isinstance(node, And):
        fs = [_compile(a) for a in node.args]
        if len(fs) == 2:
            f0, f1 = fs
            return lambda p, b: bool(f0(p, b) and f1(p, b))
        return lambda p, b: all(f(p, b) for f in fs)
    if isinstance(node, Or):
        fs = [_compile(a) for a in node.args]
        if len(fs) == 2:
            f0, f1 = fs
            return lambda p, b: bool(f0(p, b) or f1(p, b))
        return lambda p, b: any(f(p, b) for f in fs)
    if isinstance(node, Not):
        f = _compile(node.arg)
        return lambda p, b: not f(p, b)
    if isinstance(node, Implies):
        lf, rf = _compile(node.lhs), _compile(node.rhs)
        return lambda p, b: (not lf(p, b)) or rf(p, b)
    if isinstance(node, Cmp):
        lhs, rhs = _compile_term(node.lhs), _compile_term(node.rhs)
        op = _CMP_FN[node.op]

        def cmp(p, b):
            a, c = lhs(p, b), rhs(p, b)
            # sentinel: a coordinate compared with -1 is compared with (-1, -1)
            ta, tc = type(a) is tuple, type(c) is tuple
            if ta and not tc:
                c = NOWHERE if c == ABSENT else c
            elif tc and not ta:
                a = NOWHERE if a == ABSENT else a
            return op(a, c)
        return cmp
    raise TypeError(f"not a formula node: {node!r}")


def eval_formula(f: Formula, preds: Mapping, bindings: Mapping) -> bool:
    """Evaluate ``f`` on a predicate view of a state under task ``bindings``.

    ``preds`` may also be any object exposing ``predicates()``, such as an
    environment state; ``bindings`` may be a task object exposing
    ``bindings``.
    """
    if hasattr(preds, "predicates"):
        preds = preds.predicates()
    if hasattr(bindings, "bindings"):
        bindings = bindings.bindings
    return bool(f.compiled(preds, bindings))
