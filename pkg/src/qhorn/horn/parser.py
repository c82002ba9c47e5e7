"""Recursive-descent parser for clause files.

Grammar (informal)::

    program   := (directive | clause)*
    directive := "#op" name ["antiunitary"] matrix "."
               | "#state" name ket "."
               | "#system" name dim [statename] "."
               | "#param" name number "."
               | "#walk" name "."
               | "#fock" name horizon cells "."
    clause    := [head] [":-" body] "."
    body      := pred ("," pred)*
    pred      := ["~"] [deco] name "(" terms ")" ["*"]
               | term "=" term
               | "[" term "," term "]" "=" "0"

``%`` starts a comment.  Kets are written ``c|01⟩`` (``>`` also closes a ket).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import sympy

from .terms import Atom, Clause, Compound, HornError, Ket, Num, Pred, Var


class ParseError(HornError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"syntax error at line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<directive>\#[a-z]+)
  | (?P<deco>@[0-9]+)
  | (?P<ket>\|[0-9]*(?:⟩|>))
  | (?P<number>\d+\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)
  | (?P<neck>:-)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>[(),.\[\]=*+\-/~^])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(src: str) -> list:
    out = []
    pos, line, col0 = 0, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - col0 + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            col0 = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, m.start() - col0 + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - col0 + 1))
    return out


@dataclass
class Directive:
    kind: str
    name: str
    args: tuple = ()
    line: int = 0


@dataclass
class Program:
    clauses: list = field(default_factory=list)
    directives: list = field(default_factory=list)


_FUNCS = {"sqrt": sympy.sqrt, "exp": sympy.exp, "cos": sympy.cos, "sin": sympy.sin}


class Parser:
    def __init__(self, src: str, params: Optional[set] = None):
        self.toks = tokenize(src)
        self.i = 0
        self.params = set(params or ())

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def take(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            got = t.text or t.kind
            self.error(f"expected {want!r}, found {got!r}")
        self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    # -- program
    def program(self) -> Program:
        prog = Program()
        while not self.at("eof"):
            if self.at("directive"):
                d = self.directive()
                prog.directives.append(d)
                if d.kind == "param":
                    self.params.add(d.name)
            else:
                prog.clauses.append(self.clause())
        return prog

    def directive(self) -> Directive:
        t = self.take("directive")
        kind = t.text[1:]
        name = self.take("name").text
        if kind == "op":
            anti = False
            if self.at("name", "antiunitary"):
                self.i += 1
                anti = True
            mat = self.matrix()
            args = (mat, anti)
        elif kind == "state":
            args = (self.ket_expr(),)
        elif kind == "system":
            dim = int(self.take("number").text)
            init = self.take("name").text if self.at("name") else None
            args = (dim, init)
        elif kind == "param":
            args = (self.arith(),)
        elif kind == "walk":
            args = ()
        elif kind == "fock":
            horizon = float(self.take("number").text)
            cells = int(self.take("number").text)
            args = (horizon, cells)
        else:
            self.error(f"unknown directive #{kind}", t)
        self.take("punct", ".")
        return Directive(kind, name, args, t.line)

    def matrix(self) -> np.ndarray:
        self.take("punct", "[")
        rows = [self.matrix_row()]
        while self.at("punct", ","):
            self.i += 1
            rows.append(self.matrix_row())
        self.take("punct", "]")
        if len({len(r) for r in rows}) != 1:
            self.error("ragged matrix literal")
        return np.array([[complex(sympy.N(x)) for x in r] for r in rows], dtype=complex)

    def matrix_row(self) -> list:
        self.take("punct", "[")
        row = [self.arith()]
        while self.at("punct", ","):
            self.i += 1
            row.append(self.arith())
        self.take("punct", "]")
        return row

    def clause(self) -> Clause:
        line = self.tok.line
        head = None
        if not self.at("neck"):
            head = self.predicate()
            if head.negated:
                self.error("clause heads cannot be negated")
        body = []
        if self.at("neck"):
            self.i += 1
            body.append(self.predicate())
            while self.at("punct", ","):
                self.i += 1
                body.append(self.predicate())
        if head is None and not body:
            self.error("empty clause")
        if not self.at("punct", "."):
            self.error(f"expected ',' or '.', found {self.tok.text!r}")
        self.i += 1
        return Clause(head, tuple(body), line)

    def goal(self) -> list:
        """Comma-separated predicates, optional final '.'."""
        preds = [self.predicate()]
        while self.at("punct", ","):
            self.i += 1
            preds.append(self.predicate())
        if self.at("punct", "."):
            self.i += 1
        if not self.at("eof"):
            self.error(f"unexpected {self.tok.text!r} after goal")
        return preds

    def predicate(self) -> Pred:
        negated = False
        if self.at("punct", "~"):
            self.i += 1
            negated = True
        deco = None
        if self.at("deco"):
            t = self.take("deco")
            deco = int(t.text[1:])
            if deco > 3:
                self.error(f"unknown decoration {t.text}", t)
        if self.at("punct", "["):
            self.i += 1
            x = self.term()
            self.take("punct", ",")
            y = self.term()
            self.take("punct", "]")
            self.take("punct", "=")
            zero = self.take("number")
            if float(zero.text) != 0:
                self.error("commutator constraints must read '= 0'", zero)
            return Pred("commutes", (x, y), deco, negated)
        if self.at("name") and self.peek().kind == "punct" and self.peek().text == "(":
            name = self.take("name").text
            if name[0].isupper() or name[0] == "_":
                self.error("predicate names must start lowercase")
            args = self.args()
            if self.at("punct", "="):
                self.i += 1
                rhs = self.term()
                return Pred("=", (Compound(name, args), rhs), deco, negated)
            measured = False
            if self.at("punct", "*"):
                self.i += 1
                measured = True
            dagger = False
            if self.at("punct", "^") and self.peek().text == "dag":
                self.i += 2
                dagger = True
            return Pred(name, args, deco, negated, measured, dagger)
        lhs = self.term()
        if self.at("punct", "="):
            self.i += 1
            return Pred("=", (lhs, self.term()), deco, negated)
        if isinstance(lhs, Atom):
            return Pred(lhs.name, (), deco, negated, self._star())
        self.error(f"expected a predicate, found {self.tok.text or self.tok.kind!r}")

    def _star(self) -> bool:
        if self.at("punct", "*"):
            self.i += 1
            return True
        return False

    def args(self) -> tuple:
        self.take("punct", "(")
        if self.at("punct", ")"):
            self.i += 1
            return ()
        out = [self.term()]
        while self.at("punct", ","):
            self.i += 1
            out.append(self.term())
        self.take("punct", ")")
        return tuple(out)

    # -- terms
    def term(self):
        t = self.tok
        if t.kind == "ket" or (t.kind == "punct" and t.text == "-" and self.peek().kind == "ket"):
            return self.ket_expr()
        if t.kind == "name" and (t.text[0].isupper() or t.text[0] == "_"):
            # variables never carry arguments
            self.i += 1
            if t.text == "_":
                self._anon = getattr(self, "_anon", 0) + 1
                return Var(f"_G{self._anon}")
            return Var(t.text)
        if t.kind == "name" and t.text not in self.params and t.text not in _FUNCS:
            self.i += 1
            if self.at("punct", "("):
                return Compound(t.text, self.args())
            return Atom(t.text)
        # numeric or parameter expression, possibly the coefficient of a ket
        coeff = self.arith()
        if self.at("ket"):
            return self.ket_expr(first_coeff=coeff)
        if self.at("punct", "*") and self.peek().kind == "ket":
            self.i += 1
            return self.ket_expr(first_coeff=coeff)
        return Num(coeff)

    def ket_expr(self, first_coeff=None) -> Ket:
        pairs = []
        sign = 1
        if first_coeff is None and self.at("punct", "-"):
            self.i += 1
            sign = -1
        coeff = first_coeff
        while True:
            if coeff is None and not self.at("ket"):
                coeff = self.factor_product()
                if self.at("punct", "*"):
                    self.i += 1
            label = self.take("ket").text[1:].rstrip(">⟩")
            if not label:
                self.error("empty ket label")
            c = sympy.Integer(1) if coeff is None else coeff
            pairs.append((label, sign * c))
            if self.at("punct", "+") or self.at("punct", "-"):
                sign = 1 if self.tok.text == "+" else -1
                self.i += 1
                coeff = None
                continue
            break
        return Ket.build(pairs)

    def arith(self):
        neg = False
        if self.at("punct", "-"):
            self.i += 1
            neg = True
        v = self.factor_product()
        if neg:
            v = -v
        while (self.at("punct", "+") or self.at("punct", "-")) and self.peek().kind != "ket":
            op = self.take("punct").text
            rhs = self.factor_product()
            v = v + rhs if op == "+" else v - rhs
        return v

    def factor_product(self):
        v = self.power()
        while (self.at("punct", "*") or self.at("punct", "/")) and self.peek().kind != "ket":
            op = self.take("punct").text
            rhs = self.power()
            v = v * rhs if op == "*" else v / rhs
        return v

    def power(self):
        base = self.atom_value()
        if self.at("punct", "^") and self.peek().text != "dag":
            self.i += 1
            return base ** self.atom_value()
        return base

    def atom_value(self):
        t = self.tok
        if t.kind == "number":
            self.i += 1
            return sympy.Rational(t.text)
        if t.kind == "punct" and t.text == "(":
            self.i += 1
            v = self.arith()
            self.take("punct", ")")
            return v
        if t.kind == "punct" and t.text == "-":
            self.i += 1
            return -self.atom_value()
        if t.kind == "name":
            self.i += 1
            if t.text in _FUNCS:
                self.take("punct", "(")
                arg = self.arith()
                self.take("punct", ")")
                return _FUNCS[t.text](arg)
            if t.text in ("I", "i") and t.text not in self.params:
                return sympy.I
            return sympy.Symbol(t.text)
        self.error(f"expected a number, found {t.text or t.kind!r}")


def parse_program(src: str) -> Program:
    return Parser(src).program()


def parse_goal(src: str, params=()) -> list:
    return Parser(src, set(params)).goal()
