"""Text syntax for formulas.

Grammar (lowest precedence first):

    formula  := or ( '->' formula )?
    or       := and ( '|' and )*
    and      := until ( '&' until )*
    until    := unary ( 'U' interval? unary )?
    unary    := '!' unary
              | ('G' | 'F') interval unary
              | '(' formula ')'
              | comparison
    comparison := expr (cmpop expr)+        # chains expand to conjunctions
    cmpop    := '<' | '<=' | '>' | '>='
    expr     := term (('+' | '-') term)*
    term     := number '*'? ident | number | ident | '-' term
    interval := '[' number ',' (number | 'inf') (']' | ')')

Intervals are in seconds.  'G', 'F', 'U' and 'inf' are reserved words;
any other identifier names a run variable.
"""

import re

from .ast import (
    AND, EVENTUALLY, IMPLIES, NOT, OR, UNTIL,
    Interval, LinearPredicate, Node, always, eventually,
)


class ParseError(ValueError):
    def __init__(self, message, line, col):
        super().__init__("%s (line %d, column %d)" % (message, line, col))
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(r"""
    (?P<num>\d+\.\d*([eE][-+]?\d+)?|\.\d+([eE][-+]?\d+)?|\d+([eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|->|&&|\|\||[-+*<>!&|(),\[\]])
  | (?P<ws>\s+)
""", re.VERBOSE)

_ALIASES = {"&&": "&", "||": "|"}
_RESERVED = {"G", "F", "U", "inf"}


def _tokenize(text):
    toks = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError("unexpected character %r" % text[pos], line, col)
        lexeme = m.group(0)
        if m.lastgroup != "ws":
            kind = m.lastgroup
            val = _ALIASES.get(lexeme, lexeme)
            toks.append((kind, val, line, col))
        nl = lexeme.count("\n")
        if nl:
            line += nl
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    toks.append(("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, tok[2], tok[3])

    def expect(self, val):
        kind, v, line, col = self.peek()
        if v != val:
            self.error("expected %r, found %r" % (val, v or "end of input"))
        return self.next()

    # -- formula levels -------------------------------------------------------

    def formula(self):
        left = self.or_level()
        if self.peek()[1] == "->":
            self.next()
            right = self.formula()
            return Node(IMPLIES, (left, right))
        return left

    def or_level(self):
        parts = [self.and_level()]
        while self.peek()[1] == "|":
            self.next()
            parts.append(self.and_level())
        return parts[0] if len(parts) == 1 else Node(OR, tuple(parts))

    def and_level(self):
        parts = [self.until_level()]
        while self.peek()[1] == "&":
            self.next()
            parts.append(self.until_level())
        return parts[0] if len(parts) == 1 else Node(AND, tuple(parts))

    def until_level(self):
        left = self.unary()
        if self.peek()[1] == "U":
            self.next()
            iv = self.interval() if self.peek()[1] == "[" else None
            right = self.unary()
            return Node(UNTIL, (left, right), interval=iv)
        return left

    def unary(self):
        kind, v, line, col = self.peek()
        if v == "!":
            self.next()
            return Node(NOT, (self.unary(),))
        if v in ("G", "F"):
            self.next()
            iv = self.interval()
            child = self.unary()
            ctor = always if v == "G" else eventually
            return ctor(iv.lower, iv.upper, child)
        if v == "(":
            # Could be a parenthesized formula or a parenthesized arithmetic
            # expression starting a comparison; try the formula first and fall
            # back on comparison parsing.
            save = self.i
            self.next()
            try:
                f = self.formula()
                self.expect(")")
            except ParseError:
                self.i = save
                return self.comparison()
            if self.peek()[1] in ("<", "<=", ">", ">="):
                self.i = save
                return self.comparison()
            return f
        return self.comparison()

    # -- predicates -----------------------------------------------------------

    def interval(self):
        self.expect("[")
        lo = self.number()
        self.expect(",")
        kind, v, line, col = self.peek()
        if v == "inf":
            self.next()
            hi = None
        else:
            hi = self.number()
        if self.peek()[1] in (")", "]"):
            self.next()
        else:
            self.error("expected ']' or ')' closing interval")
        try:
            return Interval(lo, hi)
        except AssertionError:
            raise ParseError("empty or negative interval", line, col)

    def number(self):
        sign = 1.0
        if self.peek()[1] == "-":
            self.next()
            sign = -1.0
        kind, v, line, col = self.peek()
        if kind != "num":
            self.error("expected a number")
        self.next()
        return sign * float(v)

    def comparison(self):
        exprs = [self.expr()]
        ops = []
        while self.peek()[1] in ("<", "<=", ">", ">="):
            ops.append(self.next()[1])
            exprs.append(self.expr())
        if not ops:
            self.error("expected a comparison operator")
        if len({op[0] for op in ops}) > 1:
            self.error("chained comparison mixes directions")
        preds = []
        for (lc, lk), op, (rc, rk) in zip(exprs, ops, exprs[1:]):
            preds.append(self.make_pred(lc, lk, op, rc, rk))
        return preds[0] if len(preds) == 1 else Node(AND, tuple(preds))

    def make_pred(self, lcoeffs, lconst, op, rcoeffs, rconst):
        coeffs = dict(lcoeffs)
        for v, c in rcoeffs.items():
            coeffs[v] = coeffs.get(v, 0.0) - c
        coeffs = {v: c for v, c in coeffs.items() if c != 0.0}
        rhs = rconst - lconst
        tok = self.toks[self.i - 1]
        if not coeffs:
            self.error("comparison contains no variables", tok)
        try:
            p = LinearPredicate(coeffs, op, rhs)
        except AssertionError as e:
            self.error(str(e), tok)
        return Node("pred", pred=p)

    def expr(self):
        coeffs, const = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            c2, k2 = self.term()
            s = 1.0 if op == "+" else -1.0
            for v, c in c2.items():
                coeffs[v] = coeffs.get(v, 0.0) + s * c
            const += s * k2
        return coeffs, const

    def term(self):
        kind, v, line, col = self.peek()
        if v == "-":
            self.next()
            coeffs, const = self.term()
            return {k: -c for k, c in coeffs.items()}, -const
        if v == "(":
            self.next()
            coeffs, const = self.expr()
            self.expect(")")
            return coeffs, const
        if kind == "num":
            self.next()
            num = float(v)
            if self.peek()[1] == "*":
                self.next()
            k2, v2, _, _ = self.peek()
            if k2 == "ident" and v2 not in _RESERVED:
                self.next()
                return {v2: num}, 0.0
            return {}, num
        if kind == "ident":
            if v in _RESERVED:
                self.error("reserved word %r cannot name a variable" % v)
            self.next()
            return {v: 1.0}, 0.0
        self.error("expected a variable or number, found %r" % (v or "end of input"))


def parse(text):
    """Parse a formula from text; raises ParseError with line/column info."""
    p = _Parser(text)
    f = p.formula()
    kind, v, line, col = p.peek()
    if kind != "eof":
        raise ParseError("unexpected trailing input %r" % v, line, col)
    return f
