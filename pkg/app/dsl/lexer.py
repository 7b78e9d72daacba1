"""
app/dsl/lexer.py - Tokenizer shared by the model file parser and the formula parser.
"""
import re
from dataclasses import dataclass
from typing import List

from app.engine.errors import DslSyntaxError, SourceSpan

KEYWORDS = frozenset({"model", "exo", "endo", "eq", "table", "context", "prob", "K", "all", "uniform",
                      "default", "ite", "min", "max", "where"})

_TOKEN_RE = re.compile(r"""
    (?P<COMMENT>\#[^\n]*)
  | (?P<NEWLINE>\r?\n)
  | (?P<WS>[ \t\r]+)
  | (?P<DECIMAL>\d+\.\d*|\.\d+)
  | (?P<INT>\d+)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<OP>:=|->|<-|==|!=|<=|>=|&&|\|\||[{}()\[\],;:=<>!+\-/~&|])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, DECIMAL, OP, KEYWORD, EOF
    text: str
    span: SourceSpan

    def is_op(self, text: str) -> bool:
        return self.kind == "OP" and self.text == text

    def is_keyword(self, text: str) -> bool:
        return self.kind == "KEYWORD" and self.text == text

    def describe(self) -> str:
        return "end of input" if self.kind == "EOF" else repr(self.text)


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if not m:
            span = SourceSpan(line, column, pos, pos + 1)
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        value = m.group()
        if kind == "NEWLINE":
            line += 1
            line_start = m.end()
        elif kind not in ("WS", "COMMENT"):
            if kind == "IDENT" and value in KEYWORDS:
                kind = "KEYWORD"
            tokens.append(Token(kind, value, SourceSpan(line, column, pos, m.end())))
        pos = m.end()
    tokens.append(Token("EOF", "", SourceSpan(line, pos - line_start + 1, pos, pos)))
    return tokens
