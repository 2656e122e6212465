"""Lexer, AST and recursive-descent parser for NP-BLOG model sources.

An NP-BLOG source file is a sequence of semicolon-terminated statements:

    type Author; type Pub;
    guaranteed Citation;
    random Pub RefPub(Citation);            // optional explicit signature
    #Pub ~ NumPubsDist();                   // number statement
    Name(a) ~ NameDist{};                   // dependency statement
    CitedTitle(c) ~ TitleStrDist{Title(RefPub(c))};
    State(a, t) if t = 0 then ~ InitState{} else ~ StateTransDist(a){State(a, t - 1)};
    Blip(r) ~ if FalseAlarm(r) = 1 then null;

Comments run from ``//`` to end of line.  Arguments in parentheses index
function symbols; arguments in curly braces are inputs to the selected
probability density.  The two empty-argument spellings ``D()`` and ``D{}``
parse to the same draw.

``parse_program(tokenize(src))`` builds a :class:`Program`;
:func:`pretty_print` renders it back to canonical source such that
``parse(print(parse(src)))`` is structurally equal to ``parse(src)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "LexError",
    "ParseError",
    "Token",
    "Var",
    "IntLit",
    "FnApp",
    "Minus",
    "TypedSet",
    "Equals",
    "Draw",
    "NullBody",
    "Clause",
    "TypeDecl",
    "GuaranteedDecl",
    "FunctionDecl",
    "NumberStatement",
    "DependencyStatement",
    "Program",
    "tokenize",
    "parse_program",
    "parse_source",
    "parse_term_text",
    "pretty_print",
]

KEYWORDS = frozenset({"type", "guaranteed", "if", "then", "else", "null"})

# Contextual statement-head words; identifiers everywhere else.
_DECL_WORDS = frozenset({"random", "nonrandom"})

_SYMBOL_CHARS = frozenset("#=-")


class LexError(Exception):
    """Raised on a character outside the grammar's alphabet."""

    def __init__(self, message: str, line: int, column: int, char: str = ""):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.char = char


class ParseError(Exception):
    """First-error parse failure with position and expected-token set."""

    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # keyword | ident | int | symbol | tilde | semicolon | lparen | rparen | lbrace | rbrace | comma
    lexeme: str
    line: int
    column: int


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class IntLit:
    value: int


@dataclass(frozen=True, slots=True)
class FnApp:
    name: str
    args: tuple = ()


@dataclass(frozen=True, slots=True)
class Minus:
    left: object
    right: object


@dataclass(frozen=True, slots=True)
class TypedSet:
    """A typed set comprehension argument, e.g. the ``Pub p`` in ``Uniform(Pub p)``."""

    type_name: str
    var_name: str


@dataclass(frozen=True, slots=True)
class Equals:
    left: object
    right: object


@dataclass(frozen=True, slots=True)
class Draw:
    """Right-hand side of a dependency statement: ``g(paren_args){brace_args}``."""

    dist_name: str
    paren_args: tuple = ()
    brace_args: tuple = ()


@dataclass(frozen=True, slots=True)
class NullBody:
    pass


@dataclass(frozen=True, slots=True)
class Clause:
    condition: object  # Equals | FnApp | None for the default/else clause
    body: object  # Draw | NullBody


@dataclass(frozen=True, slots=True)
class TypeDecl:
    name: str


@dataclass(frozen=True, slots=True)
class GuaranteedDecl:
    type_name: str


@dataclass(frozen=True, slots=True)
class FunctionDecl:
    """Explicit signature: ``random ReturnType f(ArgType, ...);`` or ``nonrandom ...``."""

    random: bool
    return_type: str
    name: str
    arg_types: tuple = ()


@dataclass(frozen=True, slots=True)
class NumberStatement:
    type_name: str
    dist_name: str
    paren_args: tuple = ()


@dataclass(frozen=True, slots=True)
class DependencyStatement:
    fn_name: str
    variables: tuple = ()
    clauses: tuple = ()


@dataclass(frozen=True, slots=True)
class Program:
    statements: tuple = ()
    source_name: str = "<npblog>"

    def __eq__(self, other):
        # Structural equality ignores the source name.
        if not isinstance(other, Program):
            return NotImplemented
        return self.statements == other.statements


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------


def tokenize(source: str) -> list[Token]:
    """Split NP-BLOG source text into tokens.

    Raises :class:`LexError` on any character outside the grammar's
    alphabet.  ``//`` comments and whitespace are dropped.
    """
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
                col += 1
            continue
        start_col = col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            kind = "keyword" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("int", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        single = {
            "~": "tilde",
            ";": "semicolon",
            "(": "lparen",
            ")": "rparen",
            "{": "lbrace",
            "}": "rbrace",
            ",": "comma",
        }
        if ch in single:
            tokens.append(Token(single[ch], ch, line, start_col))
        elif ch in _SYMBOL_CHARS:
            tokens.append(Token("symbol", ch, line, start_col))
        else:
            raise LexError(f"unexpected character {ch!r}", line, col, ch)
        i += 1
        col += 1
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token], source_name: str):
        self.tokens = tokens
        self.pos = 0
        self.source_name = source_name

    def _peek(self, offset: int = 0) -> Token | None:
        idx = self.pos + offset
        return self.tokens[idx] if idx < len(self.tokens) else None

    def _at(self, kind: str, lexeme: str | None = None, offset: int = 0) -> bool:
        tok = self._peek(offset)
        if tok is None or tok.kind != kind:
            return False
        return lexeme is None or tok.lexeme == lexeme

    def _advance(self) -> Token:
        tok = self._peek()
        if tok is None:
            self._fail("unexpected end of input", frozenset())
        self.pos += 1
        return tok

    def _expect(self, kind: str, lexeme: str | None = None) -> Token:
        tok = self._peek()
        want = lexeme if lexeme is not None else kind
        if tok is None or tok.kind != kind or (lexeme is not None and tok.lexeme != lexeme):
            self._fail(f"expected {want!r}", frozenset({want}))
        self.pos += 1
        return tok

    def _fail(self, message: str, expected: frozenset[str]):
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token("semicolon", ";", 1, 1)
            raise ParseError(message + " (at end of input)", last.line, last.column, expected)
        raise ParseError(f"{message}, found {tok.lexeme!r}", tok.line, tok.column, expected)

    # -- statements ---------------------------------------------------------

    def program(self) -> Program:
        statements = []
        while self._peek() is not None:
            statements.append(self.statement())
        return Program(tuple(statements), self.source_name)

    def statement(self):
        if self._at("keyword", "type"):
            self._advance()
            name = self._expect("ident").lexeme
            self._expect("semicolon")
            return TypeDecl(name)
        if self._at("keyword", "guaranteed"):
            self._advance()
            name = self._expect("ident").lexeme
            self._expect("semicolon")
            return GuaranteedDecl(name)
        if self._at("symbol", "#"):
            return self._number_statement()
        if (
            self._peek() is not None
            and self._peek().kind == "ident"
            and self._peek().lexeme in _DECL_WORDS
            and self._at("ident", offset=1)
            and self._at("ident", offset=2)
        ):
            return self._function_decl()
        if self._at("ident"):
            return self._dependency_statement()
        self._fail("expected a statement", frozenset({"type", "guaranteed", "#", "identifier"}))

    def _number_statement(self) -> NumberStatement:
        self._expect("symbol", "#")
        type_name = self._expect("ident").lexeme
        self._expect("tilde")
        dist_name = self._expect("ident").lexeme
        paren_args: tuple = ()
        if self._at("lparen"):
            paren_args = self._arg_list("lparen", "rparen", allow_typed_set=True)
        self._expect("semicolon")
        return NumberStatement(type_name, dist_name, paren_args)

    def _function_decl(self) -> FunctionDecl:
        word = self._expect("ident").lexeme
        return_type = self._expect("ident").lexeme
        name = self._expect("ident").lexeme
        arg_types: list[str] = []
        if self._at("lparen"):
            self._advance()
            if not self._at("rparen"):
                arg_types.append(self._expect("ident").lexeme)
                while self._at("comma"):
                    self._advance()
                    arg_types.append(self._expect("ident").lexeme)
            self._expect("rparen")
        self._expect("semicolon")
        return FunctionDecl(word == "random", return_type, name, tuple(arg_types))

    def _dependency_statement(self) -> DependencyStatement:
        fn_name = self._expect("ident").lexeme
        variables: list[str] = []
        if self._at("lparen"):
            self._advance()
            if not self._at("rparen"):
                variables.append(self._expect("ident").lexeme)
                while self._at("comma"):
                    self._advance()
                    variables.append(self._expect("ident").lexeme)
            self._expect("rparen")
        if self._at("tilde"):
            self._advance()
            if self._at("keyword", "if"):
                clauses = self._if_chain()
            else:
                clauses = [Clause(None, self._draw())]
        elif self._at("keyword", "if"):
            clauses = self._if_chain()
        else:
            self._fail("expected '~' or 'if'", frozenset({"~", "if"}))
        self._expect("semicolon")
        stmt = DependencyStatement(fn_name, tuple(variables), tuple(clauses))
        defaults = [c for c in stmt.clauses if c.condition is None]
        if len(defaults) > 1:
            tok = self.tokens[self.pos - 1]
            raise ParseError(
                f"dependency statement for {fn_name!r} has more than one default clause",
                tok.line,
                tok.column,
            )
        return stmt

    def _if_chain(self) -> list[Clause]:
        self._expect("keyword", "if")
        condition = self._formula()
        self._expect("keyword", "then")
        clauses = [Clause(condition, self._clause_body())]
        if self._at("keyword", "else"):
            self._advance()
            if self._at("keyword", "if"):
                clauses.extend(self._if_chain())
            else:
                clauses.append(Clause(None, self._clause_body()))
        return clauses

    def _clause_body(self):
        if self._at("keyword", "null"):
            self._advance()
            return NullBody()
        self._expect("tilde")
        return self._draw()

    def _draw(self) -> Draw:
        dist_name = self._expect("ident").lexeme
        paren_args: tuple = ()
        brace_args: tuple = ()
        if self._at("lparen"):
            paren_args = self._arg_list("lparen", "rparen", allow_typed_set=True)
        if self._at("lbrace"):
            brace_args = self._arg_list("lbrace", "rbrace", allow_typed_set=False)
        return Draw(dist_name, paren_args, brace_args)

    def _arg_list(self, open_kind: str, close_kind: str, allow_typed_set: bool) -> tuple:
        self._expect(open_kind)
        args = []
        if not self._at(close_kind):
            args.append(self._term(allow_typed_set=allow_typed_set))
            while self._at("comma"):
                self._advance()
                args.append(self._term(allow_typed_set=allow_typed_set))
        self._expect(close_kind)
        return tuple(args)

    # -- terms and formulas -------------------------------------------------

    def _formula(self):
        left = self._term(allow_typed_set=False)
        if self._at("symbol", "="):
            self._advance()
            right = self._term(allow_typed_set=False)
            return Equals(left, right)
        if not isinstance(left, FnApp):
            tok = self.tokens[self.pos - 1]
            raise ParseError(
                "condition must be an equality or a predicate application",
                tok.line,
                tok.column,
                frozenset({"="}),
            )
        return left

    def _term(self, allow_typed_set: bool):
        left = self._primary(allow_typed_set=allow_typed_set)
        while self._at("symbol", "-"):
            self._advance()
            right = self._primary(allow_typed_set=False)
            left = Minus(left, right)
        return left

    def _primary(self, allow_typed_set: bool):
        if self._at("int"):
            return IntLit(int(self._advance().lexeme))
        if self._at("ident"):
            name = self._advance().lexeme
            if allow_typed_set and self._at("ident"):
                return TypedSet(name, self._advance().lexeme)
            if self._at("lparen"):
                args = self._arg_list("lparen", "rparen", allow_typed_set=False)
                return FnApp(name, args)
            return Var(name)
        self._fail("expected a term", frozenset({"identifier", "integer"}))


def parse_program(tokens: list[Token], source_name: str = "<npblog>") -> Program:
    """Parse a token list (from :func:`tokenize`) into a :class:`Program`."""
    return _Parser(tokens, source_name).program()


def parse_source(source: str, source_name: str = "<npblog>") -> Program:
    """Convenience wrapper: tokenize and parse in one call."""
    return parse_program(tokenize(source), source_name)


def parse_term_text(text: str):
    """Parse a bare term such as ``Title(RefPub(c1))`` (used by query files)."""
    parser = _Parser(tokenize(text), "<term>")
    term = parser._term(allow_typed_set=False)
    if parser._peek() is not None:
        parser._fail("trailing input after term", frozenset())
    return term


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------


def _format_term(term) -> str:
    if isinstance(term, Var):
        return term.name
    if isinstance(term, IntLit):
        return str(term.value)
    if isinstance(term, FnApp):
        if not term.args:
            return term.name
        return f"{term.name}({', '.join(_format_term(a) for a in term.args)})"
    if isinstance(term, Minus):
        return f"{_format_term(term.left)} - {_format_term(term.right)}"
    if isinstance(term, TypedSet):
        return f"{term.type_name} {term.var_name}"
    raise TypeError(f"not a term: {term!r}")


def _format_formula(formula) -> str:
    if isinstance(formula, Equals):
        return f"{_format_term(formula.left)} = {_format_term(formula.right)}"
    return _format_term(formula)


def _format_draw(draw: Draw) -> str:
    out = draw.dist_name
    if draw.paren_args or not draw.brace_args:
        out += f"({', '.join(_format_term(a) for a in draw.paren_args)})"
    if draw.brace_args:
        out += f"{{{', '.join(_format_term(a) for a in draw.brace_args)}}}"
    return out


def _format_body(body) -> str:
    if isinstance(body, NullBody):
        return "null"
    return f"~ {_format_draw(body)}"


def _format_statement(stmt) -> str:
    if isinstance(stmt, TypeDecl):
        return f"type {stmt.name};"
    if isinstance(stmt, GuaranteedDecl):
        return f"guaranteed {stmt.type_name};"
    if isinstance(stmt, FunctionDecl):
        word = "random" if stmt.random else "nonrandom"
        return f"{word} {stmt.return_type} {stmt.name}({', '.join(stmt.arg_types)});"
    if isinstance(stmt, NumberStatement):
        args = ", ".join(_format_term(a) for a in stmt.paren_args)
        return f"#{stmt.type_name} ~ {stmt.dist_name}({args});"
    if isinstance(stmt, DependencyStatement):
        head = stmt.fn_name
        if stmt.variables:
            head += f"({', '.join(stmt.variables)})"
        clauses = stmt.clauses
        if len(clauses) == 1 and clauses[0].condition is None:
            return f"{head} {_format_body(clauses[0].body)};"
        parts = []
        for i, clause in enumerate(clauses):
            if clause.condition is not None:
                prefix = "if" if i == 0 else "else if"
                parts.append(f"{prefix} {_format_formula(clause.condition)} then {_format_body(clause.body)}")
            else:
                parts.append(f"else {_format_body(clause.body)}")
        return f"{head} {' '.join(parts)};"
    raise TypeError(f"not a statement: {stmt!r}")


def pretty_print(program: Program) -> str:
    """Render a program to canonical source, one statement per line."""
    if not program.statements:
        return ""
    return "\n".join(_format_statement(s) for s in program.statements) + "\n"
