"""Text syntax for formulas and scenario files.

Formula grammar (see ``docs/grammar.md``)::

    formula   := or
    or        := and ( '|' and )*
    and       := until ( '&' until )*
    until     := unary ( 'U' interval unary )?
    unary     := '!' unary | ('G' | 'F') interval unary | primary
    primary   := 'true' | 'false' | '(' formula ')' | 'inbox' '(' NAME ')'
               | NAME | linexpr ( '>=' | '<=' ) linexpr
    interval  := ('[' | '(') INT ',' INT (']' | ')') | '{' INT '}'
    linexpr   := term ( ('+' | '-') term )*
    term      := ['-'] NUMBER [ '*' XVAR ] | ['-'] XVAR

``XVAR`` is ``x1``, ``x2``, ... (1-based state coordinates).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .milp.model import LinearSystem, SolverParams
from .separation import FragmentShapeError, FragmentSpec, KappaError, check_kappas, fragment_from_formula
from .stl import (
    FALSE,
    TRUE,
    Always,
    And,
    EmptyIntervalError,
    Eventually,
    Formula,
    Interval,
    Not,
    Or,
    Pred,
    Top,
    Until,
    box_region,
    canonicalize,
    formula_length,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col


class LexError(ParseError):
    pass


class STLSyntaxError(ParseError):
    pass


class EmptyIntervalSyntaxError(STLSyntaxError, EmptyIntervalError):
    pass


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<xvar>x\d+)(?![A-Za-z0-9_])
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>>=|<=|[&|!()\[\]{},*+\-])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"true", "false", "G", "F", "U", "inbox"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line0: int = 1) -> list:
    toks = []
    pos, line, col = 0, line0, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise LexError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "name" and s in _KEYWORDS:
                kind = s
            toks.append(_Tok(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


@dataclass(frozen=True)
class _Lin(Formula):
    # placeholder for an affine predicate until the state dimension is known
    coefs: tuple
    const: float


class _Parser:
    def __init__(self, text, regions, atoms, line0=1):
        self.toks = _tokenize(text, line0)
        self.i = 0
        self.regions = regions or {}
        self.atoms = atoms or {}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None, cls=STLSyntaxError):
        tok = tok or self.tok
        raise cls(msg, tok.line, tok.col)

    def take(self, *kinds) -> _Tok:
        tok = self.tok
        if kinds and tok.kind not in kinds and tok.text not in kinds:
            want = " or ".join(repr(k) for k in kinds)
            self.error(f"expected {want}, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok

    def at(self, *kinds) -> bool:
        return self.tok.kind in kinds or (self.tok.kind == "op" and self.tok.text in kinds)

    def parse(self) -> Formula:
        phi = self.or_()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        return phi

    def or_(self):
        items = [self.and_()]
        while self.at("|"):
            self.take()
            items.append(self.and_())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def and_(self):
        items = [self.until()]
        while self.at("&"):
            self.take()
            items.append(self.until())
        return items[0] if len(items) == 1 else And(tuple(items))

    def until(self):
        left = self.unary()
        if self.at("U"):
            self.take()
            iv = self.interval()
            return Until(left, iv, self.unary())
        return left

    def unary(self):
        if self.at("!"):
            self.take()
            return Not(self.unary())
        if self.at("G", "F"):
            op = self.take()
            iv = self.interval()
            arg = self.unary()
            return Always(iv, arg) if op.kind == "G" else Eventually(iv, arg)
        return self.primary()

    def interval(self) -> Interval:
        start = self.tok
        if self.at("{"):
            self.take()
            k = self.integer()
            self.take("}")
            lo, hi, lo_open, hi_open = k, k, False, False
        else:
            opener = self.take("[", "(")
            lo = self.integer()
            self.take(",")
            hi = self.integer()
            closer = self.take("]", ")")
            lo_open, hi_open = opener.text == "(", closer.text == ")"
        try:
            return Interval(lo, hi, lo_open, hi_open).canonical()
        except EmptyIntervalError:
            shown = f"{'(' if lo_open else '['}{lo},{hi}{')' if hi_open else ']'}"
            self.error(f"empty interval {shown}", start, EmptyIntervalSyntaxError)

    def integer(self) -> int:
        tok = self.take("num")
        try:
            return int(tok.text)
        except ValueError:
            self.error(f"interval bound must be an integer, got {tok.text}", tok)

    def primary(self):
        tok = self.tok
        if tok.kind == "true":
            self.take()
            return TRUE
        if tok.kind == "false":
            self.take()
            return FALSE
        if self.at("("):
            self.take()
            phi = self.or_()
            self.take(")")
            return phi
        if tok.kind == "inbox":
            self.take()
            self.take("(")
            name = self.take("name")
            self.take(")")
            if name.text not in self.regions:
                self.error(f"unknown region {name.text!r}", name)
            return self.regions[name.text]
        if tok.kind == "name":
            self.take()
            if tok.text not in self.atoms:
                self.error(f"unknown atom {tok.text!r}", tok)
            return self.atoms[tok.text]
        if tok.kind in ("num", "xvar") or self.at("-", "+"):
            return self.linear_predicate()
        self.error(f"expected a formula, found {tok.text or 'end of input'!r}")

    def linexpr(self):
        coefs, const = {}, 0.0
        sign = 1.0
        if self.at("-", "+"):
            sign = -1.0 if self.take().text == "-" else 1.0
        while True:
            if self.tok.kind == "num":
                value = float(self.take().text)
                if self.at("*"):
                    self.take()
                    var = self.take("xvar")
                    idx = int(var.text[1:])
                    coefs[idx] = coefs.get(idx, 0.0) + sign * value
                else:
                    const += sign * value
            elif self.tok.kind == "xvar":
                idx = int(self.take().text[1:])
                coefs[idx] = coefs.get(idx, 0.0) + sign
            else:
                self.error(f"expected a number or state variable, found {self.tok.text!r}")
            if self.at("+", "-"):
                sign = -1.0 if self.take().text == "-" else 1.0
            else:
                return coefs, const

    def linear_predicate(self):
        start = self.tok
        lhs, c1 = self.linexpr()
        op = self.take(">=", "<=")
        rhs, c2 = self.linexpr()
        sgn = 1.0 if op.text == ">=" else -1.0
        coefs = {i: sgn * (lhs.get(i, 0.0) - rhs.get(i, 0.0)) for i in set(lhs) | set(rhs)}
        if any(i < 1 for i in coefs):
            self.error("state variables are numbered from x1", start)
        return _Lin(tuple(sorted(coefs.items())), sgn * (c1 - c2))


def _resolve(phi: Formula, dim: int) -> Formula:
    if isinstance(phi, _Lin):
        coeffs = [0.0] * dim
        for i, a in phi.coefs:
            coeffs[i - 1] = a
        return Pred(tuple(coeffs), phi.const)
    if isinstance(phi, Not):
        return Not(_resolve(phi.arg, dim))
    if isinstance(phi, And):
        return And(tuple(_resolve(a, dim) for a in phi.args), label=phi.label)
    if isinstance(phi, Or):
        return Or(tuple(_resolve(a, dim) for a in phi.args))
    if isinstance(phi, Until):
        return Until(_resolve(phi.left, dim), phi.interval, _resolve(phi.right, dim))
    if isinstance(phi, (Always, Eventually)):
        return type(phi)(phi.interval, _resolve(phi.arg, dim))
    return phi


def _max_var(phi) -> int:
    if isinstance(phi, _Lin):
        return max((i for i, _ in phi.coefs), default=0)
    if isinstance(phi, (Not, Always, Eventually)):
        return _max_var(phi.arg)
    if isinstance(phi, (And, Or)):
        return max(_max_var(a) for a in phi.args)
    if isinstance(phi, Until):
        return max(_max_var(phi.left), _max_var(phi.right))
    if isinstance(phi, Pred):
        return phi.dim
    return 0


def parse_formula(
    text: str,
    regions: Mapping[str, Formula] | None = None,
    atoms: Mapping[str, Formula] | None = None,
    dim: int | None = None,
    line0: int = 1,
) -> Formula:
    """Parse STL text into a canonical :class:`Formula`.

    ``regions`` resolves ``inbox(NAME)``, ``atoms`` resolves bare names, and
    ``dim`` fixes the state dimension of affine predicates (inferred from the
    largest ``x<i>`` otherwise).
    """
    raw = _Parser(text, regions, atoms, line0).parse()
    need = _max_var(raw)
    if dim is not None and need > dim:
        raise STLSyntaxError(f"predicate uses x{need} but the state has dimension {dim}", line0, 1)
    return canonicalize(_resolve(raw, dim or max(need, 1)))


def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _format_pred(p: Pred) -> str:
    if p.name:
        return p.name
    terms = []
    for i, a in enumerate(p.coeffs, 1):
        if a == 0:
            continue
        mag = abs(a)
        body = f"x{i}" if mag == 1 else f"{format_number(mag)}*x{i}"
        if not terms:
            terms.append(("-" if a < 0 else "") + body)
        else:
            terms.append(("- " if a < 0 else "+ ") + body)
    if not terms:
        terms = [f"0*x{p.dim}"]
    return f"{' '.join(terms)} >= {format_number(-p.offset + 0.0)}"


def _needs_parens(phi: Formula) -> bool:
    return isinstance(phi, (Or, Until)) or (isinstance(phi, And) and phi.label is None)


def _operand(phi: Formula) -> str:
    s = format_formula(phi)
    return f"({s})" if _needs_parens(phi) else s


def format_formula(phi: Formula) -> str:
    """Deterministic text that :func:`parse_formula` maps back to ``phi``."""
    if isinstance(phi, Top):
        return "true"
    if isinstance(phi, Pred):
        return _format_pred(phi)
    if isinstance(phi, Not):
        return "!" + _operand(phi.arg)
    if isinstance(phi, And):
        if phi.label:
            return phi.label
        return " & ".join(_operand(a) for a in phi.args)
    if isinstance(phi, Or):
        return " | ".join(_operand(a) for a in phi.args)
    if isinstance(phi, Until):
        return f"{_operand(phi.left)} U{phi.interval} {_operand(phi.right)}"
    if isinstance(phi, Always):
        return f"G{phi.interval} {_operand(phi.arg)}"
    if isinstance(phi, Eventually):
        return f"F{phi.interval} {_operand(phi.arg)}"
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# scenario files


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"{message} (line {line})")
        self.line = line


class DimensionError(ScenarioError):
    pass


class UnknownRegionError(ScenarioError):
    pass


class HorizonMismatchError(ScenarioError):
    pass


@dataclass
class ScenarioFile:
    system: LinearSystem
    initial_state: np.ndarray
    horizon: int
    regions: dict
    formula: Formula
    fragment: FragmentSpec
    kappas: tuple
    taus: object = None
    solver_params: SolverParams = field(default_factory=SolverParams)
    region_boxes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.initial_state = np.asarray(self.initial_state, dtype=float)
        if self.initial_state.shape != (self.system.n,):
            raise DimensionError(
                f"initial state has {self.initial_state.size} entries, system has {self.system.n} states"
            )
        if formula_length(self.formula) != self.horizon:
            raise HorizonMismatchError(
                f"horizon {self.horizon} differs from the formula length {formula_length(self.formula)}"
            )
        check_kappas(self.kappas, self.horizon)


_SECTIONS = ("SYSTEM", "REGIONS", "SPEC", "SPLIT", "SOLVER")


def _numbers(text: str, line: int) -> list:
    parts = [p for p in re.split(r"[\s,]+", text.strip()) if p]
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ScenarioError(f"expected numbers, got {text.strip()!r}", line) from exc


def _matrix(text: str, line: int) -> np.ndarray:
    rows = [_numbers(r, line) for r in text.split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise DimensionError(f"matrix rows have unequal lengths: {text.strip()!r}", line)
    return np.array(rows)


_BOX = re.compile(r"\[\s*([^,\]]+)\s*,\s*([^\]]+)\s*\]")


def _parse_box(text: str, line: int) -> list:
    parts = [p.strip() for p in re.split(r"\bx\b|×", text) if p.strip()]
    bounds = []
    for part in parts:
        m = _BOX.fullmatch(part)
        if m is None:
            raise ScenarioError(f"region must look like [lo,hi] x [lo,hi], got {text.strip()!r}", line)
        lo, hi = float(m.group(1)), float(m.group(2))
        if lo > hi:
            raise ScenarioError(f"empty region side [{lo},{hi}]", line)
        bounds.append((lo, hi))
    return bounds


def _read_sections(text: str) -> dict:
    sections: dict = {}
    current = None
    last_key = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = re.fullmatch(r"\s*\[\s*([A-Za-z]+)\s*\]\s*", line)
        if m:
            current = m.group(1).upper()
            if current not in _SECTIONS:
                raise ScenarioError(f"unknown section [{m.group(1)}]", lineno)
            if current in sections:
                raise ScenarioError(f"duplicate section [{current}]", lineno)
            sections[current] = {}
            last_key = None
            continue
        if current is None:
            raise ScenarioError("content before the first section header", lineno)
        if line[0] in " \t" and last_key is not None:
            val, ln = sections[current][last_key]
            sections[current][last_key] = (val + " " + line.strip(), ln)
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {line.strip()!r}", lineno)
        key, val = line.split("=", 1)
        key = key.strip()
        if key in sections[current]:
            raise ScenarioError(f"duplicate key {key!r} in [{current}]", lineno)
        sections[current][key] = (val.strip(), lineno)
        last_key = key
    return sections


def _get(sections, sec, key, default=None, required=True):
    entry = sections.get(sec, {}).get(key)
    if entry is None:
        if required and default is None:
            raise ScenarioError(f"missing key {key!r} in section [{sec}]")
        return default, None
    return entry


def parse_taus(text: str | None):
    """``None``, one integer for every term, or a comma list in carry order."""
    if text is None or not text.strip():
        return None
    vals = [int(v) for v in re.split(r"[\s,]+", text.strip()) if v]
    return vals[0] if len(vals) == 1 else tuple(vals)


def parse_scenario(text: str) -> ScenarioFile:
    """Read and validate a scenario document."""
    sections = _read_sections(text)
    for sec in ("SYSTEM", "REGIONS", "SPEC", "SPLIT"):
        if sec not in sections:
            raise ScenarioError(f"missing section [{sec}]")

    a_txt, a_ln = _get(sections, "SYSTEM", "A")
    b_txt, b_ln = _get(sections, "SYSTEM", "B")
    A, B = _matrix(a_txt, a_ln), _matrix(b_txt, b_ln)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got {A.shape[0]}x{A.shape[1]}", a_ln)
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"B has {B.shape[0]} rows, A has {A.shape[0]}", b_ln)
    n, m = A.shape[0], B.shape[1]
    vecs = {}
    for key, size in (("input_lo", m), ("input_hi", m), ("x0", n)):
        txt, ln = _get(sections, "SYSTEM", key)
        vec = np.array(_numbers(txt, ln))
        if vec.size != size:
            raise DimensionError(f"{key} needs {size} entries, got {vec.size}", ln)
        vecs[key] = vec
    try:
        system = LinearSystem(A, B, vecs["input_lo"], vecs["input_hi"])
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    h_txt, h_ln = _get(sections, "SYSTEM", "horizon")
    try:
        horizon = int(h_txt)
    except ValueError as exc:
        raise ScenarioError(f"horizon must be an integer, got {h_txt!r}", h_ln) from exc

    regions, boxes = {}, {}
    for name, (txt, ln) in sections["REGIONS"].items():
        bounds = _parse_box(txt, ln)
        if len(bounds) != n:
            raise DimensionError(f"region {name} has {len(bounds)} sides, state dimension is {n}", ln)
        boxes[name] = bounds
        regions[name] = box_region(bounds, name)

    f_txt, f_ln = _get(sections, "SPEC", "formula")
    try:
        formula = parse_formula(f_txt, regions=regions, dim=n, line0=f_ln)
    except STLSyntaxError as exc:
        if exc.message.startswith("unknown region"):
            raise UnknownRegionError(exc.message, f_ln) from exc
        raise
    try:
        fragment = fragment_from_formula(formula)
    except FragmentShapeError as exc:
        raise ScenarioError(f"shape: {exc}", f_ln) from exc
    if fragment.length != horizon:
        raise HorizonMismatchError(f"horizon {horizon} differs from the formula length {fragment.length}", h_ln)

    k_txt, k_ln = _get(sections, "SPLIT", "kappas")
    try:
        kappas = check_kappas([int(v) for v in _numbers(k_txt, k_ln)], horizon)
    except KappaError as exc:
        raise ScenarioError(str(exc), k_ln) from exc
    t_txt, _ = _get(sections, "SPLIT", "taus", required=False)
    taus = parse_taus(t_txt)

    solver = SolverParams()
    if "SOLVER" in sections:
        keymap = {
            "M": ("big_m", float),
            "epsilon": ("epsilon", float),
            "lambda": ("lam", float),
            "node_budget": ("node_budget", int),
            "time_budget_s": ("time_budget_s", float),
            "seed": ("seed", int),
        }
        kwargs = {}
        for key, (txt, ln) in sections["SOLVER"].items():
            if key not in keymap:
                raise ScenarioError(f"unknown solver key {key!r}", ln)
            attr, conv = keymap[key]
            try:
                kwargs[attr] = conv(float(txt)) if conv is int else conv(txt)
            except ValueError as exc:
                raise ScenarioError(f"bad value for {key}: {txt!r}", ln) from exc
        solver = SolverParams(**kwargs)

    return ScenarioFile(system, vecs["x0"], horizon, regions, formula, fragment, kappas, taus, solver, boxes)


def _vec(v) -> str:
    return " ".join(format_number(float(x)) for x in v)


def format_scenario(sc: ScenarioFile) -> str:
    """Scenario document that :func:`parse_scenario` reads back."""
    mat = lambda M: "; ".join(_vec(r) for r in np.atleast_2d(M))  # noqa: E731
    lines = [
        "[SYSTEM]",
        f"A = {mat(sc.system.A)}",
        f"B = {mat(sc.system.B)}",
        f"input_lo = {_vec(sc.system.input_lo)}",
        f"input_hi = {_vec(sc.system.input_hi)}",
        f"x0 = {_vec(sc.initial_state)}",
        f"horizon = {sc.horizon}",
        "",
        "[REGIONS]",
    ]
    for name, bounds in sc.region_boxes.items():
        lines.append(f"{name} = " + " x ".join(f"[{format_number(lo)},{format_number(hi)}]" for lo, hi in bounds))
    lines += ["", "[SPEC]", f"formula = {format_formula(sc.formula)}", "", "[SPLIT]"]
    lines.append("kappas = " + ", ".join(str(k) for k in sc.kappas))
    if sc.taus is not None:
        taus = sc.taus if isinstance(sc.taus, (tuple, list)) else [sc.taus]
        lines.append("taus = " + ", ".join(str(t) for t in taus))
    p = sc.solver_params
    lines += [
        "",
        "[SOLVER]",
        f"M = {format_number(p.big_m)}",
        f"epsilon = {format_number(p.epsilon)}",
        f"lambda = {format_number(p.lam)}",
        f"node_budget = {p.node_budget}",
        f"time_budget_s = {format_number(p.time_budget_s)}",
        f"seed = {p.seed}",
    ]
    return "\n".join(lines) + "\n"

