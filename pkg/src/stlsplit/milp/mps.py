"""Fixed-format MPS export and a matching reader.

Fields start at columns 2, 5, 15, 25, 40 and 50 (1-based). Names are limited
to 8 characters and numbers to 12, which the encoder's naming scheme
respects.
"""
from __future__ import annotations

import math

from .model import MilpModel

_OBJ = "COST"


def _num(v: float) -> str:
    """Shortest text of at most 12 characters that reads back as ``v``."""
    if v == int(v) and abs(v) < 1e11:
        return str(int(v))
    for digits in range(1, 18):
        s = f"{v:.{digits}g}"
        if float(s) == v:
            break
    if len(s) > 12:
        for digits in range(12, 0, -1):
            s = f"{v:.{digits}g}".replace("e+0", "e").replace("e-0", "e-").replace("e+", "e")
            if len(s) <= 12:
                break
    return s


def _line(f1="", f2="", f3="", f4="", f5="", f6="") -> str:
    for name in (f2, f3, f5):
        if len(name) > 8:
            raise ValueError(f"name {name!r} is longer than the 8 characters fixed MPS allows")
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        line += f"   {f5:<8}  {f6:>12}"
    return line.rstrip()


def export_mps(model: MilpModel) -> str:
    """Fixed-format MPS text for ``model`` (objective row ``COST``)."""
    out = [f"NAME          {model.name[:8]}", "ROWS", _line("N", _OBJ)]
    for con in model.constraints:
        out.append(_line(con.sense, con.name))
    out.append("COLUMNS")
    col_rows: list = [[] for _ in model.variables]
    for j, a in model.objective.items():
        if a != 0:
            col_rows[j].append((_OBJ, a))
    for con in model.constraints:
        for j, a in con.coefs.items():
            col_rows[j].append((con.name, a))
    in_int = False
    marker = 0
    for j, var in enumerate(model.variables):
        if var.integer != in_int:
            kind = "'INTORG'" if var.integer else "'INTEND'"
            out.append(_line("", f"M{marker:07d}", "'MARKER'", "", kind))
            marker += 1
            in_int = var.integer
        entries = col_rows[j]
        if not entries:
            # keep the column visible so its bounds still apply
            entries = [(_OBJ, 0.0)]
        for k in range(0, len(entries), 2):
            pair = entries[k : k + 2]
            if len(pair) == 2:
                out.append(_line("", var.name, pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])))
            else:
                out.append(_line("", var.name, pair[0][0], _num(pair[0][1])))
    if in_int:
        out.append(_line("", f"M{marker:07d}", "'MARKER'", "", "'INTEND'"))
    out.append("RHS")
    for con in model.constraints:
        if con.rhs != 0:
            out.append(_line("", "RHS", con.name, _num(con.rhs)))
    out.append("BOUNDS")
    for var in model.variables:
        lb, ub = var.lb, var.ub
        if var.integer and lb == 0 and ub == 1:
            out.append(_line("BV", "BND", var.name, ""))
            continue
        if lb == ub:
            out.append(_line("FX", "BND", var.name, _num(lb)))
            continue
        if math.isinf(lb) and math.isinf(ub):
            out.append(_line("FR", "BND", var.name, ""))
            continue
        if math.isinf(lb):
            out.append(_line("MI", "BND", var.name, ""))
        elif lb != 0:
            out.append(_line("LO", "BND", var.name, _num(lb)))
        if not math.isinf(ub):
            out.append(_line("UP", "BND", var.name, _num(ub)))
        elif var.integer:
            out.append(_line("PL", "BND", var.name, ""))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def _fields(line: str) -> list:
    # slice by the fixed column layout, falling back to whitespace splitting
    padded = line.ljust(61)
    parts = [padded[1:3], padded[4:12], padded[14:22], padded[24:36], padded[39:47], padded[49:61]]
    return [p.strip() for p in parts]


def read_mps(text: str) -> MilpModel:
    """Parse fixed-format MPS written by :func:`export_mps` (and similar files)."""
    model = MilpModel()
    section = None
    senses: dict = {}
    row_order: list = []
    obj_row = None
    coefs: dict = {}
    integer = False
    col_order: list = []
    col_int: dict = {}
    rhs: dict = {}
    bounds: dict = {}
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0].upper()
            if section == "NAME" and len(head) > 1:
                model.name = head[1]
            if section == "ENDATA":
                break
            continue
        f = _fields(raw)
        if section == "ROWS":
            sense, name = f[0], f[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = name
                continue
            senses[name] = sense
            row_order.append(name)
        elif section == "COLUMNS":
            if f[2] == "'MARKER'":
                integer = f[4] == "'INTORG'"
                continue
            col = f[1]
            if col not in col_int:
                col_order.append(col)
                col_int[col] = integer
            for rname, val in ((f[2], f[3]), (f[4], f[5])):
                if rname:
                    coefs.setdefault(col, {})[rname] = float(val)
        elif section == "RHS":
            for rname, val in ((f[2], f[3]), (f[4], f[5])):
                if rname:
                    rhs[rname] = float(val)
        elif section == "BOUNDS":
            bounds.setdefault(f[2], []).append((f[0], f[3]))
        else:
            raise ValueError(f"unexpected data line in section {section}: {raw!r}")
    for col in col_order:
        is_int = col_int[col]
        lb, ub = 0.0, math.inf
        for kind, val in bounds.get(col, []):
            if kind == "BV":
                lb, ub, is_int = 0.0, 1.0, True
            elif kind == "FX":
                lb = ub = float(val)
            elif kind == "FR":
                lb, ub = -math.inf, math.inf
            elif kind == "MI":
                lb = -math.inf
            elif kind == "PL":
                ub = math.inf
            elif kind == "LO":
                lb = float(val)
            elif kind == "UP":
                ub = float(val)
            else:
                raise ValueError(f"unsupported bound type {kind}")
        model.add_var(col, lb, ub, is_int)
    rows: dict = {name: {} for name in row_order}
    for col, entries in coefs.items():
        j = model.index(col)
        for rname, val in entries.items():
            if rname == obj_row:
                if val != 0:
                    model.objective[j] = val
            else:
                rows[rname][j] = val
    for name in row_order:
        model.add_constraint(rows[name], senses[name], rhs.get(name, 0.0), name=name)
    return model
