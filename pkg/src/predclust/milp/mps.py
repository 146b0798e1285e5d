"""Free-format MPS reader/writer for MilpModel.

Only what MilpModel can represent is supported: minimization, L/G/E rows,
continuous columns and binary columns (integer markers with [0, 1] bounds).
Model metadata travels in a leading comment line so decoded solutions of an
imported model still know their layout.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .model import Constraint, MilpModel, Sense, Variable

OBJ_ROW = "OBJ"
META_TAG = "* PREDCLUST-META "
SECTIONS = {"NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA", "OBJSENSE"}
UNSUPPORTED = {"RANGES", "SOS", "QUADOBJ", "QMATRIX", "QSECTION", "QCMATRIX", "INDICATORS"}


class MpsError(ValueError):
    pass


def _num(v: float) -> str:
    return format(float(v), ".17g")


def write_mps_string(model: MilpModel) -> str:
    if not model.constraints:
        raise MpsError("refusing to write a model without constraints")
    model.validate()
    for name in [v.name for v in model.variables] + [c.name for c in model.constraints]:
        if not name or any(ch.isspace() for ch in name) or name == OBJ_ROW:
            raise MpsError(f"name {name!r} cannot be written to MPS")

    n = model.n_vars
    by_col: list[list[tuple[str, float]]] = [[] for _ in range(n)]
    for j, v in sorted(model.objective.items()):
        if v:
            by_col[j].append((OBJ_ROW, v))
    for con in model.constraints:
        for j, v in zip(con.cols, con.vals):
            by_col[j].append((con.name, v))

    out = []
    if model.metadata:
        out.append(META_TAG + json.dumps(model.metadata, sort_keys=True))
    out.append(f"NAME {model.name}")
    out.append("ROWS")
    out.append(f" N {OBJ_ROW}")
    for con in model.constraints:
        out.append(f" {con.sense.value} {con.name}")
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, var in enumerate(model.variables):
        if var.binary != in_int:
            tag = "'INTORG'" if var.binary else "'INTEND'"
            out.append(f"    MARKER{marker} 'MARKER' {tag}")
            marker += 1
            in_int = var.binary
        entries = by_col[j] or [(OBJ_ROW, 0.0)]
        for row, val in entries:
            out.append(f"    {var.name} {row} {_num(val)}")
    if in_int:
        out.append(f"    MARKER{marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    for con in model.constraints:
        if con.rhs != 0.0:
            out.append(f"    RHS {con.name} {_num(con.rhs)}")
    out.append("BOUNDS")
    for var in model.variables:
        if var.lb == var.ub:
            out.append(f" FX BND {var.name} {_num(var.lb)}")
            continue
        if math.isinf(var.lb):
            out.append(f" MI BND {var.name}")
        else:
            out.append(f" LO BND {var.name} {_num(var.lb)}")
        if math.isinf(var.ub):
            out.append(f" PL BND {var.name}")
        else:
            out.append(f" UP BND {var.name} {_num(var.ub)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def export_mps(model: MilpModel, path) -> None:
    text = write_mps_string(model)
    Path(path).write_text(text, encoding="ascii")


def _float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MpsError(f"line {lineno}: bad number {tok!r}") from None


def read_mps_string(text: str) -> MilpModel:
    section = None
    name = "PREDCLUST"
    metadata: dict = {}
    obj_row = None
    row_sense: dict[str, Sense] = {}
    row_order: list[str] = []
    col_order: list[str] = []
    col_entries: dict[str, dict[str, float]] = {}
    col_binary: dict[str, bool] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    in_int = False
    ended = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith(META_TAG):
            metadata = json.loads(raw[len(META_TAG):])
            continue
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        toks = line.split()
        if not raw[0].isspace():
            head = toks[0].upper()
            if head in UNSUPPORTED:
                raise MpsError(f"line {lineno}: {head} section is not supported")
            if head not in SECTIONS:
                raise MpsError(f"line {lineno}: unknown section header {toks[0]!r}")
            section = head
            if head == "NAME":
                name = toks[1] if len(toks) > 1 else name
            elif head == "OBJSENSE" and len(toks) > 1 and toks[1].upper() != "MIN":
                raise MpsError(f"line {lineno}: only minimization is supported")
            elif head == "ENDATA":
                ended = True
                break
            continue

        if section == "ROWS":
            if len(toks) != 2:
                raise MpsError(f"line {lineno}: expected '<type> <name>' in ROWS")
            kind, rname = toks[0].upper(), toks[1]
            if kind == "N":
                if obj_row is not None:
                    raise MpsError(f"line {lineno}: more than one objective row")
                obj_row = rname
                continue
            if kind not in ("L", "G", "E"):
                raise MpsError(f"line {lineno}: unknown row type {kind!r}")
            if rname in row_sense:
                raise MpsError(f"line {lineno}: duplicate row {rname!r}")
            row_sense[rname] = Sense(kind)
            row_order.append(rname)
        elif section == "COLUMNS":
            if len(toks) >= 3 and toks[1].strip("'\"") == "MARKER":
                tag = toks[2].strip("'\"").upper()
                if tag == "INTORG":
                    in_int = True
                elif tag == "INTEND":
                    in_int = False
                else:
                    raise MpsError(f"line {lineno}: unknown marker {toks[2]!r}")
                continue
            if len(toks) not in (3, 5):
                raise MpsError(f"line {lineno}: malformed COLUMNS entry")
            cname = toks[0]
            if cname not in col_entries:
                col_order.append(cname)
                col_entries[cname] = {}
                col_binary[cname] = in_int
            for rname, val in zip(toks[1::2], toks[2::2]):
                if rname != obj_row and rname not in row_sense:
                    raise MpsError(f"line {lineno}: column {cname!r} references unknown row {rname!r}")
                if rname in col_entries[cname]:
                    raise MpsError(f"line {lineno}: duplicate entry for ({cname}, {rname})")
                col_entries[cname][rname] = _float(val, lineno)
        elif section == "RHS":
            if len(toks) not in (2, 3, 4, 5):
                raise MpsError(f"line {lineno}: malformed RHS entry")
            pairs = toks[1:] if len(toks) % 2 == 1 else toks
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                if rname == obj_row:
                    if _float(val, lineno) != 0.0:
                        raise MpsError(f"line {lineno}: objective constants are not supported")
                    continue
                if rname not in row_sense:
                    raise MpsError(f"line {lineno}: RHS references unknown row {rname!r}")
                rhs[rname] = _float(val, lineno)
        elif section == "BOUNDS":
            if len(toks) < 3:
                raise MpsError(f"line {lineno}: malformed BOUNDS entry")
            kind = toks[0].upper()
            cname = toks[2]
            if cname not in col_entries:
                raise MpsError(f"line {lineno}: bound on unknown column {cname!r}")
            b = bounds.setdefault(cname, [0.0, 1.0 if col_binary[cname] else math.inf])
            needs_value = kind in ("LO", "UP", "FX")
            if needs_value and len(toks) < 4:
                raise MpsError(f"line {lineno}: bound {kind} needs a value")
            if kind == "LO":
                b[0] = _float(toks[3], lineno)
            elif kind == "UP":
                b[1] = _float(toks[3], lineno)
            elif kind == "FX":
                b[0] = b[1] = _float(toks[3], lineno)
            elif kind == "MI":
                b[0] = -math.inf
            elif kind == "PL":
                b[1] = math.inf
            elif kind == "FR":
                b[0], b[1] = -math.inf, math.inf
            elif kind == "BV":
                b[0], b[1] = 0.0, 1.0
                col_binary[cname] = True
            else:
                raise MpsError(f"line {lineno}: unsupported bound type {kind!r}")
        else:
            raise MpsError(f"line {lineno}: data outside of a section")

    if not ended:
        raise MpsError("missing ENDATA")
    if obj_row is None:
        raise MpsError("no objective row")

    variables = []
    objective = {}
    row_terms: dict[str, list[tuple[int, float]]] = {r: [] for r in row_order}
    for j, cname in enumerate(col_order):
        binary = col_binary[cname]
        lb, ub = bounds.get(cname, [0.0, 1.0 if binary else math.inf])
        if binary and (lb, ub) != (0.0, 1.0):
            raise MpsError(f"integer column {cname!r} is not binary")
        variables.append(Variable(cname, lb, ub, binary))
        for rname, val in col_entries[cname].items():
            if rname == obj_row:
                if val:
                    objective[j] = val
            elif val != 0.0:
                row_terms[rname].append((j, val))
    constraints = []
    for rname in row_order:
        terms = sorted(row_terms[rname])
        constraints.append(
            Constraint(
                rname,
                tuple(t[0] for t in terms),
                tuple(t[1] for t in terms),
                row_sense[rname],
                rhs.get(rname, 0.0),
            )
        )
    return MilpModel(variables, constraints, objective, metadata, name)


def import_mps(path) -> MilpModel:
    return read_mps_string(Path(path).read_text(encoding="ascii"))
