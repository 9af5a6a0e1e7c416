"""Fixed-format MPS writer and reader for :class:`MilpProblem`.

Names longer than eight characters are replaced by ``C0000001`` /
``R0000001`` style names and a mapping table is returned with the text.
Numbers use the shortest representation that round-trips exactly; those
that fit keep the classic 12-character fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .milp import EQ, GE, LE, MilpProblem

NAME_WIDTH = 8
OBJ_ROW = "COST"
_SENSE_CODE = {LE: "L", GE: "G", EQ: "E"}
_CODE_SENSE = {v: k for k, v in _SENSE_CODE.items()}


@dataclass(frozen=True)
class MpsDocument:
    text: str
    column_map: dict[str, str]  # MPS name -> original name
    row_map: dict[str, str]

    def mapping_table(self) -> str:
        lines = ["kind,mps_name,original_name"]
        lines += [f"column,{k},{v}" for k, v in self.column_map.items()]
        lines += [f"row,{k},{v}" for k, v in self.row_map.items()]
        return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    s = repr(float(v))
    if s.endswith(".0"):
        s = s[:-2]
    return s


def _names(names, prefix):
    if all(len(n) <= NAME_WIDTH and " " not in n for n in names) and OBJ_ROW not in names:
        return list(names), {}
    width = NAME_WIDTH - len(prefix)
    if len(names) >= 10 ** width:
        raise ValueError("too many names for fixed-format MPS")
    new = [f"{prefix}{k + 1:0{width}d}" for k in range(len(names))]
    return new, dict(zip(new, names))


def _field_line(code, name, entries=()):
    # columns 2-3 code, 5-12 name, 15-22 / 40-47 names, 25-36 / 50-61 values
    line = f" {code:<2} {name:<8}"
    for k, (other, value) in enumerate(entries):
        line += "  " if k == 0 else "   "
        line += f"{other:<8}  {value:>12}"
    return line.rstrip()


def export_mps(problem: MilpProblem, name: str = "FCSIZING") -> MpsDocument:
    cols, cmap = _names(problem.var_names, "C")
    rows, rmap = _names(problem.row_names, "R")
    out = [f"NAME          {name}", "ROWS", _field_line("N", OBJ_ROW)]
    for r, sense in zip(rows, problem.senses):
        out.append(_field_line(_SENSE_CODE[sense], r))

    out.append("COLUMNS")
    A = problem.A.tocsc()
    in_int = False
    marker = 0
    for j, cname in enumerate(cols):
        if problem.integer[j] and not in_int:
            out.append(f"    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not problem.integer[j] and in_int:
            out.append(f"    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = []
        if problem.c[j] != 0:
            entries.append((OBJ_ROW, _num(problem.c[j])))
        lo, hi = A.indptr[j], A.indptr[j + 1]
        for i, v in zip(A.indices[lo:hi], A.data[lo:hi]):
            entries.append((rows[i], _num(v)))
        if not entries:
            # keep the column declared
            entries.append((OBJ_ROW, "0"))
        for k in range(0, len(entries), 2):
            out.append(_field_line("", cname, entries[k : k + 2]))
    if in_int:
        out.append(f"    MARKER                 'MARKER'                 'INTEND'")

    out.append("RHS")
    rhs_entries = [(r, _num(v)) for r, v in zip(rows, problem.rhs) if v != 0]
    if problem.c0 != 0:
        rhs_entries.append((OBJ_ROW, _num(-problem.c0)))
    for k in range(0, len(rhs_entries), 2):
        out.append(_field_line("", "RHS", rhs_entries[k : k + 2]))

    out.append("BOUNDS")
    for j, cname in enumerate(cols):
        lo, hi = problem.lb[j], problem.ub[j]
        if lo == hi:
            out.append(_field_line("FX", "BND", [(cname, _num(lo))]))
            continue
        if lo == -np.inf and hi == np.inf:
            out.append(_field_line("FR", "BND", [(cname, "")]))
            continue
        if lo == -np.inf:
            out.append(_field_line("MI", "BND", [(cname, "")]))
        elif lo != 0 or problem.integer[j]:
            out.append(_field_line("LO", "BND", [(cname, _num(lo))]))
        if hi != np.inf:
            out.append(_field_line("UP", "BND", [(cname, _num(hi))]))
        elif problem.integer[j]:
            out.append(_field_line("PL", "BND", [(cname, "")]))
    out.append("ENDATA")
    return MpsDocument("\n".join(out) + "\n", cmap, rmap)


class MpsParseError(ValueError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_mps(text: str, column_map=None, row_map=None) -> MilpProblem:
    """Read MPS text (fields split on whitespace) back into a problem."""
    column_map = column_map or {}
    row_map = row_map or {}
    section = None
    obj_row = None
    row_order: list[str] = []
    senses: dict[str, str] = {}
    col_order: list[str] = []
    col_int: dict[str, bool] = {}
    entries: dict[str, list] = {}
    rhs: dict[str, float] = {}
    lb: dict[str, float] = {}
    ub: dict[str, float] = {}
    c0 = 0.0
    in_int = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()[0]
            if head == "NAME":
                continue
            if head == "ENDATA":
                break
            if head not in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES", "OBJSENSE"):
                raise MpsParseError(lineno, f"unknown section {head}")
            if head in ("RANGES", "OBJSENSE"):
                raise MpsParseError(lineno, f"section {head} is not supported")
            section = head
            continue
        f = raw.split()
        if section == "ROWS":
            code, rname = f[0], f[1]
            if code == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            if code not in _CODE_SENSE:
                raise MpsParseError(lineno, f"bad row type {code}")
            row_order.append(rname)
            senses[rname] = _CODE_SENSE[code]
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1].strip("'") == "MARKER":
                tag = f[2].strip("'")
                in_int = tag == "INTORG"
                continue
            cname = f[0]
            if cname not in entries:
                col_order.append(cname)
                entries[cname] = []
                col_int[cname] = in_int
            pairs = f[1:]
            if len(pairs) % 2:
                raise MpsParseError(lineno, "odd number of fields in COLUMNS")
            for k in range(0, len(pairs), 2):
                entries[cname].append((pairs[k], float(pairs[k + 1])))
        elif section == "RHS":
            pairs = f[1:] if len(f) % 2 else f
            for k in range(0, len(pairs), 2):
                if pairs[k] == obj_row:
                    c0 = -float(pairs[k + 1])
                else:
                    rhs[pairs[k]] = float(pairs[k + 1])
        elif section == "BOUNDS":
            code, cname = f[0], f[2]
            val = float(f[3]) if len(f) > 3 else None
            if cname not in entries:
                raise MpsParseError(lineno, f"bound on unknown column {cname}")
            if code == "FX":
                lb[cname] = ub[cname] = val
            elif code == "FR":
                lb[cname], ub[cname] = -np.inf, np.inf
            elif code == "MI":
                lb[cname] = -np.inf
            elif code == "PL":
                ub[cname] = np.inf
            elif code == "LO":
                lb[cname] = val
            elif code == "UP":
                ub[cname] = val
            elif code == "BV":
                lb[cname], ub[cname] = 0.0, 1.0
            else:
                raise MpsParseError(lineno, f"unsupported bound type {code}")
        else:
            raise MpsParseError(lineno, "data outside a section")

    ridx = {r: i for i, r in enumerate(row_order)}
    n, m = len(col_order), len(row_order)
    c = np.zeros(n)
    ii, jj, vv = [], [], []
    for j, cname in enumerate(col_order):
        for rname, v in entries[cname]:
            if rname == obj_row:
                c[j] += v
            elif rname in ridx:
                ii.append(ridx[rname])
                jj.append(j)
                vv.append(v)
            else:
                raise MpsParseError(0, f"column {cname} references unknown row {rname}")
    A = sp.csr_matrix((vv, (ii, jj)), shape=(m, n))
    A.sort_indices()
    integer = np.array([col_int[cn] for cn in col_order], dtype=bool)
    lbs = np.array([lb.get(cn, 0.0) for cn in col_order], dtype=float)
    default_ub = [np.inf for cn in col_order]
    ubs = np.array([ub.get(cn, d) for cn, d in zip(col_order, default_ub)], dtype=float)
    return MilpProblem(
        var_names=tuple(column_map.get(cn, cn) for cn in col_order),
        lb=lbs,
        ub=ubs,
        integer=integer,
        c=c,
        A=A,
        senses=tuple(senses[r] for r in row_order),
        rhs=np.array([rhs.get(r, 0.0) for r in row_order]),
        row_names=tuple(row_map.get(r, r) for r in row_order),
        c0=c0,
    )


def same_problem(p: MilpProblem, q: MilpProblem) -> bool:
    """Equality of the mathematical content and names (metadata ignored)."""
    return (
        p.var_names == q.var_names
        and p.row_names == q.row_names
        and p.senses == q.senses
        and np.array_equal(p.lb, q.lb)
        and np.array_equal(p.ub, q.ub)
        and np.array_equal(p.integer, q.integer)
        and np.array_equal(p.c, q.c)
        and np.array_equal(p.rhs, q.rhs)
        and p.c0 == q.c0
        and p.A.shape == q.A.shape
        and (p.A != q.A).nnz == 0
    )
