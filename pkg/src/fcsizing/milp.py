"""Solver-agnostic sparse mixed-integer linear program (minimisation)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import scipy.sparse as sp

LE, GE, EQ = "<=", ">=", "="
SENSES = (LE, GE, EQ)


@dataclass(frozen=True)
class MilpProblem:
    """min c.x + c0  s.t.  rows (A x  sense  rhs),  lb <= x <= ub,  x_j integer where flagged.

    ``index`` maps a symbol to ``{key: column}`` and ``families`` maps a
    constraint family to its row indices; both are free-form metadata.
    """

    var_names: tuple[str, ...]
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    c: np.ndarray
    A: sp.csr_matrix
    senses: tuple[str, ...]
    rhs: np.ndarray
    row_names: tuple[str, ...]
    c0: float = 0.0
    index: Mapping[str, Mapping] = field(default_factory=dict)
    families: Mapping[str, tuple[int, ...]] = field(default_factory=dict)
    priority: Optional[np.ndarray] = None  # branching priority per column, higher first

    def __post_init__(self):
        n, m = len(self.var_names), len(self.row_names)
        for arr in (self.lb, self.ub, self.integer, self.c, self.rhs):
            arr.setflags(write=False)
        if not (len(self.lb) == len(self.ub) == len(self.integer) == len(self.c) == n):
            raise ValueError("variable arrays disagree in length")
        if self.priority is not None and len(self.priority) != n:
            raise ValueError("priority length differs from the number of variables")
        if self.A.shape != (m, n) or len(self.senses) != m or len(self.rhs) != m:
            raise ValueError("constraint arrays disagree in shape")
        if np.any(self.lb > self.ub):
            j = int(np.flatnonzero(self.lb > self.ub)[0])
            raise ValueError(f"variable {self.var_names[j]}: lower bound exceeds upper bound")
        bad = set(self.senses) - set(SENSES)
        if bad:
            raise ValueError(f"unknown constraint senses {bad}")

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def n_integer(self) -> int:
        return int(self.integer.sum())

    def col(self, symbol: str, *key) -> int:
        entry = self.index[symbol]
        if isinstance(entry, int):
            return entry
        return entry[key if len(key) != 1 else key[0]]

    def objective_value(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float) + self.c0)

    def with_bounds(self, lb, ub) -> "MilpProblem":
        return MilpProblem(
            self.var_names, np.array(lb, dtype=float), np.array(ub, dtype=float),
            self.integer.copy(), self.c.copy(), self.A, self.senses, self.rhs.copy(),
            self.row_names, self.c0, self.index, self.families, self.priority,
        )

    def dump(self) -> str:
        """Human-readable listing, one constraint per line, stable across runs."""
        out = [f"min {_expr(self.c, self.var_names)} + {self.c0!r}"]
        A = self.A.tocsr()
        for i, name in enumerate(self.row_names):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            terms = " ".join(
                f"{v:+.17g} {self.var_names[j]}" for j, v in zip(A.indices[lo:hi], A.data[lo:hi])
            )
            out.append(f"{name}: {terms} {self.senses[i]} {self.rhs[i]!r}")
        for j, name in enumerate(self.var_names):
            kind = "int" if self.integer[j] else "cont"
            out.append(f"bound {name} in [{self.lb[j]!r}, {self.ub[j]!r}] {kind}")
        return "\n".join(out) + "\n"


def _expr(c, names):
    return " ".join(f"{v:+.17g} {names[j]}" for j, v in enumerate(c) if v != 0) or "0"


class ProblemBuilder:
    """Incremental construction; rows and columns keep insertion order."""

    def __init__(self):
        self._names: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._int: list[bool] = []
        self._c: list[float] = []
        self._rows_i: list[int] = []
        self._rows_j: list[int] = []
        self._rows_v: list[float] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self._name_set: set[str] = set()
        self.c0 = 0.0
        self.index: dict[str, dict] = {}
        self.families: dict[str, list[int]] = {}
        self._priority: dict[int, int] = {}

    def add_var(self, name, lb=0.0, ub=np.inf, integer=False, cost=0.0, symbol=None, key=None) -> int:
        if name in self._name_set:
            raise ValueError(f"duplicate variable name {name}")
        j = len(self._names)
        self._names.append(name)
        self._name_set.add(name)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._int.append(bool(integer))
        self._c.append(float(cost))
        if symbol is not None:
            if key is None:
                self.index[symbol] = j
            else:
                self.index.setdefault(symbol, {})[key] = j
        return j

    def set_priority(self, j: int, level: int) -> None:
        self._priority[j] = int(level)

    def add_cost(self, j: int, cost: float) -> None:
        self._c[j] += cost

    def add_row(self, name, terms, sense, rhs, family=None) -> int:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense}")
        i = len(self._row_names)
        merged: dict[int, float] = {}
        for j, v in terms:
            if not 0 <= j < len(self._names):
                raise ValueError(f"row {name} references undeclared column {j}")
            merged[j] = merged.get(j, 0.0) + float(v)
        for j in sorted(merged):
            if merged[j] != 0.0:
                self._rows_i.append(i)
                self._rows_j.append(j)
                self._rows_v.append(merged[j])
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name)
        if family is not None:
            self.families.setdefault(family, []).append(i)
        return i

    def build(self) -> MilpProblem:
        m, n = len(self._row_names), len(self._names)
        A = sp.csr_matrix(
            (np.array(self._rows_v, dtype=float), (np.array(self._rows_i, dtype=np.int64),
                                                    np.array(self._rows_j, dtype=np.int64))),
            shape=(m, n),
        )
        A.sort_indices()
        return MilpProblem(
            var_names=tuple(self._names),
            lb=np.array(self._lb, dtype=float),
            ub=np.array(self._ub, dtype=float),
            integer=np.array(self._int, dtype=bool),
            c=np.array(self._c, dtype=float),
            A=A,
            senses=tuple(self._senses),
            rhs=np.array(self._rhs, dtype=float),
            row_names=tuple(self._row_names),
            c0=self.c0,
            index={k: (dict(v) if isinstance(v, dict) else v) for k, v in self.index.items()},
            families={k: tuple(v) for k, v in self.families.items()},
            priority=self._priority_array(n),
        )

    def _priority_array(self, n):
        if not self._priority:
            return None
        out = np.zeros(n, dtype=int)
        for j, level in self._priority.items():
            out[j] = level
        return out
