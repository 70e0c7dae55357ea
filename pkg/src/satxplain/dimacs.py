"""DIMACS CNF / WCNF readers and writers."""

from __future__ import annotations

from .errors import ParseError
from .formula import Cnf


def write_dimacs(cnf: Cnf) -> str:
    lines = [f"p cnf {cnf.num_vars} {len(cnf.clauses)}"]
    for clause in cnf.clauses:
        lines.append(" ".join(map(str, clause)) + " 0")
    return "\n".join(lines) + "\n"


def _body_tokens(text: str, kind: str):
    """Yield (line number, header fields, literal tokens) from a DIMACS body."""
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise ParseError("duplicate header", line=lineno)
            fields = line.split()
            if len(fields) < 4 or fields[1] != kind:
                raise ParseError(f"expected 'p {kind} ...' header", line=lineno)
            try:
                header = [int(x) for x in fields[2:]]
            except ValueError:
                raise ParseError("non-integer header field", line=lineno) from None
            continue
        if header is None:
            raise ParseError("clause before header", line=lineno)
        try:
            toks = [int(x) for x in line.split()]
        except ValueError:
            raise ParseError("non-integer token", line=lineno) from None
        yield lineno, header, toks
    if header is None:
        raise ParseError("missing header")


def read_dimacs(text: str) -> Cnf:
    clauses = []
    current: list[int] = []
    header = None
    lineno = 0
    for lineno, header, toks in _body_tokens(text, "cnf"):
        for tok in toks:
            if tok == 0:
                clauses.append(current)
                current = []
            else:
                if abs(tok) > header[0]:
                    raise ParseError(f"variable {abs(tok)} exceeds declared {header[0]}", line=lineno)
                current.append(tok)
    if header is None:
        # header-only file
        header = _header_only(text, "cnf")
    if current:
        raise ParseError("last clause not terminated by 0", line=lineno)
    if len(clauses) != header[1]:
        raise ParseError(f"header declares {header[1]} clauses, found {len(clauses)}")
    cnf = Cnf(clauses)
    cnf.num_vars = header[0]
    return cnf


def _header_only(text: str, kind: str) -> list[int]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("p"):
            fields = line.split()
            if len(fields) < 4 or fields[1] != kind:
                raise ParseError(f"expected 'p {kind} ...' header", line=lineno)
            return [int(x) for x in fields[2:]]
    raise ParseError("missing header")


def write_wcnf(instance) -> str:
    """Export hard clauses with weight TOP and soft clauses with weight 1.

    TOP is ``len(soft) + 1``: strictly larger than the total soft weight.
    """
    hard = instance.hard
    soft = instance.soft
    top = len(soft) + 1
    num_vars = max([hard.num_vars] + [abs(l) for c in soft for l in c])
    lines = [f"p wcnf {num_vars} {len(hard.clauses) + len(soft)} {top}"]
    for clause in hard.clauses:
        lines.append(f"{top} " + " ".join(map(str, clause)) + " 0")
    for clause in soft:
        lines.append("1 " + " ".join(map(str, clause)) + " 0")
    return "\n".join(lines) + "\n"


def read_wcnf(text: str) -> tuple[Cnf, list[tuple[int, ...]], int]:
    """Parse WCNF into (hard, soft, top); soft weights other than 1 are rejected."""
    hard: list[list[int]] = []
    soft: list[tuple[int, ...]] = []
    header = None
    for lineno, header, toks in _body_tokens(text, "wcnf"):
        if len(header) < 3:
            raise ParseError("wcnf header needs a TOP weight", line=lineno)
        if not toks or toks[-1] != 0:
            raise ParseError("clause not terminated by 0", line=lineno)
        weight, lits = toks[0], toks[1:-1]
        if weight == header[2]:
            hard.append(lits)
        elif weight == 1:
            soft.append(tuple(lits))
        else:
            raise ParseError(f"unsupported weight {weight}", line=lineno)
    if header is None:
        header = _header_only(text, "wcnf")
    if len(hard) + len(soft) != header[1]:
        raise ParseError(f"header declares {header[1]} clauses, found {len(hard) + len(soft)}")
    cnf = Cnf(hard)
    cnf.num_vars = header[0]
    return cnf, soft, header[2]


def write_sets(label: str, sets) -> str:
    """Line-oriented dump, e.g. ``mcs: 3 7 12``."""
    return "".join(f"{label}: " + " ".join(map(str, sorted(s))) + "\n" for s in sets)
