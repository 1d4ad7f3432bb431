"""Published per-loop feature rows for the artificial matmul test cases.

The original loop sources are not available, so each row is paired with a
synthesized loop spec whose analysis reproduces the row exactly.  The specs
are built from four one-operation statement shapes placed inside sibling
inner loops with power-of-ten trip counts, plus an empty ``loop 1`` chain
that sets the nesting depth.
"""

from __future__ import annotations

from typing import NamedTuple

from smartexec.loopir import StaticFeatures


class Table2Row(NamedTuple):
    test: int
    loop: str
    iterations: int
    total_ops: int
    float_ops: int
    comparison_ops: int
    loop_level: int
    policy: str          # "par" or "seq"
    chunk_percent: float
    prefetch_distance: int

    @property
    def key(self) -> str:
        return f"{self.test}-{self.loop}"


TABLE2 = tuple(Table2Row(*r) for r in (
    (1, "l1", 10000, 400100, 200000, 101010, 2, "par", 0.1, 5),
    (1, "l2", 20000, 450026, 250000, 150503, 2, "par", 0.1, 5),
    (1, "l3", 20000, 502040, 250000, 103051, 2, "par", 0.1, 1),
    (1, "l4", 500, 550402, 200000, 150102, 1, "par", 10, 5),
    (2, "l1", 150000, 350106, 101010, 500, 2, "par", 0.1, 10),
    (2, "l2", 100, 10050016, 5000000, 2505013, 3, "seq", 10, 1),
    (2, "l3", 100, 25000000, 3010204, 1500204, 3, "seq", 10, 1),
    (2, "l4", 50000, 4000450, 200000, 100150, 1, "par", 1, 5),
    (3, "l1", 500, 4504030, 250000, 150300, 2, "par", 1, 10),
    (3, "l2", 400, 3502020, 200000, 100405, 1, "par", 1, 10),
    (3, "l3", 2000, 250033, 150000, 103040, 3, "seq", 10, 5),
    (3, "l4", 2500, 350400, 150000, 100600, 3, "seq", 10, 5),
    (4, "l1", 20000, 204002, 100000, 10320, 2, "par", 0.1, 1),
    (4, "l2", 30000, 400000, 150102, 10000, 2, "par", 0.1, 1),
    (4, "l3", 300, 550000, 44000, 20030, 3, "seq", 10, 5),
    (4, "l4", 400, 450000, 50400, 10602, 3, "seq", 10, 10),
    (5, "l1", 200, 4502001, 150000, 101004, 3, "par", 1, 1),
    (5, "l2", 700, 400020, 300000, 150006, 3, "par", 1, 5),
    (5, "l3", 300, 302020, 20000, 14005, 2, "par", 1, 5),
    (5, "l4", 100, 50400, 20000, 10110, 2, "seq", 10, 10),
))

_SHAPES = {
    "float": "fassign x = y;",
    "int": "iassign p = q;",
    "int_cmp": "if (p < q) {}",
    "float_cmp": "if (x < y) {}",
}


def _digits(v: int) -> list[int]:
    return [int(ch) for ch in reversed(str(v))]


def synthesize_loop_spec(total: int, float_ops: int, comparison: int, level: int) -> str:
    """Loop-spec text whose analysis gives exactly the requested counts.

    Rows where float and comparison counts overlap (their sum exceeds the
    total) are realized with float comparisons.
    """
    float_cmp = max(0, float_ops + comparison - total)
    counts = {
        "float": float_ops - float_cmp,
        "int_cmp": comparison - float_cmp,
        "float_cmp": float_cmp,
        "int": total - float_ops - comparison + float_cmp,
    }
    if min(counts.values()) < 0 or level < 0:
        raise ValueError("counts are not realizable")
    if level == 0 and any(v >= 10 for v in counts.values()):
        raise ValueError("counts of 10 or more need at least one inner loop")

    by_power: dict[int, list[str]] = {}
    for shape, count in counts.items():
        for k, d in enumerate(_digits(count)):
            by_power.setdefault(k, []).extend([_SHAPES[shape]] * d)

    lines = ["loop N {", "    fvar x; fvar y; ivar p; ivar q;"]
    for k in sorted(by_power):
        stmts = by_power[k]
        if not stmts:
            continue
        if k == 0:
            lines.extend("    " + s for s in stmts)
        else:
            lines.append(f"    loop {10 ** k} {{")
            lines.extend("        " + s for s in stmts)
            lines.append("    }")
    if level:
        lines.append("    " + "loop 1 { " * level + "}" * level)
    lines.append("}")
    return "\n".join(lines) + "\n"


def row_features(row: Table2Row) -> StaticFeatures:
    """The published statics of a row (variable and branch counts unpublished, left 0)."""
    return StaticFeatures(total_ops=row.total_ops, float_ops=row.float_ops,
                          comparison_ops=row.comparison_ops, deepest_loop_level=row.loop_level)
