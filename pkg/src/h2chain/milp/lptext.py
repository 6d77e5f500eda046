"""Plain-text rendering of a model, for logs and bug reports."""

from __future__ import annotations

import numpy as np

from .model import LinearProgram


def _term(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    mag = abs(coef)
    body = name if mag == 1.0 else f"{mag:g} {name}"
    return f"{sign} {body}".strip() if not first else f"{sign}{body}"


def _linear(coefs: np.ndarray, names, indices) -> str:
    parts = []
    for j in indices:
        c = float(coefs[j])
        if c == 0.0:
            continue
        parts.append(_term(c, names(j), first=not parts))
    return " ".join(parts) if parts else "0"


def format_lp(prog: LinearProgram) -> str:
    """Render ``prog`` in a readable equation-per-line layout."""
    name = prog.name_of
    cols = range(prog.n_vars)
    lines = [f"maximize  {_linear(prog.objective, name, cols)}"]
    if prog.objective_offset:
        lines[0] += f" + {prog.objective_offset:g}"
    lines.append("subject to")
    for i in range(prog.n_rows):
        nz = np.flatnonzero(prog.a[i])
        lines.append(f"  r{i}: {_linear(prog.a[i], name, nz)} {prog.relation_text(i)} {prog.rhs[i]:g}")
    lines.append("bounds")
    for j in cols:
        lo, up = prog.lower[j], prog.upper[j]
        if lo == 0.0 and up == np.inf:
            continue
        lo_s = "-inf" if lo == -np.inf else f"{lo:g}"
        up_s = "inf" if up == np.inf else f"{up:g}"
        lines.append(f"  {lo_s} <= {name(j)} <= {up_s}")
    ints = [name(j) for j in cols if prog.integrality[j]]
    if ints:
        lines.append("integer")
        lines.append("  " + " ".join(ints))
    return "\n".join(lines) + "\n"
