"""Line-oriented ``key = value`` input files for metrics, connections and fields."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import ParseError
from .expr import Expr, parse


@dataclass
class SpecFile:
    exprs: dict[str, Expr] = field(default_factory=dict)
    params: dict[str, float] = field(default_factory=dict)
    domain: tuple[float, float, float, float] | None = None
    excludes: list[Expr] = field(default_factory=list)
    digest: str = ""


def parse_spec(text: str, allowed: set[str]) -> SpecFile:
    """Parse spec text. ``allowed`` lists accepted expression keys (E, F, K0, ...)."""
    out = SpecFile(digest=hashlib.sha256(text.encode()).hexdigest()[:16])
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        lhs, rhs = (s.strip() for s in line.split("=", 1))
        if not rhs:
            raise ParseError(f"missing value for {lhs!r}", line=lineno)
        words = lhs.split()
        try:
            if len(words) == 2 and words[0] == "param":
                out.params[words[1]] = float(rhs)
            elif lhs == "domain":
                vals = [float(v) for v in rhs.split()]
                if len(vals) != 4 or not (vals[0] < vals[1] and vals[2] < vals[3]):
                    raise ParseError("domain needs x0 < x1 and y0 < y1", line=lineno)
                out.domain = tuple(vals)
            elif lhs == "exclude":
                out.excludes.append(parse(rhs))
            elif lhs in allowed:
                if lhs in out.exprs:
                    raise ParseError(f"duplicate key {lhs!r}", line=lineno)
                out.exprs[lhs] = parse(rhs)
            else:
                raise ParseError(f"unknown key {lhs!r}", line=lineno)
        except ParseError as err:
            if err.line is None:
                raise ParseError(err.message, offset=err.offset, line=lineno) from None
            raise
        except ValueError as err:
            raise ParseError(f"bad number: {err}", line=lineno) from None
    return out


def read_spec(path: str, allowed: set[str]) -> SpecFile:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read(), allowed)
