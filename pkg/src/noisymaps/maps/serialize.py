"""JSON form of descriptors and G-delta spec files.

Every node carries an explicit ``"type"`` tag; rationals are ``[num, den]``
pairs so gate arithmetic survives a round trip exactly.
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from ..errors import SpecParseError
from .descriptors import (
    BINARY,
    PAIR,
    Densify,
    GDelta,
    Interleave,
    LayeredMaj,
    Maj,
    MapDescriptor,
)
from .layout import ELayout
from .schedules import GDeltaSpec, OpenSetSchedule, OpenSetSpec, TargetSchedule

__all__ = [
    "to_dict",
    "from_dict",
    "dumps",
    "loads",
    "save",
    "load",
    "gdelta_to_dict",
    "parse_gdelta",
    "load_gdelta",
]

SCHEMA_VERSION = 1


def _rat(x: Fraction) -> list[int]:
    return [x.numerator, x.denominator]


def _open_set(O: OpenSetSpec) -> list[list[int]]:
    return [_rat(a) + _rat(b) for a, b in O.intervals]


def gdelta_to_dict(G: GDeltaSpec) -> dict:
    return {"levels": [_open_set(O) for O in G.levels]}


def to_dict(m: MapDescriptor) -> dict:
    if isinstance(m, Maj):
        return {"type": "maj", "n": m.n, "alphabet": "pair" if m.alphabet == PAIR else "binary"}
    if isinstance(m, LayeredMaj):
        s = m.schedule
        if isinstance(s, TargetSchedule):
            sched = {"kind": "target", "eps0": _rat(s.eps0)}
        elif isinstance(s, OpenSetSchedule):
            sched = {
                "kind": "open_set",
                "intervals": _open_set(s.open_set),
                "threshold": _rat(s.threshold),
                "threshold_source": s.threshold_source,
            }
        else:
            raise TypeError(f"cannot serialize schedule {type(s).__name__}")
        return {
            "type": "layered",
            "n": m.n,
            "schedule": sched,
            "layout": {"N": m.layout.N, "growth": m.layout.growth},
        }
    if isinstance(m, Interleave):
        return {"type": "interleave", "rows": [to_dict(r) for r in m.rows]}
    if isinstance(m, GDelta):
        return {"type": "gdelta", "spec": gdelta_to_dict(m.spec), "rows": m.rows}
    if isinstance(m, Densify):
        return {"type": "densify", "n": m.n, "base": to_dict(m.base), "target": to_dict(m.target)}
    raise TypeError(f"cannot serialize {type(m).__name__}")


def _need(d, key, path):
    if not isinstance(d, dict) or key not in d:
        raise SpecParseError(f"missing key {key!r}", path=path)
    return d[key]


def _parse_rat(v, path) -> Fraction:
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) for x in v)) or v[1] == 0:
        raise SpecParseError("expected a rational [num, den]", path=path)
    return Fraction(v[0], v[1])


def _parse_open_set(v, path) -> OpenSetSpec:
    if not isinstance(v, list):
        raise SpecParseError("an open set is a list of [a_num, a_den, b_num, b_den]", path=path)
    ivs = []
    for i, q in enumerate(v):
        p = f"{path}[{i}]"
        if not (isinstance(q, list) and len(q) == 4 and all(isinstance(x, int) for x in q)):
            raise SpecParseError("expected [a_num, a_den, b_num, b_den]", path=p)
        if q[1] == 0 or q[3] == 0:
            raise SpecParseError("zero denominator", path=p)
        ivs.append((Fraction(q[0], q[1]), Fraction(q[2], q[3])))
    try:
        return OpenSetSpec(tuple(ivs))
    except ValueError as exc:
        raise SpecParseError(str(exc), path=path) from None


def _parse_gdelta_obj(d, path="$") -> GDeltaSpec:
    levels = _need(d, "levels", path)
    if not isinstance(levels, list):
        raise SpecParseError("'levels' must be a list", path=f"{path}.levels")
    return GDeltaSpec(tuple(_parse_open_set(lv, f"{path}.levels[{j}]") for j, lv in enumerate(levels)))


def from_dict(d: dict, path: str = "$") -> MapDescriptor:
    kind = _need(d, "type", path)
    try:
        if kind == "maj":
            alph = d.get("alphabet", "binary")
            if alph not in ("binary", "pair"):
                raise SpecParseError("alphabet must be 'binary' or 'pair'", path=f"{path}.alphabet")
            return Maj(int(_need(d, "n", path)), PAIR if alph == "pair" else BINARY)
        if kind == "layered":
            s = _need(d, "schedule", path)
            sk = _need(s, "kind", f"{path}.schedule")
            if sk == "target":
                sched = TargetSchedule(_parse_rat(_need(s, "eps0", f"{path}.schedule"), f"{path}.schedule.eps0"))
            elif sk == "open_set":
                sched = OpenSetSchedule(
                    _parse_open_set(_need(s, "intervals", f"{path}.schedule"), f"{path}.schedule.intervals"),
                    _parse_rat(_need(s, "threshold", f"{path}.schedule"), f"{path}.schedule.threshold"),
                    s.get("threshold_source", "mean-field lower bound"),
                )
            else:
                raise SpecParseError(f"unknown schedule kind {sk!r}", path=f"{path}.schedule.kind")
            lay = d.get("layout")
            layout = None if lay is None else ELayout(int(_need(lay, "N", f"{path}.layout")), lay.get("growth"))
            return LayeredMaj(int(_need(d, "n", path)), sched, layout)
        if kind == "interleave":
            rows = _need(d, "rows", path)
            if not isinstance(rows, list):
                raise SpecParseError("'rows' must be a list", path=f"{path}.rows")
            return Interleave(tuple(from_dict(r, f"{path}.rows[{j}]") for j, r in enumerate(rows)))
        if kind == "gdelta":
            return GDelta(_parse_gdelta_obj(_need(d, "spec", path), f"{path}.spec"), int(d.get("rows", 8)))
        if kind == "densify":
            return Densify(
                from_dict(_need(d, "base", path), f"{path}.base"),
                from_dict(_need(d, "target", path), f"{path}.target"),
                int(_need(d, "n", path)),
            )
    except SpecParseError:
        raise
    except (ValueError, TypeError) as exc:
        raise SpecParseError(str(exc), path=path) from None
    raise SpecParseError(f"unknown node type {kind!r}", path=f"{path}.type")


def _json_loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(exc.msg, line=exc.lineno, column=exc.colno) from None


def dumps(m: MapDescriptor, indent: int | None = 2) -> str:
    return json.dumps({"schema": SCHEMA_VERSION, "map": to_dict(m)}, indent=indent)


def loads(text: str) -> MapDescriptor:
    obj = _json_loads(text)
    if isinstance(obj, dict) and "map" in obj:
        return from_dict(obj["map"], "$.map")
    return from_dict(obj)


def save(m: MapDescriptor, path) -> None:
    Path(path).write_text(dumps(m) + "\n")


def load(path) -> MapDescriptor:
    return loads(Path(path).read_text())


def parse_gdelta(text: str) -> GDeltaSpec:
    return _parse_gdelta_obj(_json_loads(text))


def load_gdelta(path) -> GDeltaSpec:
    return parse_gdelta(Path(path).read_text())
