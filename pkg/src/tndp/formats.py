"""Reading and writing network, trips and project files.

Native network file::

    <NUMBER OF NODES> 24
    <NUMBER OF LINKS> 76
    <END OF METADATA>
    ~ tail head alpha beta
    1 2 6.0 3.5e-17

Native trips file: one ``origin destination demand`` row per line.  Lines
starting with ``~`` or ``#`` are comments, a trailing ``;`` is ignored, and
``<KEY> value`` metadata lines are optional.

Published TNTP files are also accepted.  Link rows in the BPR layout
(``init term capacity length fft b power ...``) are converted with
``alpha = fft`` and ``beta = fft * b / capacity**4``; TNTP ``Origin`` blocks
are read as trips.
"""
from __future__ import annotations

import os
import re

from .errors import ParseError, ValidationError
from .network import (
    Arc,
    Network,
    ODPair,
    Project,
    ProjectKind,
    ProjectSet,
    check_connectivity,
)

_META = re.compile(r"^<([^>]+)>\s*(.*)$")


def _rows(path):
    """Yield (line_no, fields) for data lines, plus a dict of metadata."""
    meta = {}
    rows = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(exc), path) from exc
    with fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line[0] in "~#":
                continue
            m = _META.match(line)
            if m:
                meta[m.group(1).strip().upper()] = m.group(2).strip()
                continue
            line = line.rstrip(";").strip()
            if line:
                rows.append((line_no, line))
    return rows, meta


def _num(text, path, line_no, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ParseError(f"expected a number, got {text!r}", path, line_no) from None


def _node(text, path, line_no):
    value = _num(text, path, line_no)
    if value != int(value):
        raise ParseError(f"node id must be an integer, got {text!r}", path, line_no)
    return int(value)


def bpr_to_quartic(free_flow_time, capacity, b, power=4.0):
    """Map a BPR link ``t0 * (1 + b (x/cap)^power)`` onto ``alpha + beta x^4``."""
    if power != 4:
        raise ValidationError(f"only quartic links are supported, got power {power}")
    if not capacity > 0:
        raise ValidationError(f"capacity must be positive, got {capacity}")
    return float(free_flow_time), float(free_flow_time) * float(b) / float(capacity) ** 4


def read_arcs(path) -> tuple:
    """Parse a link file in either native or BPR layout.  Returns (arcs, metadata)."""
    rows, meta = _rows(path)
    arcs = []
    for k, (line_no, line) in enumerate(rows, start=1):
        parts = line.split()
        if len(parts) == 4:
            tail, head = _node(parts[0], path, line_no), _node(parts[1], path, line_no)
            alpha = _num(parts[2], path, line_no)
            beta = _num(parts[3], path, line_no)
        elif len(parts) >= 7:
            tail, head = _node(parts[0], path, line_no), _node(parts[1], path, line_no)
            cap, _length, fft, b, power = (_num(p, path, line_no) for p in parts[2:7])
            try:
                alpha, beta = bpr_to_quartic(fft, cap, b, power)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{line_no}: {exc}") from None
        else:
            raise ParseError(
                f"expected 4 fields (tail head alpha beta) or a BPR row, got {len(parts)}",
                path,
                line_no,
            )
        try:
            arcs.append(Arc(k, tail, head, alpha, beta))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line_no}: {exc}") from None
    declared = meta.get("NUMBER OF LINKS")
    if declared is not None and int(float(declared)) != len(arcs):
        raise ValidationError(f"{path}: header declares {declared} links, found {len(arcs)}")
    return arcs, meta


def read_trips(path) -> list:
    """Parse native ``o d q`` rows or TNTP ``Origin`` blocks into OD pairs."""
    rows, _meta = _rows(path)
    pairs = {}
    origin = None
    tntp = any(line.lower().startswith("origin") for _, line in rows)
    for line_no, line in rows:
        if tntp:
            if line.lower().startswith("origin"):
                parts = line.split()
                if len(parts) != 2:
                    raise ParseError("malformed Origin line", path, line_no)
                origin = _node(parts[1], path, line_no)
                continue
            if origin is None:
                raise ParseError("destination entries before any Origin line", path, line_no)
            for entry in line.split(";"):
                entry = entry.strip()
                if not entry:
                    continue
                if ":" not in entry:
                    raise ParseError(f"malformed entry {entry!r}", path, line_no)
                d, q = entry.split(":", 1)
                dest = _node(d.strip(), path, line_no)
                demand = _num(q.strip(), path, line_no)
                _add_pair(pairs, origin, dest, demand, path, line_no)
        else:
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(
                    f"expected 3 fields (origin destination demand), got {len(parts)}",
                    path,
                    line_no,
                )
            o, d = _node(parts[0], path, line_no), _node(parts[1], path, line_no)
            _add_pair(pairs, o, d, _num(parts[2], path, line_no), path, line_no)
    return [ODPair(o, d, q) for (o, d), q in pairs.items()]


def _add_pair(pairs, o, d, demand, path, line_no):
    if demand < 0:
        raise ValidationError(f"{path}:{line_no}: negative demand {demand}")
    if o == d:
        if demand != 0:
            raise ValidationError(f"{path}:{line_no}: intrazonal demand {o}->{d}")
        return
    if demand == 0:
        return
    pairs[(o, d)] = pairs.get((o, d), 0.0) + demand


def load_network(path, trips_path=None) -> Network:
    arcs, meta = read_arcs(path)
    od_pairs = read_trips(trips_path) if trips_path is not None else []
    try:
        net = Network.from_arcs(arcs, od_pairs)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    declared = meta.get("NUMBER OF NODES")
    if declared is not None and int(float(declared)) != len(net.nodes):
        raise ValidationError(
            f"{path}: header declares {declared} nodes, found {len(net.nodes)}"
        )
    check_connectivity(net)
    return net


def load_projects(path, budget, network: Network) -> ProjectSet:
    """Project file: ``project_id kind cost arc_count`` then one row per arc.

    Arc rows are ``tail head alpha beta``, or ``arc_id tail head alpha beta`` to
    give explicit ids.  Implicit ids continue after the largest base arc id.
    """
    rows, _meta = _rows(path)
    base_ids = {a.id for a in network.arcs}
    known_nodes = set(network.nodes)
    next_id = max(base_ids, default=0) + 1
    projects = []
    k = 0
    while k < len(rows):
        line_no, line = rows[k]
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(
                f"expected project header (id kind cost arc_count), got {len(parts)} fields",
                path,
                line_no,
            )
        pid = _num(parts[0], path, line_no, int)
        try:
            kind = ProjectKind.parse(parts[1])
        except ValueError as exc:
            raise ParseError(str(exc), path, line_no) from None
        cost = _num(parts[2], path, line_no)
        count = _num(parts[3], path, line_no, int)
        if count < 1:
            raise ValidationError(f"{path}:{line_no}: project {pid} lists no arcs")
        if k + count >= len(rows):
            raise ParseError(f"project {pid} declares {count} arcs but the file ends", path, line_no)
        arcs = []
        for arc_line_no, arc_line in rows[k + 1 : k + 1 + count]:
            fields = arc_line.split()
            if len(fields) == 4:
                arc_id = next_id
                next_id += 1
            elif len(fields) == 5:
                arc_id = _num(fields[0], path, arc_line_no, int)
                fields = fields[1:]
            else:
                raise ParseError(
                    f"expected arc row (tail head alpha beta), got {len(fields)} fields",
                    path,
                    arc_line_no,
                )
            if arc_id in base_ids:
                raise ValidationError(
                    f"{path}:{arc_line_no}: project arc id {arc_id} duplicates a base arc"
                )
            tail, head = _node(fields[0], path, arc_line_no), _node(fields[1], path, arc_line_no)
            for node in (tail, head):
                if node not in known_nodes:
                    raise ValidationError(f"{path}:{arc_line_no}: unknown node {node}")
            try:
                arcs.append(
                    Arc(arc_id, tail, head, _num(fields[2], path, arc_line_no),
                        _num(fields[3], path, arc_line_no))
                )
            except ValidationError as exc:
                raise ValidationError(f"{path}:{arc_line_no}: {exc}") from None
        try:
            projects.append(Project(pid, kind, arcs, cost))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line_no}: {exc}") from None
        k += 1 + count
    return ProjectSet(projects, float(budget))


def write_network(net: Network, path, comment=None):
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"~ {line}\n")
        fh.write(f"<NUMBER OF NODES> {len(net.nodes)}\n")
        fh.write(f"<NUMBER OF LINKS> {net.n_arcs}\n")
        fh.write("<END OF METADATA>\n")
        fh.write("~ tail head alpha beta\n")
        for arc in net.arcs:
            fh.write(f"{arc.tail} {arc.head} {arc.alpha!r} {arc.beta!r}\n")


def write_trips(net: Network, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("~ origin destination demand\n")
        for od in sorted(net.od_pairs, key=lambda p: (p.origin, p.destination)):
            fh.write(f"{od.origin} {od.destination} {od.demand!r}\n")


def write_projects(ps: ProjectSet, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("~ project_id kind cost arc_count, then: arc_id tail head alpha beta\n")
        for p in ps.projects:
            fh.write(f"{p.id} {p.kind.value} {p.cost!r} {len(p.arcs)}\n")
            for a in p.arcs:
                fh.write(f"{a.id} {a.tail} {a.head} {a.alpha!r} {a.beta!r}\n")


def bundled_path(name: str) -> str:
    """Absolute path of a file in the bundled Sioux Falls data directory."""
    return os.path.join(os.path.dirname(__file__), "data", "sioux_falls", name)
