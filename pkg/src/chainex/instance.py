"""Asset exchange instances: data model, validation, generation and file formats.

Participants are numbered ``1..n``. Assets are string identifiers and are
always handled in ascending order. All send/receive/node bounds are exact
non-negative integers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import GenerationError, InputError, ParseError

FORMAT_VERSION = 1

SendKey = tuple[int, str]
LinkKey = tuple[int, int, str]


@dataclass(frozen=True)
class Bounds:
    lower: int = 0
    upper: int = 0


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    witness: tuple = ()


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]


@dataclass(frozen=True, eq=True)
class Instance:
    """An immutable exchange instance.

    ``node_cap`` entries missing at construction are filled with the largest
    value compatible with the per-asset bounds, ``min(sum recv U, sum send U)``.
    """

    node_count: int
    assets: tuple[str, ...]
    neighbors: Mapping[int, frozenset[int]]
    send_spec: Mapping[SendKey, Bounds]
    recv_spec: Mapping[SendKey, Bounds]
    node_cap: Mapping[int, Bounds] = field(default_factory=dict)
    recv_value: Mapping[SendKey, float] = field(default_factory=dict)
    priority: Mapping[int, float] = field(default_factory=dict)
    multiplier: Mapping[LinkKey, float] = field(default_factory=dict)

    def __post_init__(self):
        setattr_ = object.__setattr__
        setattr_(self, "assets", tuple(sorted(set(self.assets))))
        nbrs = {i: frozenset() for i in range(1, self.node_count + 1)}
        for i, js in self.neighbors.items():
            nbrs[i] = frozenset(js)
        setattr_(self, "neighbors", nbrs)
        setattr_(self, "send_spec", dict(self.send_spec))
        setattr_(self, "recv_spec", dict(self.recv_spec))
        caps = dict(self.node_cap)
        for i in range(1, self.node_count + 1):
            if i not in caps:
                r = sum(b.upper for (k, _), b in self.recv_spec.items() if k == i)
                s = sum(b.upper for (k, _), b in self.send_spec.items() if k == i)
                caps[i] = Bounds(0, min(r, s))
        setattr_(self, "node_cap", caps)
        setattr_(self, "recv_value", {k: float(v) for k, v in self.recv_value.items()})
        setattr_(self, "priority", {k: float(v) for k, v in self.priority.items()})
        setattr_(self, "multiplier", {k: float(v) for k, v in self.multiplier.items()})

    @property
    def nodes(self) -> range:
        return range(1, self.node_count + 1)

    @cached_property
    def send_sets(self) -> dict[int, tuple[str, ...]]:
        out: dict[int, list[str]] = {i: [] for i in self.nodes}
        for i, a in self.send_spec:
            out.setdefault(i, []).append(a)
        return {i: tuple(sorted(v)) for i, v in out.items()}

    @cached_property
    def recv_sets(self) -> dict[int, tuple[str, ...]]:
        out: dict[int, list[str]] = {i: [] for i in self.nodes}
        for i, a in self.recv_spec:
            out.setdefault(i, []).append(a)
        return {i: tuple(sorted(v)) for i, v in out.items()}

    def rate(self, i: int, j: int, asset: str) -> float:
        return self.multiplier.get((i, j, asset), 1.0)

    def value(self, i: int, asset: str) -> float:
        return self.recv_value.get((i, asset), 1.0)

    def has_lower_bounds(self) -> bool:
        return any(
            b.lower > 0
            for spec in (self.send_spec, self.recv_spec, self.node_cap)
            for b in spec.values()
        )

    def __hash__(self):  # pragma: no cover - instances are compared, not hashed
        return hash(serialize_instance(self))


def admissible(instance: Instance, i: int, j: int, asset: str) -> bool:
    """True iff ``asset`` may move from ``i`` to its neighbour ``j``."""
    n = instance.node_count
    for k in (i, j):
        if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
            raise InputError(f"unknown node {k!r}")
    if asset not in instance.assets:
        raise InputError(f"unknown asset {asset!r}")
    return (
        j in instance.neighbors[i]
        and (i, asset) in instance.send_spec
        and (j, asset) in instance.recv_spec
    )


def admissible_links(instance: Instance) -> list[LinkKey]:
    """All admissible ``(sender, receiver, asset)`` triples, sorted."""
    out = []
    for i in instance.nodes:
        for a in instance.send_sets[i]:
            for j in sorted(instance.neighbors[i]):
                if (j, a) in instance.recv_spec:
                    out.append((i, j, a))
    return out


def validate(instance: Instance) -> ValidationResult:
    v: list[Violation] = []
    n = instance.node_count
    assets = set(instance.assets)

    def add(code, msg, *witness):
        v.append(Violation(code, msg, tuple(witness)))

    if n < 1:
        add("node_count", "node_count must be at least 1", n)
    valid_ids = set(range(1, n + 1))

    for i in sorted(instance.neighbors):
        if i not in valid_ids:
            add("node_id", f"unknown node {i} in neighbor table", i)
            continue
        for j in sorted(instance.neighbors[i]):
            if j == i:
                add("self_neighbor", f"node {i} lists itself as a neighbor", i)
            elif j not in valid_ids:
                add("node_id", f"unknown neighbor {j} of node {i}", i, j)
            elif i not in instance.neighbors.get(j, ()):
                add("asymmetric", f"neighbor asymmetry: {j} in N_{i} but {i} not in N_{j}", i, j)

    for side, spec in (("send", instance.send_spec), ("recv", instance.recv_spec)):
        for (i, a), b in sorted(spec.items()):
            if i not in valid_ids:
                add("node_id", f"unknown node {i} in {side} spec", i, a)
            if a not in assets:
                add("asset_id", f"unknown asset {a} in {side} spec of node {i}", i, a)
            _check_bounds(add, b, f"{side} bounds at node {i}, asset {a}", i, a)

    for (i, a) in sorted(set(instance.send_spec) & set(instance.recv_spec)):
        add("overlap", f"send/receive overlap at node {i}, asset {a}", i, a)

    for i, b in sorted(instance.node_cap.items()):
        if i not in valid_ids:
            add("node_id", f"unknown node {i} in node caps", i)
            continue
        _check_bounds(add, b, f"node cap bounds at node {i}", i)
        r = sum(instance.recv_spec[i, a].upper for a in instance.recv_sets.get(i, ()))
        s = sum(instance.send_spec[i, a].upper for a in instance.send_sets.get(i, ()))
        if b.upper > r:
            add("cap_recv", f"node cap exceeds receive capacity at node {i}", i, b.upper, r)
        if b.upper > s:
            add("cap_send", f"node cap exceeds send capacity at node {i}", i, b.upper, s)

    for (i, a), p in sorted(instance.recv_value.items()):
        if (i, a) not in instance.recv_spec:
            add("value_key", f"receive value for node {i}, asset {a} outside R_{i}", i, a)
        if not p > 0:
            add("value", f"receive value must be positive at node {i}, asset {a}", i, a)

    for i in sorted(instance.priority):
        if i not in valid_ids:
            add("node_id", f"unknown node {i} in priorities", i)

    for (i, j, a), rate in sorted(instance.multiplier.items()):
        if not (
            i in valid_ids and j in valid_ids and j in instance.neighbors.get(i, ())
            and (i, a) in instance.send_spec and (j, a) in instance.recv_spec
        ):
            add("multiplier_key", f"multiplier on inadmissible link {i}->{j} asset {a}", i, j, a)
        if not rate > 0:
            add("multiplier", f"multiplier must be positive on link {i}->{j} asset {a}", i, j, a)

    return ValidationResult(tuple(v))


def _check_bounds(add, b: Bounds, what: str, *witness):
    if b.lower < 0 or b.upper < 0:
        add("negative", f"negative {what}", *witness)
    if b.lower > b.upper:
        add("bounds_order", f"lower exceeds upper in {what}", *witness)


# --------------------------------------------------------------------------
# random generation


@dataclass(frozen=True)
class GeneratorParams:
    node_count: int
    asset_count: int
    edge_density: float = 1.0
    assets_per_side: tuple[int, int] = (1, 2)
    send_range: tuple[int, int] = (1, 5)
    recv_range: tuple[int, int] = (1, 5)
    node_cap_range: tuple[int, int] = (1, 10)
    lower_bound_probability: float = 0.0
    value_range: tuple[float, float] | None = None
    seed: int = 0

    def check(self) -> None:
        if self.node_count < 1:
            raise GenerationError("nodes must be ≥ 1")
        if self.asset_count < 1:
            raise GenerationError("assets must be ≥ 1")
        if not 0 < self.edge_density <= 1:
            raise GenerationError("density must lie in (0, 1]")
        for name in ("assets_per_side", "send_range", "recv_range", "node_cap_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise GenerationError(f"{name} must be a non-empty non-negative range")
        if not 0 <= self.lower_bound_probability <= 1:
            raise GenerationError("lower_bound_probability must lie in [0, 1]")
        if self.value_range is not None and not 0 < self.value_range[0] <= self.value_range[1]:
            raise GenerationError("value_range must be a positive range")
        lo = self.assets_per_side[0]
        if lo >= 1 and self.asset_count < 2:
            raise GenerationError("need at least 2 assets when both sides are non-empty")
        if 2 * lo > self.asset_count:
            raise GenerationError(
                f"{self.asset_count} assets cannot hold disjoint send/receive sets of size {lo}"
            )


def asset_names(count: int) -> list[str]:
    width = len(str(count))
    return [f"a{k:0{width}d}" for k in range(1, count + 1)]


def generate_random(params: GeneratorParams) -> Instance:
    params.check()
    rng = np.random.default_rng(params.seed)
    n, m = params.node_count, params.asset_count
    names = asset_names(m)

    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < params.edge_density
    nbrs: dict[int, set[int]] = {i: set() for i in range(1, n + 1)}
    for a, b in zip(iu[keep].tolist(), ju[keep].tolist()):
        nbrs[a + 1].add(b + 1)
        nbrs[b + 1].add(a + 1)

    lo, hi = params.assets_per_side
    send, recv, caps, values = {}, {}, {}, {}
    for i in range(1, n + 1):
        perm = rng.permutation(m)
        ns = int(rng.integers(lo, min(hi, m - lo) + 1))
        nr = int(rng.integers(lo, min(hi, m - ns) + 1))
        for k in sorted(perm[:ns].tolist()):
            send[i, names[k]] = _draw_bounds(rng, params.send_range, params.lower_bound_probability)
        for k in sorted(perm[ns:ns + nr].tolist()):
            recv[i, names[k]] = _draw_bounds(rng, params.recv_range, params.lower_bound_probability)
            if params.value_range is not None:
                v = rng.uniform(*params.value_range)
                values[i, names[k]] = round(float(v), 3)
        r = sum(b.upper for (k, _), b in recv.items() if k == i)
        s = sum(b.upper for (k, _), b in send.items() if k == i)
        u = min(int(rng.integers(params.node_cap_range[0], params.node_cap_range[1] + 1)), r, s)
        caps[i] = Bounds(0, u)

    return Instance(
        node_count=n,
        assets=tuple(names),
        neighbors=nbrs,
        send_spec=send,
        recv_spec=recv,
        node_cap=caps,
        recv_value=values,
    )


def _draw_bounds(rng, rng_range, p_lower):
    upper = int(rng.integers(rng_range[0], rng_range[1] + 1))
    lower = 0
    if p_lower > 0 and rng.random() < p_lower:
        lower = int(rng.integers(0, upper + 1))
    return Bounds(lower, upper)


# --------------------------------------------------------------------------
# serialization


def _num(x):
    """Emit integral floats as ints so equal values serialize identically."""
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


def instance_to_dict(instance: Instance) -> dict:
    return {
        "version": FORMAT_VERSION,
        "node_count": instance.node_count,
        "assets": list(instance.assets),
        "neighbors": [sorted(instance.neighbors[i]) for i in instance.nodes],
        "send": [
            {"node": i, "asset": a, "lower": b.lower, "upper": b.upper}
            for (i, a), b in sorted(instance.send_spec.items())
        ],
        "recv": [
            {"node": i, "asset": a, "lower": b.lower, "upper": b.upper}
            for (i, a), b in sorted(instance.recv_spec.items())
        ],
        "node_caps": [
            {"node": i, "lower": b.lower, "upper": b.upper}
            for i, b in sorted(instance.node_cap.items())
        ],
        "recv_values": [
            {"node": i, "asset": a, "value": v} for (i, a), v in sorted(instance.recv_value.items())
        ],
        "priorities": [{"node": i, "priority": p} for i, p in sorted(instance.priority.items())],
        "multipliers": [
            {"from": i, "to": j, "asset": a, "rate": r}
            for (i, j, a), r in sorted(instance.multiplier.items())
        ],
    }


def serialize_instance(instance: Instance, format: str = "json") -> str:
    if format == "json":
        return json.dumps(instance_to_dict(instance), indent=2, sort_keys=True) + "\n"
    if format == "text":
        return _to_text(instance)
    raise InputError(f"unknown format {format!r}")


def parse_instance(text: str, format: str = "json") -> Instance:
    if format == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
        return instance_from_dict(data)
    if format == "text":
        return _from_text(text)
    raise InputError(f"unknown format {format!r}")


def guess_format(path: str) -> str:
    return "json" if str(path).lower().endswith(".json") else "text"


def read_instance(path, format: str | None = None) -> Instance:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_instance(text, format or guess_format(path))


def write_instance(instance: Instance, path, format: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_instance(instance, format or guess_format(path)))


_TOP_KEYS = {
    "version", "node_count", "assets", "neighbors", "send", "recv",
    "node_caps", "recv_values", "priorities", "multipliers",
}
_RECORD_KEYS = {
    "send": {"node", "asset", "lower", "upper"},
    "recv": {"node", "asset", "lower", "upper"},
    "node_caps": {"node", "lower", "upper"},
    "recv_values": {"node", "asset", "value"},
    "priorities": {"node", "priority"},
    "multipliers": {"from", "to", "asset", "rate"},
}


def _int(x, what):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"{what} must be an integer, got {x!r}")
    return x


def _unit(x, what):
    _int(x, what)
    if x < 0:
        raise ParseError(f"negative bound in {what}")
    return x


def _real(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{what} must be a number, got {x!r}")
    return float(x)


def _asset(x, what):
    if not isinstance(x, str) or not x:
        raise ParseError(f"{what} must be a non-empty string, got {x!r}")
    return x


def instance_from_dict(data) -> Instance:
    if not isinstance(data, dict):
        raise ParseError("instance must be a JSON object")
    if "node_count" not in data:
        raise ParseError("missing node_count")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ParseError(f"unknown field {unknown[0]!r}")
    version = data.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported version {version!r}")
    n = _int(data["node_count"], "node_count")
    if "assets" not in data:
        raise ParseError("missing assets")
    assets = data["assets"]
    if not isinstance(assets, list):
        raise ParseError("assets must be a list")
    assets = [_asset(a, "asset") for a in assets]

    neighbors = {}
    adj = data.get("neighbors", [])
    if not isinstance(adj, list):
        raise ParseError("neighbors must be an adjacency list")
    for idx, row in enumerate(adj, start=1):
        if not isinstance(row, list):
            raise ParseError(f"neighbors of node {idx} must be a list")
        neighbors[idx] = frozenset(_int(j, "neighbor id") for j in row)

    def records(key):
        rows = data.get(key, [])
        if not isinstance(rows, list):
            raise ParseError(f"{key} must be a list")
        for k, row in enumerate(rows):
            if not isinstance(row, dict):
                raise ParseError(f"{key}[{k}] must be an object")
            extra = sorted(set(row) - _RECORD_KEYS[key])
            if extra:
                raise ParseError(f"unknown field {extra[0]!r} in {key}[{k}]")
            missing = sorted(_RECORD_KEYS[key] - set(row))
            if missing:
                raise ParseError(f"missing {missing[0]} in {key}[{k}]")
            yield k, row

    def put(table, key, value, what):
        if key in table:
            raise ParseError(f"duplicate {what} entry {key}")
        table[key] = value

    send, recv, caps, values, prios, mults = {}, {}, {}, {}, {}, {}
    for name, table in (("send", send), ("recv", recv)):
        for k, r in records(name):
            key = (_int(r["node"], "node"), _asset(r["asset"], "asset"))
            b = Bounds(_unit(r["lower"], f"{name}[{k}].lower"), _unit(r["upper"], f"{name}[{k}].upper"))
            put(table, key, b, name)
    for k, r in records("node_caps"):
        b = Bounds(_unit(r["lower"], f"node_caps[{k}].lower"), _unit(r["upper"], f"node_caps[{k}].upper"))
        put(caps, _int(r["node"], "node"), b, "node_caps")
    for k, r in records("recv_values"):
        key = (_int(r["node"], "node"), _asset(r["asset"], "asset"))
        put(values, key, _real(r["value"], "value"), "recv_values")
    for k, r in records("priorities"):
        put(prios, _int(r["node"], "node"), _real(r["priority"], "priority"), "priorities")
    for k, r in records("multipliers"):
        key = (_int(r["from"], "from"), _int(r["to"], "to"), _asset(r["asset"], "asset"))
        put(mults, key, _real(r["rate"], "rate"), "multipliers")

    return Instance(n, tuple(assets), neighbors, send, recv, caps, values, prios, mults)


def _fmt(x) -> str:
    x = _num(x)
    return repr(x) if isinstance(x, float) else str(x)


def _to_text(instance: Instance) -> str:
    d = instance_to_dict(instance)
    lines = [f"version {d['version']}", f"nodes {d['node_count']}"]
    lines.append("assets " + " ".join(d["assets"]) if d["assets"] else "assets")
    for i, row in enumerate(d["neighbors"], start=1):
        lines.append(" ".join(["neighbors", str(i), *map(str, row)]))
    for key, word in (("send", "send"), ("recv", "recv")):
        for r in d[key]:
            lines.append(f"{word} {r['node']} {r['asset']} {r['lower']} {r['upper']}")
    for r in d["node_caps"]:
        lines.append(f"cap {r['node']} {r['lower']} {r['upper']}")
    for r in d["recv_values"]:
        lines.append(f"value {r['node']} {r['asset']} {_fmt(r['value'])}")
    for r in d["priorities"]:
        lines.append(f"priority {r['node']} {_fmt(r['priority'])}")
    for r in d["multipliers"]:
        lines.append(f"multiplier {r['from']} {r['to']} {r['asset']} {_fmt(r['rate'])}")
    return "\n".join(lines) + "\n"


_TEXT_ARITY = {
    "version": 1, "nodes": 1, "send": 4, "recv": 4, "cap": 3,
    "value": 3, "priority": 2, "multiplier": 4,
}


def _from_text(text: str) -> Instance:
    data: dict = {"assets": [], "neighbors": {}, "send": [], "recv": [], "node_caps": [],
                  "recv_values": [], "priorities": [], "multipliers": []}
    seen_assets = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, *args = line.split()

        def err(msg):
            return ParseError(msg, lineno, raw.index(word) + 1)

        def as_int(tok):
            try:
                return int(tok)
            except ValueError:
                raise err(f"expected integer, got {tok!r}") from None

        def as_unit(tok):
            x = as_int(tok)
            if x < 0:
                raise err("negative bound")
            return x

        def as_real(tok):
            try:
                return float(tok)
            except ValueError:
                raise err(f"expected number, got {tok!r}") from None

        if word in _TEXT_ARITY and len(args) != _TEXT_ARITY[word]:
            raise err(f"'{word}' takes {_TEXT_ARITY[word]} fields, got {len(args)}")
        if word == "version":
            data["version"] = as_int(args[0])
        elif word == "nodes":
            data["node_count"] = as_int(args[0])
        elif word == "assets":
            if seen_assets:
                raise err("duplicate assets line")
            seen_assets = True
            data["assets"] = args
        elif word == "neighbors":
            if not args:
                raise err("'neighbors' needs a node id")
            i = as_int(args[0])
            if i in data["neighbors"]:
                raise err(f"duplicate neighbors line for node {i}")
            data["neighbors"][i] = [as_int(t) for t in args[1:]]
        elif word in ("send", "recv"):
            data[word].append({"node": as_int(args[0]), "asset": args[1],
                               "lower": as_unit(args[2]), "upper": as_unit(args[3])})
        elif word == "cap":
            data["node_caps"].append({"node": as_int(args[0]), "lower": as_unit(args[1]),
                                      "upper": as_unit(args[2])})
        elif word == "value":
            data["recv_values"].append({"node": as_int(args[0]), "asset": args[1],
                                        "value": as_real(args[2])})
        elif word == "priority":
            data["priorities"].append({"node": as_int(args[0]), "priority": as_real(args[1])})
        elif word == "multiplier":
            data["multipliers"].append({"from": as_int(args[0]), "to": as_int(args[1]),
                                        "asset": args[2], "rate": as_real(args[3])})
        else:
            raise err(f"unknown field {word!r}")

    if "node_count" not in data:
        raise ParseError("missing node_count")
    n = data["node_count"]
    extra = sorted(i for i in data["neighbors"] if not 1 <= i <= n)
    if extra:
        raise ParseError(f"neighbors line for unknown node {extra[0]}")
    data["neighbors"] = [data["neighbors"].get(i, []) for i in range(1, n + 1)]
    return instance_from_dict(data)


def make_instance(
    node_count: int,
    edges: Iterable[tuple[int, int]],
    send: Mapping[SendKey, int | tuple[int, int]],
    recv: Mapping[SendKey, int | tuple[int, int]],
    node_cap: Mapping[int, int | tuple[int, int]] | None = None,
    **extra,
) -> Instance:
    """Convenience constructor: bounds given as ``upper`` or ``(lower, upper)``,
    neighbor relation given as undirected edges."""

    def b(x):
        return Bounds(*x) if isinstance(x, tuple) else Bounds(0, x)

    nbrs: dict[int, set[int]] = {i: set() for i in range(1, node_count + 1)}
    for i, j in edges:
        nbrs[i].add(j)
        nbrs[j].add(i)
    assets = {a for _, a in send} | {a for _, a in recv}
    return Instance(
        node_count=node_count,
        assets=tuple(assets),
        neighbors=nbrs,
        send_spec={k: b(v) for k, v in send.items()},
        recv_spec={k: b(v) for k, v in recv.items()},
        node_cap={k: b(v) for k, v in (node_cap or {}).items()},
        **extra,
    )
