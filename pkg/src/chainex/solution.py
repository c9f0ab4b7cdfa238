"""Exchange cycles, solutions and their JSON form."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .errors import ParseError
from .instance import FORMAT_VERSION, Instance, _num

LinkKey = tuple[int, int, str]


@dataclass(frozen=True)
class Link:
    sender: int
    receiver: int
    asset: str
    qty: float
    rate: float = 1.0

    @property
    def received(self) -> float:
        return self.qty * self.rate

    @property
    def key(self) -> LinkKey:
        return (self.sender, self.receiver, self.asset)


@dataclass(frozen=True)
class ExchangeCycle:
    root: int
    links: tuple[Link, ...]
    delta: float
    gain: float = 1.0
    phase: int = 1

    @property
    def participants(self) -> list[int]:
        return [lk.sender for lk in self.links]

    def is_closed(self) -> bool:
        if not self.links or self.links[0].sender != self.root:
            return False
        L = len(self.links)
        return all(self.links[t].receiver == self.links[(t + 1) % L].sender for t in range(L))

    def render(self) -> str:
        parts = [str(self.root)]
        for lk in self.links:
            parts.append(f"–{lk.asset}→ {lk.receiver}")
        text = " ".join(parts) + f" (Δ={_fmt(self.delta)})"
        if self.gain != 1.0:
            text += f" [gain {self.gain:.6g}]"
        return text


@dataclass(frozen=True)
class LowerBoundStatus:
    node: int
    asset: Optional[str]
    side: str  # "recv", "send" or "node"
    lower: int
    flow: float

    @property
    def met(self) -> bool:
        return self.flow >= self.lower - 1e-9

    def render(self) -> str:
        what = f"node {self.node}" + (f" asset {self.asset}" if self.asset else "")
        if self.side != "recv":
            what += f" ({self.side})"
        state = "met" if self.met else "unmet"
        return f"{what}: {state} ({_fmt(self.flow)}/{self.lower})"


@dataclass(frozen=True)
class Solution:
    cycles: tuple[ExchangeCycle, ...] = ()
    aggregate: dict[LinkKey, float] = field(default_factory=dict)
    objective_units: float = 0
    objective_weighted: float = 0
    lb_report: tuple[LowerBoundStatus, ...] = ()
    stats: dict[str, int] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def generalized(self) -> bool:
        return bool(self.config.get("generalized", False))


def _fmt(x) -> str:
    x = _num(float(x))
    return str(x) if isinstance(x, int) else f"{x:.6g}"


def aggregate_links(cycles) -> dict[LinkKey, float]:
    agg: dict[LinkKey, float] = defaultdict(float)
    for c in cycles:
        for lk in c.links:
            agg[lk.key] += lk.qty
    return {k: _num(v) for k, v in sorted(agg.items())}


def lower_bound_report(instance: Instance, cycles) -> tuple[LowerBoundStatus, ...]:
    recv: dict = defaultdict(float)
    send: dict = defaultdict(float)
    node: dict = defaultdict(float)
    for c in cycles:
        for lk in c.links:
            recv[lk.receiver, lk.asset] += lk.received
            send[lk.sender, lk.asset] += lk.qty
            node[lk.receiver] += lk.received
    out = []
    for (i, a), b in sorted(instance.recv_spec.items()):
        if b.lower > 0:
            out.append(LowerBoundStatus(i, a, "recv", b.lower, _num(recv[i, a])))
    for (i, a), b in sorted(instance.send_spec.items()):
        if b.lower > 0:
            out.append(LowerBoundStatus(i, a, "send", b.lower, _num(send[i, a])))
    for i, b in sorted(instance.node_cap.items()):
        if b.lower > 0:
            out.append(LowerBoundStatus(i, None, "node", b.lower, _num(node[i])))
    return tuple(out)


def build_solution(instance: Instance, cycles, stats=None, config=None) -> Solution:
    cycles = tuple(cycles)
    units = sum(lk.qty for c in cycles for lk in c.links)
    weighted = sum(instance.value(lk.receiver, lk.asset) * lk.received
                   for c in cycles for lk in c.links)
    return Solution(
        cycles=cycles,
        aggregate=aggregate_links(cycles),
        objective_units=_num(float(units)),
        objective_weighted=_num(float(weighted)),
        lb_report=lower_bound_report(instance, cycles),
        stats=dict(stats or {}),
        config=dict(config or {}),
    )


# --------------------------------------------------------------------------
# JSON


def solution_to_dict(sol: Solution, include_config: bool = True) -> dict:
    d = {
        "version": FORMAT_VERSION,
        "cycles": [
            {
                "root": c.root,
                "delta": _num(c.delta),
                "gain": _num(c.gain),
                "phase": c.phase,
                "links": [_link_dict(lk) for lk in c.links],
            }
            for c in sol.cycles
        ],
        "aggregate": [
            {"from": i, "to": j, "asset": a, "qty": _num(q)}
            for (i, j, a), q in sorted(sol.aggregate.items())
        ],
        "objectives": {
            "units": _num(sol.objective_units),
            "weighted": _num(sol.objective_weighted),
            "value_basis": "receiver",
        },
        "lb_report": [
            {"node": s.node, "asset": s.asset, "side": s.side, "lower": s.lower,
             "flow": _num(s.flow), "met": s.met}
            for s in sol.lb_report
        ],
        "stats": dict(sorted(sol.stats.items())),
    }
    if include_config:
        d["config"] = sol.config
    return d


def _link_dict(lk: Link) -> dict:
    d = {"from": lk.sender, "to": lk.receiver, "asset": lk.asset, "qty": _num(lk.qty)}
    if lk.rate != 1.0:
        d["rate"] = lk.rate
    return d


def serialize_solution(sol: Solution, include_config: bool = True) -> str:
    return json.dumps(solution_to_dict(sol, include_config), indent=2, sort_keys=True,
                      ensure_ascii=False) + "\n"


def parse_solution(text: str) -> Solution:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    try:
        cycles = tuple(
            ExchangeCycle(
                root=int(c["root"]),
                links=tuple(
                    Link(int(lk["from"]), int(lk["to"]), str(lk["asset"]), lk["qty"],
                         float(lk.get("rate", 1.0)))
                    for lk in c["links"]
                ),
                delta=c["delta"],
                gain=float(c.get("gain", 1.0)),
                phase=int(c.get("phase", 1)),
            )
            for c in d["cycles"]
        )
        agg = {(int(r["from"]), int(r["to"]), str(r["asset"])): r["qty"] for r in d["aggregate"]}
        obj = d.get("objectives", {})
        lbr = tuple(
            LowerBoundStatus(int(r["node"]), r["asset"], r["side"], int(r["lower"]), r["flow"])
            for r in d.get("lb_report", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed solution: {exc!r}") from None
    return Solution(cycles, agg, obj.get("units", 0), obj.get("weighted", 0), lbr,
                    d.get("stats", {}), d.get("config", {}))


def read_solution(path) -> Solution:
    with open(path, encoding="utf-8") as fh:
        return parse_solution(fh.read())


def write_solution(sol: Solution, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_solution(sol))


def render_report(sol: Solution) -> str:
    lines = []
    for c in sol.cycles:
        lines.append(c.render())
    lines.append(f"cycles: {len(sol.cycles)}")
    lines.append(f"units exchanged: {_fmt(sol.objective_units)}")
    lines.append(f"weighted value: {_fmt(sol.objective_weighted)}")
    for s in sol.lb_report:
        lines.append(s.render())
    asym = [c for c in sol.cycles if c.gain != 1.0]
    if asym:
        lines.append(f"note: {len(asym)} cycle(s) with gain != 1; root receives gain x delta")
    if sol.stats:
        lines.append("stats: " + ", ".join(f"{k}={v}" for k, v in sorted(sol.stats.items())))
    return "\n".join(lines) + "\n"
