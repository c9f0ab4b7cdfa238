import json

import pytest

from chainex.chain import SolveConfig, solve
from chainex.errors import ParseError
from chainex.fixtures import gain_ring, splitting, three_cycle
from chainex.solution import (
    LowerBoundStatus,
    parse_solution,
    read_solution,
    render_report,
    serialize_solution,
    write_solution,
)


def test_cycle_render():
    (c,) = solve(three_cycle()).cycles
    assert c.render() == "1 –X→ 3 –Y→ 2 –Z→ 1 (Δ=1)"


def test_lower_bound_render():
    assert LowerBoundStatus(1, "ETH", "recv", 100, 100).render() == "node 1 asset ETH: met (100/100)"
    assert LowerBoundStatus(2, None, "node", 4, 1).render() == "node 2 (node): unmet (1/4)"


@pytest.mark.parametrize("inst, cfg", [
    (three_cycle(), SolveConfig()),
    (splitting(), SolveConfig(phases=2, policy="priority")),
    (gain_ring(), SolveConfig(generalized=True)),
])
def test_json_round_trip(inst, cfg, tmp_path):
    sol = solve(inst, cfg)
    text = serialize_solution(sol)
    back = parse_solution(text)
    assert serialize_solution(back) == text
    write_solution(sol, tmp_path / "s.json")
    assert serialize_solution(read_solution(tmp_path / "s.json")) == text


def test_json_shape():
    d = json.loads(serialize_solution(solve(three_cycle())))
    assert set(d) == {"version", "config", "cycles", "aggregate", "objectives", "lb_report", "stats"}
    assert d["cycles"][0]["links"][0] == {"from": 1, "to": 3, "asset": "X", "qty": 1}
    assert d["objectives"] == {"units": 3, "weighted": 3, "value_basis": "receiver"}
    assert "config" not in json.loads(serialize_solution(solve(three_cycle()), include_config=False))


def test_rate_only_when_not_one():
    d = json.loads(serialize_solution(solve(gain_ring(), SolveConfig(generalized=True))))
    assert [lk.get("rate") for lk in d["cycles"][0]["links"]] == [0.6, 2.0, 1.2]


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_solution("{")
    with pytest.raises(ParseError, match="malformed"):
        parse_solution('{"cycles": [{"links": []}], "aggregate": []}')


def test_report_mentions_gain_note():
    text = render_report(solve(gain_ring(), SolveConfig(generalized=True)))
    assert "[gain 1.44]" in text and "root receives gain x delta" in text
