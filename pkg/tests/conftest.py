import pytest

from cosim.scenario import Scenario


def agent(agent_id, x, y, kind="UGV", role="idle", z=None, waypoints=(), loop=True):
    if z is None:
        z = 0.2 if kind == "UGV" else 10.0
    return {
        "id": agent_id,
        "kind": kind,
        "position": [x, y, z],
        "role": role,
        "waypoints": [{"position": list(p), "speed": s} for p, s in waypoints],
        "loop": loop,
    }


def make_scenario(
    agents=None,
    flows=None,
    obstacles=(),
    policy=None,
    channel=None,
    horizon_us=100_000,
    name="test",
    seed=7,
    **extra,
):
    if agents is None:
        agents = [
            agent("pub", 40.0, 50.0, role="publisher"),
            agent("hub", 42.0, 50.0, role="master"),
            agent("sub", 60.0, 50.0, role="subscriber"),
        ]
    if flows is None:
        flows = [flow("pub", "sub", "hub")]
    doc = {
        "name": name,
        "seed": seed,
        "horizon_us": horizon_us,
        "world": {"obstacles": list(obstacles), "agents": agents},
        "flows": flows,
        "policy": policy or {},
        "channel": channel or {},
    }
    doc.update(extra)
    return Scenario.model_validate(doc)


def flow(pub, sub, master, **kw):
    doc = {"publisher": pub, "subscriber": sub, "master": master, "packet_budget": 3,
           "publish_period_us": 10_000}
    doc.update(kw)
    return doc


@pytest.fixture
def small_scenario():
    return make_scenario()


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
