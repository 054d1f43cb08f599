import pytest

from veilhunt.model import Event, EventLog, GatewayId, TaxonomyTree


def make_gateway(i: int) -> GatewayId:
    return GatewayId(f"{i:032x}", i)


def make_log(gw: GatewayId, tokens, start_ts: int = 0, day: int = 0) -> EventLog:
    records = tuple(
        Event(tok, f"dev{j % 3}", day * 86400 + start_ts + j) for j, tok in enumerate(tokens)
    )
    return EventLog(gw, records)


@pytest.fixture
def taxonomy() -> TaxonomyTree:
    parent = {
        "camera": "root",
        "camera.stream": "camera",
        "camera.stream.start": "camera.stream",
        "camera.stream.stop": "camera.stream",
        "camera.motion": "camera",
        "camera.motion.detected": "camera.motion",
        "lock": "root",
        "lock.door": "lock",
        "lock.door.open": "lock.door",
        "lock.door.close": "lock.door",
        "thermo": "root",
        "thermo.temp": "thermo",
        "thermo.temp.set": "thermo.temp",
    }
    return TaxonomyTree(parent, "root")
