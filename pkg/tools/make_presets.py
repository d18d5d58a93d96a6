"""Regenerate the bundled scenario presets under src/cosim/presets/.

Run from the repository root: ``python tools/make_presets.py``.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "cosim" / "presets"

CY = 50.0          # placement axis (y)
SEP = 40.0         # default publisher/subscriber separation
ROAM = 4.0         # half-amplitude of the cross-axis patrol
UGV_Z, UAV_Z = 0.2, 10.0
HUSKY_PUB_SPEED, HUSKY_SUB_SPEED, IRIS_SPEED = 0.4, 1.0, 2.2

# Chosen so the preset speed gaps shift the window by a visible amount:
# 0.6 m/s -> 0.1 ms (UGV-UGV), 1.8 m/s -> 0.3 ms (UGV-UAV).
VELOCITY_GAIN = 1.0 / 6.0


def patrol(agent_id, kind, x, z, speed, role, y0=CY):
    return {
        "id": agent_id,
        "kind": kind,
        "position": [x, y0, z],
        "role": role,
        "waypoints": [
            {"position": [x, y0 + ROAM, z], "speed": speed},
            {"position": [x, y0 - ROAM, z], "speed": speed},
        ],
        "loop": True,
    }


def grove():
    trees = []
    for x, ys in ((48.0, range(40, 61, 2)), (50.0, range(41, 60, 2)), (52.0, range(40, 61, 2))):
        trees += [{"center": [x, float(y)], "radius": 0.8, "height": 8.0} for y in ys]
    return trees


def preset(pair, los):
    x_pub, x_sub = 50.0 - SEP / 2, 50.0 + SEP / 2
    pub = patrol("husky-1", "UGV", x_pub, UGV_Z, HUSKY_PUB_SPEED, "publisher")
    if pair == "UGV-UGV":
        master = patrol("husky-2", "UGV", x_sub, UGV_Z, HUSKY_SUB_SPEED, "master")
        iris = patrol("iris", "UAV", 50.0, UAV_Z, IRIS_SPEED, "idle", y0=85.0)
        subscriber = "husky-2"
    else:
        master = patrol("husky-2", "UGV", x_pub + 2.0, UGV_Z, HUSKY_SUB_SPEED, "master")
        iris = patrol("iris", "UAV", x_sub, UAV_Z, IRIS_SPEED, "subscriber")
        subscriber = "iris"
    name = f"{pair.lower()}-{los.lower()}"
    return name, {
        "name": name,
        "pair_kind": pair,
        "los_label": los,
        "seed": 1,
        "horizon_us": 15_000_000,
        "world": {
            "extent": [100.0, 100.0],
            "grid_cell": 20.0,
            "obstacles": grove() if los == "NLOS" else [],
            "agents": [pub, master, iris],
        },
        "channel": {},
        "flows": [
            {
                "publisher": "husky-1",
                "subscriber": subscriber,
                "master": "husky-2",
                "topic": "/husky_1/camera/image_raw",
                "payload_bytes": 1024,
                "mtu_bytes": 256,
                "header_bytes": 32,
                "publish_period_us": 33_333,
                "start_us": 0,
                "packet_budget": 400,
            }
        ],
        "policy": {
            "strategy": "fixed",
            "w_init_us": 1000,
            "w_min_us": 100,
            "w_max_us": 10000,
            "velocity_gain": VELOCITY_GAIN,
            "use_absolute_difference": False,
            "lp_threshold": 0.15,
        },
    }


if __name__ == "__main__":
    for pair in ("UGV-UGV", "UGV-UAV"):
        for los in ("LOS", "NLOS"):
            name, doc = preset(pair, los)
            (OUT / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
            print(name)
