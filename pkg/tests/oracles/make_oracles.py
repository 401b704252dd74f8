"""Recompute the frozen reference values in ``oracles.json``.

Closed-form values are evaluated directly from their formulas; the desk
optima come from exhaustive enumeration of every legal floorplan. Run from
the tests directory:  python oracles/make_oracles.py
"""
import json
import math
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

import desk  # noqa: E402


def main():
    # default stack: g_v = 3e4 W/m2K * (1 mm)^2, g_lat = 100 W/mK * 0.5 mm
    g_v = 3.0e4 * 1e-3 ** 2
    out = {
        "reward_example": -1.0 * 1000 * 1e-3 - 0.1 * 2.0 ** 2 / (1.0 + math.exp(-2.0)),
        "g_v_default": g_v,
        "g_lat_default": 100.0 * 0.5e-3,
        "uniform_rise_q0.01": 0.01 / g_v,
        # 4 x 3 mm footprint on 1 mm cells with no lateral coupling
        "decoupled_self_4x3": 1.0 / (g_v * 12),
        # +1 K on every cell of a 10 x 10 grid carrying 2 W in total
        "energy_plus1k_10x10_2w": 100 * g_v / 2.0,
        "desk_one_chiplet_best": desk.brute_force_best(desk.one_chiplet(), desk.desk_tables()),
        "desk_two_chiplet_best": desk.brute_force_best(desk.two_chiplet(), desk.desk_tables()),
        "desk_two_chiplet_legal": sum(1 for _ in desk.legal_floorplans(desk.two_chiplet())),
    }
    (HERE / "oracles.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
