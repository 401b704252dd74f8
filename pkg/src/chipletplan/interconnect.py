"""Microbump assignment and total wirelength.

Each net gets one representative pin pair, scaled by its wire count. Pins
are placed on the facing edges of the two chiplets; along an axis where the
two rectangles' spans overlap, both pins share one coordinate (the midpoint
of the two centres clamped to the overlap). The Manhattan pin distance is
then the rectangle-to-rectangle gap, the minimum any pin pair can reach.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, StateError
from .floorplan_env import anchor_position


@dataclass(frozen=True)
class BumpAssignment:
    pins_a: np.ndarray  # (nets, 2) mm
    pins_b: np.ndarray


@dataclass(frozen=True)
class WirelengthReport:
    total: float
    per_net: tuple


def _axis_pins(a_lo, a_hi, b_lo, b_hi):
    if a_hi <= b_lo:
        return a_hi, b_lo
    if b_hi <= a_lo:
        return a_lo, b_hi
    lo, hi = max(a_lo, b_lo), min(a_hi, b_hi)
    mid = 0.25 * (a_lo + a_hi + b_lo + b_hi)
    v = min(max(mid, lo), hi)
    return v, v


def _snap_to_edge(px, py, x0, y0, x1, y1):
    # only reached when the two rectangles overlap in both axes
    d = [px - x0, x1 - px, py - y0, y1 - py]
    side = int(np.argmin(d))
    if side == 0:
        return x0, py
    if side == 1:
        return x1, py
    if side == 2:
        return px, y0
    return px, y1


def pin_pair(rect_a, rect_b):
    """Pin locations for one net between rectangles ``(x, y, w, h)``."""
    ax, ay, aw, ah = rect_a
    bx, by, bw, bh = rect_b
    pax, pbx = _axis_pins(ax, ax + aw, bx, bx + bw)
    pay, pby = _axis_pins(ay, ay + ah, by, by + bh)
    overlap_x = pax == pbx and not (ax + aw <= bx or bx + bw <= ax)
    overlap_y = pay == pby and not (ay + ah <= by or by + bh <= ay)
    if overlap_x and overlap_y:
        pax, pay = _snap_to_edge(pax, pay, ax, ay, ax + aw, ay + ah)
        pbx, pby = _snap_to_edge(pbx, pby, bx, by, bx + bw, by + bh)
    return (pax, pay), (pbx, pby)


def _rect(floorplan, spec, k):
    anc = floorplan.anchors[k]
    if anc is None:
        raise StateError(f"chiplet {spec.chiplets[k].name!r} is not placed")
    x, y = anchor_position(spec, anc)
    c = spec.chiplets[k]
    return x, y, c.width, c.height


def assign_bumps(floorplan, spec):
    rects = {}
    pa, pb = [], []
    for net in spec.nets:
        for k in (net.a, net.b):
            if k not in rects:
                rects[k] = _rect(floorplan, spec, k)
        a, b = pin_pair(rects[net.a], rects[net.b])
        pa.append(a)
        pb.append(b)
    return BumpAssignment(np.array(pa, dtype=np.float64).reshape(-1, 2),
                          np.array(pb, dtype=np.float64).reshape(-1, 2))


def total_wirelength(assignment, spec):
    """Per-net length is ``wires * (|dx| + |dy|)`` between the two pins."""
    if assignment.pins_a.shape[0] != len(spec.nets) or assignment.pins_b.shape[0] != len(spec.nets):
        raise ContractError("bump assignment does not cover every net")
    per_net = tuple(
        float(net.wires * (abs(a[0] - b[0]) + abs(a[1] - b[1])))
        for net, a, b in zip(spec.nets, assignment.pins_a.tolist(), assignment.pins_b.tolist()))
    return WirelengthReport(float(sum(per_net)), per_net)


def wirelength(floorplan, spec):
    """``total_wirelength(assign_bumps(floorplan, spec), spec).total`` without the pin arrays.

    Under the pin rule each net spans exactly the rectangle gap, so only the
    gaps are computed; nets between overlapping rectangles take the full path.
    """
    px, py = spec.pitch_x, spec.pitch_y
    chips = spec.chiplets
    anchors = floorplan.anchors
    total = 0.0
    for net in spec.nets:
        aa, ab = anchors[net.a], anchors[net.b]
        if aa is None or ab is None:
            missing = net.a if aa is None else net.b
            raise StateError(f"chiplet {chips[missing].name!r} is not placed")
        ca, cb = chips[net.a], chips[net.b]
        ax, ay, bx, by = aa[0] * px, aa[1] * py, ab[0] * px, ab[1] * py
        gx = max(bx - (ax + ca.width), ax - (bx + cb.width), 0.0)
        gy = max(by - (ay + ca.height), ay - (by + cb.height), 0.0)
        if gx == 0.0 and gy == 0.0 and not (ax + ca.width == bx or bx + cb.width == ax
                                            or ay + ca.height == by or by + cb.height == ay):
            (pax, pay), (pbx, pby) = pin_pair((ax, ay, ca.width, ca.height),
                                              (bx, by, cb.width, cb.height))
            total += net.wires * (abs(pax - pbx) + abs(pay - pby))
        else:
            total += net.wires * (gx + gy)
    return float(total)
