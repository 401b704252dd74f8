"""Deterministic run-time accounting for budgeted runs.

Budgets are expressed in seconds but measured with a cost model over
operation counts (CG iterations, chiplet pairs, network
multiply-accumulates, environment steps), so a budgeted run with a fixed
seed always does the same work and emits the same results. The constants
were fitted on the development machine with ``benchmarks/calibrate_clock.py``.
Pass ``wall_clock=True`` to budget on real elapsed time instead.
"""
import math
import time

# seconds per unit, fitted by benchmarks/calibrate_clock.py
REF_EVAL_BASE = 0.0
REF_PER_CG_CELL_ITER = 1.33e-8
FAST_EVAL_BASE = 9.5e-6
FAST_PER_PAIR = 0.0
WIRE_PER_NET = 2.5e-6
NN_PER_MAC = 3.7e-11
NN_PER_CALL_WEIGHT = 8.8e-10
ADAM_PER_WEIGHT = 2.5e-9
ENV_STEP = 3.9e-5
SA_MOVE = 7.0e-5
UPDATE_PER_SAMPLE = 7.6e-4


class WorkClock:
    def __init__(self, limit=None, wall_clock=False):
        self.limit = limit
        self.wall_clock = wall_clock
        self.modelled = 0.0
        self._start = time.perf_counter()

    def charge(self, seconds):
        self.modelled += seconds

    @property
    def elapsed(self):
        if self.wall_clock:
            return time.perf_counter() - self._start
        return self.modelled

    @property
    def exhausted(self):
        return self.limit is not None and self.elapsed >= self.limit

    # cost helpers -------------------------------------------------------

    def reference_eval(self, cg_iterations, cells, nets):
        self.charge(REF_EVAL_BASE + REF_PER_CG_CELL_ITER * cg_iterations * cells
                    + WIRE_PER_NET * nets)

    def fast_eval(self, spec, nets):
        self.charge(FAST_EVAL_BASE + FAST_PER_PAIR * spec.n * spec.n + WIRE_PER_NET * nets)

    def network(self, macs, calls=1, weights=0):
        """Dense-layer work: ``macs`` multiply-adds over ``calls`` products of a
        ``weights``-entry matrix (each product re-reads the whole matrix)."""
        self.charge(NN_PER_MAC * macs + NN_PER_CALL_WEIGHT * weights * calls)

    def optimizer(self, weights, steps=1):
        self.charge(ADAM_PER_WEIGHT * weights * steps)

    def env_steps(self, n=1):
        self.charge(ENV_STEP * n)

    def sa_moves(self, n=1):
        self.charge(SA_MOVE * n)

    def update_samples(self, n):
        """Per-sample bookkeeping of a policy update beyond the dense products."""
        self.charge(UPDATE_PER_SAMPLE * n)

