"""Fit the cost-model constants in ``chipletplan.budget`` on this machine.

Times each charged operation on default-sized synthetic instances, fits the
per-unit costs by least squares, then checks the model against the wall
clock on a short training run and a short anneal. Paste the printed
constants into ``budget.py`` to recalibrate.

    python benchmarks/calibrate_clock.py
"""
import time

import numpy as np

from chipletplan import budget
from chipletplan.agent import PPOAgent, TrainConfig, nn, train
from chipletplan.annealer import AnnealConfig, anneal, propose_move
from chipletplan.floorplan_env import action_mask, encode_observation, random_floorplan, reset, step
from chipletplan.io import generate_synthetic
from chipletplan.reward import evaluate_floorplan
from chipletplan.thermal_reference import characterize_tables, peak_temperature


def best_of(fn, repeat=5, number=1):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        out.append((time.perf_counter() - t0) / number)
    return min(out)


def instances(rng, count, lo=3, hi=11):
    out = []
    while len(out) < count:
        spec = generate_synthetic(int(rng.integers(lo, hi)), rng)
        fp = random_floorplan(spec, rng, 100)
        if fp is not None:
            out.append((spec, fp))
    return out


def fit(rows, ys):
    """Least squares with both coefficients kept non-negative."""
    x, y = np.asarray(rows, dtype=float), np.asarray(ys)
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    for k in (0, 1):
        if coef[k] < 0:
            other = 1 - k
            coef[k] = 0.0
            coef[other] = max(0.0, float(x[:, other] @ y / (x[:, other] @ x[:, other])))
    return coef


def main():
    rng = np.random.default_rng(7)
    cases = instances(rng, 60)
    tables = characterize_tables(cases[0][0].thermal_grid)
    consts = {}

    rows, ys = [], []
    for spec, fp in cases[:30]:
        _, iters = peak_temperature(fp, spec, return_iterations=True)
        g = spec.thermal_grid
        t = best_of(lambda: evaluate_floorplan(fp, spec, reference=True), repeat=3)
        rows.append((1.0, iters * g.nx * g.ny))
        ys.append(t - budget.WIRE_PER_NET * len(spec.nets))
    consts["REF_EVAL_BASE"], consts["REF_PER_CG_CELL_ITER"] = fit(rows, ys)

    rows, ys = [], []
    for spec, fp in cases:
        evaluate_floorplan(fp, spec, tables)
        t = best_of(lambda: evaluate_floorplan(fp, spec, tables), number=50)
        rows.append((1.0, spec.n * spec.n))
        ys.append(t - budget.WIRE_PER_NET * len(spec.nets))
    consts["FAST_EVAL_BASE"], consts["FAST_PER_PAIR"] = fit(rows, ys)

    cfg = TrainConfig()
    rows, ys = [], []
    for lattice in (16, 32):
        agent = PPOAgent(lattice, cfg, np.random.default_rng(0))
        w = sum(v.size for v in agent.params.values())
        for b in (1, 8, 16, 64):
            obs = np.random.default_rng(1).random((b, 4, lattice, lattice)).astype(np.float32)
            t = best_of(lambda: nn.policy_apply(agent.params, obs), repeat=3)
            rows.append((nn.flop_count(lattice, b), w))
            ys.append(t)
            logits, values, cache = nn.policy_apply(agent.params, obs)
            t = best_of(lambda: nn.policy_backward(agent.params, cache, logits, values), repeat=3)
            rows.append((2 * nn.flop_count(lattice, b), 2 * w))
            ys.append(t)
    consts["NN_PER_MAC"], consts["NN_PER_CALL_WEIGHT"] = fit(rows, ys)

    agent = PPOAgent(32, cfg, np.random.default_rng(0))
    grads = {k: np.full_like(v, 1e-3) for k, v in agent.params.items()}
    w = sum(v.size for v in agent.params.values())
    consts["ADAM_PER_WEIGHT"] = best_of(lambda: agent.optim.step(agent.params, grads), 3) / w

    spec = cases[-1][0]

    def episode():
        state = reset(spec)
        steps = 0
        while not state.complete:
            mask = action_mask(state, spec)
            free = np.flatnonzero(mask)
            if free.size == 0:
                break
            encode_observation(state, spec)
            iy, ix = divmod(int(free[0]), spec.lattice_size)
            state, _ = step(state, (ix, iy), spec)
            encode_observation(state, spec)
            steps += 1
        return steps

    steps = episode()
    consts["ENV_STEP"] = best_of(episode, number=20) / max(steps, 1)

    spec, fp = cases[-1]
    sa_rng = np.random.default_rng(3)
    consts["SA_MOVE"] = best_of(lambda: propose_move(fp, spec, sa_rng), number=200)

    for k, v in consts.items():
        setattr(budget, k, float(f"{v:.3g}"))

    # what the per-operation fits miss (loop bookkeeping, trace rows, GAE and
    # loss arithmetic) is charged per SA move and per update sample
    spec = generate_synthetic(6, np.random.default_rng(3))
    tabs = characterize_tables(spec.thermal_grid)
    moves = 3000
    clk = budget.WorkClock()
    t0 = time.perf_counter()
    anneal(spec, cfg=AnnealConfig(iterations=moves, seed=1), tables=tabs, clock=clk)
    wall = time.perf_counter() - t0
    calls = moves + AnnealConfig().probe_moves
    consts["SA_MOVE"] = budget.SA_MOVE + (wall - clk.elapsed) / calls
    budget.SA_MOVE = float(f"{consts['SA_MOVE']:.3g}")

    tcfg = TrainConfig(epochs=2, seed=1)
    clk = budget.WorkClock()
    t0 = time.perf_counter()
    res = train(spec, tabs, train_cfg=tcfg, clock=clk)
    wall = time.perf_counter() - t0
    steps = res.episodes * spec.n * tcfg.update_epochs  # upper bound on samples
    consts["UPDATE_PER_SAMPLE"] = max(0.0, (wall - clk.elapsed) / steps)
    budget.UPDATE_PER_SAMPLE = float(f"{consts['UPDATE_PER_SAMPLE']:.3g}")

    print("# fitted constants")
    for k, v in consts.items():
        print(f"{k} = {v:.3g}")
    for label, run in (
        ("train 3 epochs", lambda clk: train(spec, tabs, train_cfg=TrainConfig(epochs=3), clock=clk)),
        ("anneal fast 3000", lambda clk: anneal(spec, cfg=AnnealConfig(iterations=3000),
                                                tables=tabs, clock=clk)),
        ("anneal reference 300", lambda clk: anneal(
            spec, cfg=AnnealConfig(iterations=300, backend="reference"), clock=clk)),
    ):
        clk = budget.WorkClock()
        t0 = time.perf_counter()
        run(clk)
        wall = time.perf_counter() - t0
        print(f"{label:22s} wall {wall:7.3f} s  modelled {clk.elapsed:7.3f} s  "
              f"ratio {clk.elapsed / wall:5.2f}")


if __name__ == "__main__":
    main()
