#!/usr/bin/env python3
"""Smoke test for the driftq_py extension module.

Build the extension first, then run this script from the repository root:

    cargo build -p driftq-python --release
    python3 python/smoke_test.py
"""

import math
import os
import random
import shutil
import sys
import tempfile


def load_module():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    candidates = [
        os.path.join(root, "target", profile, name)
        for profile in ("release", "debug")
        for name in ("libdriftq_py.so", "libdriftq_py.dylib", "driftq_py.dll")
    ]
    built = next((p for p in candidates if os.path.exists(p)), None)
    if built is None:
        sys.exit("extension not found; run `cargo build -p driftq-python` first")
    stage = tempfile.mkdtemp(prefix="driftq_py_")
    shutil.copy(built, os.path.join(stage, "driftq_py.so"))
    sys.path.insert(0, stage)
    import driftq_py

    return driftq_py


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def check_queue_primitives(dq):
    assert dq.step_queue([10.0, 4.0], [1.0, 1.0], [3.0, 6.0]) == [8.0, 1.0]
    assert dq.lyapunov([3.0, 4.0]) == 12.5
    assert dq.realized_drift([0.0], [2.0]) == 2.0
    assert close(dq.reward("ldptrlq", 2.0, 0.0, [3.0], [4.0], 1.0), -14.5)
    assert close(dq.reward("original_ldp", 2.0, 0.0, [3.0], [4.0], 1.0), -5.5)
    assert close(dq.reward("simplified_ldp", 1.0, 0.0, [2.0, 0.0], [5.0, 1.0], 3.0), -9.0)
    assert close(dq.time_avg_penalty([1.0, 2.0, 3.0]), 2.0)
    score = dq.mean_rate_stability_score([10.0] * 1000, 100)
    assert abs(score - 0.0105) < 2e-4

    # Shaper identity on random vectors.
    rng = random.Random(1)
    for _ in range(200):
        dim = rng.randint(1, 8)
        before = [rng.uniform(0, 1000) for _ in range(dim)]
        after = [rng.uniform(0, 1000) for _ in range(dim)]
        p = rng.uniform(0, 100)
        v = rng.uniform(0, 10)
        tailored = dq.reward("ldptrlq", v, 0.0, before, after, p)
        original = dq.reward("original_ldp", v, 0.0, before, after, p)
        assert close(tailored, original - sum(q * q for q in before))

    # Invalid inputs surface as ValueError.
    try:
        dq.reward("nonsense", 1.0, 0.0, [1.0], [1.0], 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("bad shaper name must raise")
    print("queue primitives: ok")


def check_mec(dq):
    a = dq.MecSim(seed=7, users=3)
    b = dq.MecSim(seed=7, users=3)
    assert a.reset() == b.reset()
    local = [100.0] * 3
    for _ in range(50):
        pa = a.step(local, 500.0, [0.01] * 3)
        pb = b.step(local, 500.0, [0.01] * 3)
        assert pa == pb, "identical seeds must stay in lockstep"
        penalty, before, after, obs = pa
        assert penalty >= 0.0
        assert len(before) == 4 and len(after) == 4  # users + base station
        assert all(q >= 0.0 for q in after)
        assert len(obs) == 7  # queues + gains
        # The shaped reward agrees with the module-level formula.
        r = dq.reward("ldptrlq", 1.0, 0.0, before, after, penalty)
        expected = -0.5 * (sum(q * q for q in after) + sum(q * q for q in before)) - penalty
        assert close(r, expected)
    caps = a.caps()
    assert caps == (1000.0, 5000.0, 1.0)
    try:
        a.step([caps[0] * 2] * 3, 0.0, [0.0] * 3)
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-bounds action must raise")
    print("mec simulator: ok")


def check_routing(dq):
    sim = dq.RoutingSim(seed=4, nodes=10, nearest_neighbors=3, arrival_rate=50.0)
    assert sim.sink() not in sim.sources()
    text = sim.topology_text()
    assert sum(1 for line in text.splitlines() if line.startswith("node ")) == 10
    assert sim.min_cut() > 0.0

    delivered_total = 0.0
    for _ in range(500):
        energy, delivered, backlogs = sim.step_backpressure()
        assert energy >= 0.0
        assert all(q >= 0.0 for q in backlogs)
        assert backlogs[sim.sink()] == 0.0
        delivered_total += delivered
    queued = sum(sim.queues())
    assert close(sim.total_injected(), delivered_total + queued, 1e-6), (
        sim.total_injected(),
        delivered_total,
        queued,
    )

    # Manual idle pattern leaves everything except fresh arrivals in place.
    heads = sim.action_choices()
    assert len(heads) == 9
    energy, _, _ = sim.step([0] * len(heads))
    assert energy == 0.0
    print("routing simulator: ok")


def main():
    dq = load_module()
    print(f"driftq_py {dq.__version__}")
    check_queue_primitives(dq)
    check_mec(dq)
    check_routing(dq)
    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
