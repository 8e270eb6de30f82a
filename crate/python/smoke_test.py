"""Quick end-to-end check of the Python bindings.

    pip install --no-build-isolation ./crates/python
    python python/smoke_test.py
"""

import json
import math
import tempfile
from pathlib import Path

import lamol

ROOT = Path(__file__).resolve().parent.parent


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


# losses
assert close(lamol.multiaccuracy_loss(1.0, 1, 0.3, 1.0), 0.7)
assert close(lamol.multiaccuracy_loss(1.0, -1, 0.3, 1.0), -0.7)
assert close(lamol.prediction_error_loss(0.5, 0.5, 1.0), 0.0)
assert close(lamol.coverage_loss(1.0, 1, 0.2, 0.1, 0.9), 0.1)

# weights stay on the simplex
q = [0.25] * 4
q = lamol.hedge_update(q, [1.0, 0.0, -1.0, 0.5], 0.5)
assert close(sum(q), 1.0, 1e-12) and q[0] > q[2]
fs = lamol.fixed_share_update([1.0, 0.0], [1.0, -1.0], 10.0, 0.1)
assert fs[1] >= 0.1 / 2 - 1e-12

learner = lamol.WeightLearner("fixed_share", 3, tau=20)
for t in range(50):
    learner.update([1.0 if t < 25 else -1.0, 0.0, -0.5])
assert close(sum(learner.weights), 1.0, 1e-12)

# matching pennies has value 0 and uniform strategies
sol = lamol.solve_zero_sum([[1.0, -1.0], [-1.0, 1.0]], 1e-6)
assert abs(sol["value"]) < 1e-4 and abs(sol["row"][0] - 0.5) < 1e-3

assert close(lamol.solve_mean_ma_pred(0.2, 0.5, 0.5), 0.7)
assert close(lamol.interpolate_cdf([0.1, 0.5, 0.9], [1.0, 2.0, 3.0], 2.0), 0.5)

stream = lamol.switch_stream(200, 0)
assert len(stream["y"]) == 200

# one episode through the engine, then evaluation and bound checks
run = {
    "name": "fs",
    "problem": {"kind": "ma"},
    "learner": "fixed_share",
    "eta": {"mode": "fixed", "value": 0.3},
    "tau": 20,
}
trace = lamol.run_episode_json(json.dumps(run), json.dumps({"kind": "switch", "t": 200}))
assert trace.completed and len(trace) == 200
ends, values = trace.local_ma_error(20)
assert len(ends) == 181 and all(v >= 0 for v in values)
report = trace.verify(samples=500)
assert report["ok"], report

with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "fs.csv"
    trace.save(str(path))
    back = lamol.Trace.load(str(path))
    assert back.predictions == trace.predictions
    rows = lamol.run_config(str(ROOT / "configs" / "switch.json"), str(Path(d) / "out"), 2)
    assert {r["run_id"] for r in rows} >= {"hedge_ma", "fixed_share_ma"}
    assert all(math.isfinite(r["total"]) for r in rows)

print("smoke test ok")
