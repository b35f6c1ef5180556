"""One-off full-scale dry runs of the heavy acceptance criteria."""
import json, time
from cointrr.experiments import ExperimentConfig, run_mspe, run_dist_compare, run_rank_bias

base = "/root/pkg/.accept_scratch"

t0 = time.monotonic()
cfg = ExperimentConfig.from_json_dict({
    "experiment": "rank_bias", "seed": 1007, "n_reps": 200,
})
run_rank_bias(cfg, f"{base}/rank_bias")
print(f"rank_bias done in {time.monotonic()-t0:.0f}s", flush=True)

t0 = time.monotonic()
cfg = ExperimentConfig.from_json_dict({
    "experiment": "dist_compare", "seed": 1005,
})
run_dist_compare(cfg, f"{base}/dist_compare")
print(f"dist_compare done in {time.monotonic()-t0:.0f}s", flush=True)

t0 = time.monotonic()
cfg = ExperimentConfig.from_json_dict({
    "experiment": "mspe",
    "model": {"generator": "gamma_c", "p": 3},
    "c_grid": [0, 10, 20, 30],
    "t_steps": 100,
    "n_reps": 20000,
    "seed": 1006,
    "estimators": [
        {"kind": "rrr", "k": 1}, {"kind": "rrr", "k": 2}, {"kind": "ls"},
        {"kind": "hard", "alpha": 0.05}, {"kind": "sigmoid", "a": 0.1, "alpha": 0.1},
    ],
})
run_mspe(cfg, f"{base}/mspe")
print(f"mspe done in {time.monotonic()-t0:.0f}s", flush=True)
