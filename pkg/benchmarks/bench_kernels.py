"""Time the hot kernels with numba and with the pure-Python fallback.

    python benchmarks/bench_kernels.py            # both paths, side by side
    python benchmarks/bench_kernels.py --episodes 2000

Each path runs in its own interpreter because RSFE_DISABLE_NUMBA is read at
import time.
"""
import argparse
import json
import os
import subprocess
import sys
import time


def measure(episodes: int) -> dict:
    import numpy as np

    from rsfe import USING_NUMBA
    from rsfe.agents import AgentConfig, evaluate, train
    from rsfe.envs import GaussianSpec, GridIndex, GridWorldConfig, SampleSource, draw
    from rsfe.estimator import EstimatorState, LearningRateSchedule, run_stream

    xs = draw(SampleSource(GaussianSpec(0.0, 1.0), 0), 4000)
    state = EstimatorState(v=1.5, beta=4.0, schedule=LearningRateSchedule.constant(0.02))
    run_stream(state, xs[:10])  # compile
    t0 = time.perf_counter()
    for _ in range(100):
        traj = run_stream(state, xs)
    t_est = time.perf_counter() - t0

    env = GridWorldConfig()
    warm = AgentConfig(episodes=2)
    train(env, warm)
    evaluate(np.zeros((GridIndex(env.grid).n_states, 4)), env, 2, warm)
    cfg = AgentConfig(beta=0.4, episodes=episodes)
    t0 = time.perf_counter()
    Q, _ = train(env, cfg)
    t_train = time.perf_counter() - t0
    t0 = time.perf_counter()
    rep = evaluate(Q, env, 1000, cfg)
    t_eval = time.perf_counter() - t0
    return {"numba": USING_NUMBA, "estimate_100x4000_s": t_est, "train_s": t_train, "eval_1000_s": t_eval,
            "final_estimate": float(traj[-1]), "violation_fraction": rep.violation_fraction}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--episodes", type=int, default=5000)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.child:
        print(json.dumps(measure(args.episodes)))
        return
    rows = []
    for disable in ("0", "1"):
        env = dict(os.environ, RSFE_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, __file__, "--child", "--episodes", str(args.episodes)],
                             env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))
    keys = ["estimate_100x4000_s", "train_s", "eval_1000_s"]
    print(f"{'path':<10}" + "".join(f"{k:>22}" for k in keys))
    for r in rows:
        print(f"{'numba' if r['numba'] else 'python':<10}" + "".join(f"{r[k]:>22.4f}" for k in keys))
    fast, slow = rows
    print("speedup   " + "".join(f"{slow[k] / max(fast[k], 1e-12):>21.1f}x" for k in keys))
    print(f"final estimate  numba={fast['final_estimate']!r}  python={slow['final_estimate']!r}")
    print(f"violation frac  numba={fast['violation_fraction']!r}  python={slow['violation_fraction']!r}")


if __name__ == "__main__":
    main()
