"""Command-line experiment harness.

    rsfe estimate        --config cfg.json --out traj.csv
    rsfe oracle          --out report.json
    rsfe gridworld       --config grid.json --out results.json [--no-wind]
    rsfe value-iteration --config vi.json --out values.json

Exit codes: 0 success, 1 a check failed, 2 bad configuration or unwritable
output. Every output embeds the configuration that produced it and is
byte-identical across reruns of the same configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import agents, envs, oracle
from .estimator import EstimatorState, LearningRateSchedule, run_stream
from .math_core import GaussianSpec, UniformSpec, gaussian_free_energy, logistic_sigmoid

log = logging.getLogger("rsfe")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# helpers

def _thread_count(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("RSFE_THREADS")
    return max(1, int(env)) if env else 1


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _check_keys(section: dict, allowed, where: str):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} config fields: {', '.join(unknown)}")


def _fmt(x) -> str:
    return repr(float(x))


def _writer(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="\n")
    except OSError as exc:
        raise ConfigError(f"cannot write output {path}: {exc}") from exc


def _dump_json(path: Path, payload: dict):
    with _writer(path) as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _config_header(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True) + "\n"


def _sidecar(out: Path, suffix: str) -> Path:
    return out.with_name(out.name + suffix)


def _parallel_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _betas(raw, default):
    betas = [float(b) for b in (default if raw is None else raw)]
    if not betas:
        raise ConfigError("beta list must be non-empty")
    if not all(math.isfinite(b) for b in betas):
        raise ConfigError("beta values must be finite")
    return betas


# --------------------------------------------------------------------------
# estimate

ESTIMATE_DEFAULTS = {
    "sources": [{"kind": "gaussian", "mu": 0.0, "rho": 1.0}, {"kind": "uniform", "lo": -2.0, "hi": 2.0}],
    "betas": [-4.0, -2.0, 0.0, 2.0, 4.0],
    "n_seeds": 10,
    "base_seed": 0,
    "alpha": 0.02,
    "v0": 1.5,
    "n_samples": 4000,
    "tail": 500,
    "eta": 0.0,
    "floor_warmup_steps": None,
}


def resolve_estimate_config(raw: dict) -> dict:
    _check_keys(raw, ESTIMATE_DEFAULTS, "estimate")
    cfg = dict(ESTIMATE_DEFAULTS)
    cfg.update(raw)
    cfg["betas"] = _betas(cfg["betas"], ESTIMATE_DEFAULTS["betas"])
    try:
        densities = [envs.density_from_dict(s) for s in cfg["sources"]]
        LearningRateSchedule.from_dict(cfg["alpha"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid estimate config: {exc}") from exc
    if not densities:
        raise ConfigError("sources must be non-empty")
    if int(cfg["n_seeds"]) < 1 or int(cfg["n_samples"]) < 1:
        raise ConfigError("n_seeds and n_samples must be >= 1")
    if not 1 <= int(cfg["tail"]) <= int(cfg["n_samples"]):
        raise ConfigError("tail must lie in [1, n_samples]")
    cfg["sources"] = [envs.density_to_dict(d) for d in densities]
    return cfg


def run_estimate(cfg: dict, threads: int = 1):
    """Run every (source, beta, seed) stream; returns ``(trajectories, summary)``."""
    densities = [envs.density_from_dict(s) for s in cfg["sources"]]
    schedule = LearningRateSchedule.from_dict(cfg["alpha"])
    seeds = [int(cfg["base_seed"]) + i for i in range(int(cfg["n_seeds"]))]
    jobs = [(si, beta, seed) for si in range(len(densities)) for beta in cfg["betas"] for seed in seeds]

    def one(job):
        si, beta, seed = job
        xs = envs.draw(envs.SampleSource(densities[si], seed), int(cfg["n_samples"]))
        state = EstimatorState(v=float(cfg["v0"]), beta=beta, eta=float(cfg["eta"]), schedule=schedule,
                               floor_warmup_steps=cfg["floor_warmup_steps"])
        return run_stream(state, xs)

    trajs = dict(zip(jobs, _parallel_map(one, jobs, threads)))
    tail = int(cfg["tail"])
    summary = []
    for si, density in enumerate(densities):
        for beta in cfg["betas"]:
            tails = np.array([trajs[(si, beta, seed)][-tail:].mean() for seed in seeds])
            summary.append({
                "source": envs.density_label(density),
                "beta": beta,
                "tail_mean": float(tails.mean()),
                "tail_sd": float(tails.std()),
                "final_mean": float(np.mean([trajs[(si, beta, seed)][-1] for seed in seeds])),
                "free_energy": float(oracle.free_energy(density, beta)),
                "fixed_point": float(oracle.fixed_point(density, beta)),
            })
    return densities, seeds, trajs, summary


def cmd_estimate(args) -> int:
    cfg = resolve_estimate_config(_load_config(args.config))
    out = Path(args.out or "estimate." + args.format)
    start = time.perf_counter()
    densities, seeds, trajs, summary = run_estimate(cfg, _thread_count(args.threads))
    log.info("estimate: %d runs in %.2fs", len(trajs), time.perf_counter() - start)
    labels = [envs.density_label(d) for d in densities]
    if args.format == "csv":
        with _writer(out) as fh:
            fh.write(_config_header(cfg))
            fh.write("source,beta,seed,step,estimate\n")
            for si, label in enumerate(labels):
                for beta in cfg["betas"]:
                    for seed in seeds:
                        traj = trajs[(si, beta, seed)].tolist()
                        prefix = f"{label},{_fmt(beta)},{seed},"
                        fh.write("".join(f"{prefix}{i},{v!r}\n" for i, v in enumerate(traj)))
        _dump_json(_sidecar(out, ".summary.json"), {"config": cfg, "summary": summary})
    else:
        runs = [{"source": labels[si], "beta": beta, "seed": seed, "estimate": trajs[(si, beta, seed)].tolist()}
                for si in range(len(labels)) for beta in cfg["betas"] for seed in seeds]
        _dump_json(out, {"config": cfg, "summary": summary, "runs": runs})
    return EXIT_OK


# --------------------------------------------------------------------------
# oracle

ORACLE_DEFAULTS = {
    "grid": {k: list(v) for k, v in oracle.DEFAULT_SCAN_GRID.items()},
    "sign_offsets": [0.25, 1.0, 3.0],
    "n_probes": 20,
    "include_uniform": False,
    "corrupt_sigmoid": False,
}


def _corrupted_sigmoid(z, beta):
    return logistic_sigmoid(z, -beta)


def _check(name, failures, n, mandatory=True, **extra):
    return dict({"name": name, "passed": not failures, "mandatory": mandatory, "n_checked": n,
                 "failures": failures}, **extra)


def run_oracle_suite(cfg: dict) -> list:
    grid = cfg["grid"]
    sig = _corrupted_sigmoid if cfg["corrupt_sigmoid"] else None
    checks = []

    failures, n = [], 0
    for mu in grid["mu"]:
        for rho in grid["rho"]:
            spec = GaussianSpec(mu, rho)
            for beta in grid["beta"]:
                F = gaussian_free_energy(spec, beta)
                J0 = oracle.expected_update(spec, F, beta, sigmoid=sig)
                n += 1
                if abs(J0) > 1e-8:
                    failures.append({"mu": mu, "rho": rho, "beta": beta, "v": F, "observed": J0, "expected": 0.0})
                for d in cfg["sign_offsets"]:
                    for v, want in ((F + d, -1.0), (F - d, 1.0)):
                        J = oracle.expected_update(spec, v, beta, sigmoid=sig)
                        n += 1
                        if np.sign(J) != want:
                            failures.append({"mu": mu, "rho": rho, "beta": beta, "v": v, "observed": J,
                                             "expected_sign": want})
    checks.append(_check("sign_structure", failures, n))

    failures, n = [], 0
    for mu in grid["mu"]:
        for rho in grid["rho"]:
            spec = GaussianSpec(mu, rho)
            for beta in grid["beta"]:
                for v in (mu - 1.0, mu, mu + 0.5 * beta / rho, mu + 1.0):
                    for delta in (0.1, 0.5, 1.0):
                        got = oracle.lobe_ratio(spec, v, delta, beta)
                        want = oracle.lobe_ratio_closed_form(spec, v, delta, beta)
                        n += 1
                        if abs(got - want) > 1e-10 * abs(want):
                            failures.append({"mu": mu, "rho": rho, "beta": beta, "v": v, "delta": delta,
                                             "observed": got, "expected": want})
    checks.append(_check("lobe_ratio", failures, n))

    failures, n = [], 0
    for mu in grid["mu"]:
        for rho in grid["rho"]:
            ref = GaussianSpec(mu, rho)
            for beta in grid["beta"]:
                if beta == 0:
                    continue
                got = oracle.functional_value(oracle.extremizer(ref, beta), ref, beta)
                want = gaussian_free_energy(ref, beta)
                n += 1
                if abs(got - want) > 1e-6:
                    failures.append({"mu": mu, "rho": rho, "beta": beta, "observed": got, "expected": want})
    checks.append(_check("functional_extremum", failures, n))

    failures, n = [], 0
    probes = np.linspace(-5.0, 5.0, int(cfg["n_probes"]))
    for mu in grid["mu"]:
        for rho in grid["rho"]:
            ref = GaussianSpec(mu, rho)
            for beta in grid["beta"]:
                if beta == 0:
                    continue
                p_star = oracle.extremizer(ref, beta)
                F = gaussian_free_energy(ref, beta)
                for x in probes + mu:
                    got = oracle.adversarial_best_response(p_star, ref, beta, x)
                    n += 1
                    if abs(got - (x - F)) > 1e-8:
                        failures.append({"mu": mu, "rho": rho, "beta": beta, "x": float(x), "observed": got,
                                         "expected": float(x - F)})
    checks.append(_check("best_response", failures, n))

    failures, n = [], 0
    ref = GaussianSpec(0.0, 1.0)
    for beta in (b for b in grid["beta"] if b != 0):
        for rho_bar in (1.0, 10.0, 1e2, 1e4, 1e8):
            got = oracle.adversarial_best_response(GaussianSpec(0.0, rho_bar), ref, beta, 0.0)
            want = math.log(rho_bar / ref.rho) / (2.0 * beta)
            n += 1
            if abs(got - want) > 1e-6:
                failures.append({"beta": beta, "rho_bar": rho_bar, "observed": got, "expected": want})
    checks.append(_check("worst_case_divergence", failures, n))

    report = oracle.lipschitz_scan(grid["mu"], grid["rho"], grid["beta"], grid["offset"],
                                   include_uniform=bool(cfg["include_uniform"]))
    scan = report.to_dict()
    scan.pop("records")
    checks.append(_check("lipschitz_conjecture", scan["violations"], scan["n_points"], mandatory=False,
                         max_ratio=scan["max_ratio"], argmax=scan["argmax"], skipped=scan["skipped"],
                         quadrature_failures=scan["failures"]))
    return checks


def cmd_oracle(args) -> int:
    raw = _load_config(args.config)
    _check_keys(raw, ORACLE_DEFAULTS, "oracle")
    cfg = json.loads(json.dumps(ORACLE_DEFAULTS))
    for key, value in raw.items():
        if key == "grid":
            _check_keys(value, ORACLE_DEFAULTS["grid"], "oracle grid")
            cfg["grid"].update(value)
        else:
            cfg[key] = value
    if args.corrupt_sigmoid:
        cfg["corrupt_sigmoid"] = True
    for key in ("mu", "rho", "beta", "offset"):
        if not cfg["grid"][key]:
            raise ConfigError(f"oracle grid field {key!r} must be non-empty")
    if any(r <= 0 for r in cfg["grid"]["rho"]):
        raise ConfigError("oracle grid field 'rho' must be positive")
    checks = run_oracle_suite(cfg)
    ok = all(c["passed"] for c in checks if c["mandatory"])
    out = Path(args.out or "oracle." + args.format)
    if args.format == "csv":
        with _writer(out) as fh:
            fh.write(_config_header(cfg))
            fh.write("check,mandatory,passed,n_checked,n_failures\n")
            for c in checks:
                fh.write(f"{c['name']},{c['mandatory']},{c['passed']},{c['n_checked']},{len(c['failures'])}\n")
    else:
        _dump_json(out, {"config": cfg, "passed": ok, "checks": checks})
    for c in checks:
        if not c["passed"]:
            log.warning("oracle check %s failed at %d of %d points", c["name"], len(c["failures"]), c["n_checked"])
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# --------------------------------------------------------------------------
# gridworld

AGENT_DEFAULTS = {
    "gamma": 0.95,
    "alpha": {"kind": "power", "a": 1.0, "b": 10.0, "p": 0.6},
    "eta": 0.0,
    "floor_warmup_steps": None,
    "eps0": 1.0,
    "eps_min": 0.05,
    "decay_fraction": 0.5,
    "episodes": 20000,
    "seed": 0,
}
GRIDWORLD_DEFAULTS = {
    "env": {},
    "agent": AGENT_DEFAULTS,
    "betas": [-0.8, -0.4, 0.0, 0.4, 0.8],
    "n_rollouts": 1000,
    "q_dir": None,
}


def resolve_gridworld_config(raw: dict, base_dir: Path):
    _check_keys(raw, GRIDWORLD_DEFAULTS, "gridworld")
    env_raw = dict(raw.get("env", {}))
    agent_raw = dict(raw.get("agent", {}))
    _check_keys(agent_raw, AGENT_DEFAULTS, "agent")
    try:
        env = envs.GridWorldConfig.from_dict(env_raw, base_dir)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"invalid env config: {exc}") from exc
    agent = dict(AGENT_DEFAULTS)
    agent.update(agent_raw)
    betas = _betas(raw.get("betas"), GRIDWORLD_DEFAULTS["betas"])
    n_rollouts = int(raw.get("n_rollouts", GRIDWORLD_DEFAULTS["n_rollouts"]))
    try:
        base = _agent_config(agent, 0.0)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid agent config: {exc}") from exc
    cfg = {"env": env.to_dict(), "agent": agent, "betas": betas, "n_rollouts": n_rollouts,
           "q_dir": raw.get("q_dir")}
    cfg["agent"]["alpha"] = base.alpha.to_dict()
    return env, cfg


def _agent_config(agent: dict, beta: float) -> agents.AgentConfig:
    return agents.AgentConfig(
        beta=beta, gamma=float(agent["gamma"]), alpha=LearningRateSchedule.from_dict(agent["alpha"]),
        eta=float(agent["eta"]), floor_warmup_steps=agent["floor_warmup_steps"], eps0=float(agent["eps0"]),
        eps_min=float(agent["eps_min"]), decay_fraction=float(agent["decay_fraction"]),
        episodes=int(agent["episodes"]), seed=int(agent["seed"]))


def write_q_table(path: Path, Q: np.ndarray, config: dict):
    with _writer(path) as fh:
        fh.write(_config_header(config))
        fh.write("state_index,action_index,value\n")
        for s in range(Q.shape[0]):
            for a in range(Q.shape[1]):
                fh.write(f"{s},{a},{_fmt(Q[s, a])}\n")


def read_q_table(path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("state_index"):
            continue
        s, a, v = line.split(",")
        rows.append((int(s), int(a), float(v)))
    if not rows:
        raise ConfigError(f"empty Q table {path}")
    n_s = max(r[0] for r in rows) + 1
    n_a = max(r[1] for r in rows) + 1
    Q = np.zeros((n_s, n_a))
    for s, a, v in rows:
        Q[s, a] = v
    return Q


def run_gridworld(env: envs.GridWorldConfig, cfg: dict, threads: int = 1, no_wind: bool = False):
    index = envs.GridIndex(env.grid)
    calm = envs.GridWorldConfig(env.grid, 0.0, env.step_limit, env.water_reward, env.goal_reward, env.seed)

    def one(beta):
        agent = _agent_config(cfg["agent"], beta)
        try:
            Q, train_log = agents.train(env, agent)
        except FloatingPointError as exc:
            return beta, None, {"beta": beta, "error": str(exc)}
        rep = agents.evaluate(Q, env, cfg["n_rollouts"], agent)
        row = {"beta": beta, "mean_return": rep.mean_return, "violation_fraction": rep.violation_fraction,
               "goal_rate": rep.goal_rate, "mean_water_distance": rep.mean_water_distance,
               "train_tail_return": float(np.mean(train_log.returns[-1000:])) if len(train_log) else 0.0,
               "visitation": rep.visitation_grid.tolist(),
               "greedy_path_no_wind": [list(c) for c in agents.greedy_path(Q, env)]}
        if no_wind:
            calm_rep = agents.evaluate(Q, calm, cfg["n_rollouts"], agent)
            row["no_wind"] = {"mean_return": calm_rep.mean_return,
                              "violation_fraction": calm_rep.violation_fraction,
                              "goal_rate": calm_rep.goal_rate,
                              "mean_water_distance": calm_rep.mean_water_distance,
                              "visitation": calm_rep.visitation_grid.tolist()}
        return beta, Q, row

    results = _parallel_map(one, cfg["betas"], threads)
    return index, results


def cmd_gridworld(args) -> int:
    base_dir = Path(args.config).parent if args.config else Path(".")
    env, cfg = resolve_gridworld_config(_load_config(args.config), base_dir)
    if args.q_dir:
        cfg["q_dir"] = args.q_dir
    cfg["no_wind"] = bool(args.no_wind)
    start = time.perf_counter()
    _, results = run_gridworld(env, cfg, _thread_count(args.threads), args.no_wind)
    log.info("gridworld: %d agents in %.2fs", len(results), time.perf_counter() - start)
    rows = [row for _, _, row in results]
    failed = [row for row in rows if "error" in row]
    for row in failed:
        log.error("beta=%s aborted: %s", row["beta"], row["error"])
    if cfg["q_dir"]:
        for beta, Q, _ in results:
            if Q is not None:
                write_q_table(Path(cfg["q_dir"]) / f"q_beta_{beta:+.3f}.csv", Q, dict(cfg, beta=beta))
    out = Path(args.out or "gridworld." + args.format)
    if args.format == "csv":
        with _writer(out) as fh:
            fh.write(_config_header(cfg))
            fh.write("beta,condition,mean_return,violation_fraction,goal_rate,mean_water_distance\n")
            for row in rows:
                if "error" in row:
                    continue
                conds = [("wind", row)] + ([("no_wind", row["no_wind"])] if "no_wind" in row else [])
                for name, r in conds:
                    fh.write(f"{_fmt(row['beta'])},{name},{_fmt(r['mean_return'])},"
                             f"{_fmt(r['violation_fraction'])},{_fmt(r['goal_rate'])},"
                             f"{_fmt(r['mean_water_distance'])}\n")
        _dump_json(_sidecar(out, ".visitation.json"), {
            "config": cfg,
            "visitation": {repr(row["beta"]): row["visitation"] for row in rows if "error" not in row}})
    else:
        _dump_json(out, {"config": cfg, "results": rows})
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# --------------------------------------------------------------------------
# value iteration

VI_DEFAULTS = {"env": {}, "policy": None, "policy_path": None, "q_path": None,
               "betas": [-2.0, -1.0, 0.0, 1.0, 2.0], "gamma": 0.95, "tol": 1e-10}


def _load_policy(cfg: dict, base_dir: Path, n_states: int) -> np.ndarray:
    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base_dir / p

    if cfg.get("policy") is not None:
        policy = np.asarray(cfg["policy"])
    elif cfg.get("policy_path"):
        data = json.loads(resolve(cfg["policy_path"]).read_text())
        policy = np.asarray(data["policy"] if isinstance(data, dict) else data)
    elif cfg.get("q_path"):
        policy = agents.greedy_policy(read_q_table(resolve(cfg["q_path"])))
    else:
        raise ConfigError("value-iteration needs one of policy, policy_path or q_path")
    if policy.shape not in ((n_states,), (n_states, 4)):
        raise ConfigError(f"policy has shape {policy.shape} but the map has {n_states} states")
    return policy


def cmd_value_iteration(args) -> int:
    raw = _load_config(args.config)
    _check_keys(raw, VI_DEFAULTS, "value-iteration")
    base_dir = Path(args.config).parent if args.config else Path(".")
    cfg = dict(VI_DEFAULTS)
    cfg.update(raw)
    try:
        env = envs.GridWorldConfig.from_dict(dict(cfg["env"]), base_dir)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"invalid env config: {exc}") from exc
    cfg["betas"] = sorted(_betas(cfg["betas"], VI_DEFAULTS["betas"]))
    mdp = envs.enumerate_mdp(env, float(cfg["gamma"]))
    try:
        policy = _load_policy(cfg, base_dir, mdp.index.n_states)
        chain = mdp.induced_chain(policy)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid policy: {exc}") from exc
    cfg["policy"] = policy.tolist()
    cfg["env"] = env.to_dict()
    values = {b: oracle.risk_sensitive_value_iteration(chain, b, tol=float(cfg["tol"])) for b in cfg["betas"]}
    linear = oracle.linear_solve_values(chain)
    stacked = np.array([values[b] for b in cfg["betas"]])
    monotone = bool(np.all(np.diff(stacked, axis=0) >= -1e-9))
    checks = {"nondecreasing_in_beta": monotone}
    if 0.0 in values:
        checks["beta0_matches_linear_solve"] = bool(np.max(np.abs(values[0.0] - linear)) <= 1e-8)
    out = Path(args.out or "values." + args.format)
    cells = mdp.index.cells
    if args.format == "csv":
        with _writer(out) as fh:
            fh.write(_config_header(cfg))
            fh.write("state_index,row,col,beta,value\n")
            for b in cfg["betas"]:
                for s, (r, c) in enumerate(cells):
                    fh.write(f"{s},{r},{c},{_fmt(b)},{_fmt(values[b][s])}\n")
    else:
        _dump_json(out, {"config": cfg, "states": [list(c) for c in cells], "checks": checks,
                         "linear_solve": linear.tolist(),
                         "values": {repr(b): values[b].tolist() for b in cfg["betas"]}})
    return EXIT_OK if all(checks.values()) else EXIT_CHECK_FAILED


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsfe", description="Risk-sensitive free-energy learning experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output path")
        p.add_argument("--format", choices=("csv", "json"), default="json")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default $RSFE_THREADS or 1)")

    p = sub.add_parser("estimate", help="online free-energy estimation sweep")
    common(p)
    p.set_defaults(func=cmd_estimate, format="csv")
    p = sub.add_parser("oracle", help="numerical verification suite")
    common(p)
    p.add_argument("--corrupt-sigmoid", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("gridworld", help="train and evaluate tabular agents per beta")
    common(p)
    p.add_argument("--no-wind", action="store_true", help="also evaluate every agent with the wind off")
    p.add_argument("--q-dir", help="directory for trained Q tables (CSV)")
    p.set_defaults(func=cmd_gridworld)
    p = sub.add_parser("value-iteration", help="exact risk-sensitive values of a gridworld policy")
    common(p)
    p.set_defaults(func=cmd_value_iteration)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"rsfe {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
