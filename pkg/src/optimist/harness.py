"""Episode execution, oracle gap accounting, batch runs and certification."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .agents import (DISTANCE_TOL, Cover, CoverVerificationError, OptimisticAgent, build_cover,
                     make_agent, pairwise_distances)
from .classes import ClassFileError, EnvironmentClass, env_from_dict, resolve_class
from .config import ConfigError, ExperimentConfig
from .core import History, horizon_for_epsilon, truncation_error_bound, value_bound
from .environments import (EnvironmentModel, ParametricEnvFamily, dtilde_horizon, sample_index,
                           tv_distance_horizon)
from .oracle import _vectorizable, induced_policy, oracle_gap, oracle_gap_batch
from .planning import EmptyClassError, Planner, PlanningBudgetExceeded

TRACE_KEYS = ("t", "action", "obs", "reward", "alive", "chosen", "v_opt", "v_agent", "gap",
              "excluded", "logratio_true")
DET_SLACK = 1e-9
MC_SIGMAS = 3.0


@dataclass
class TraceRecord:
    """One step.  Gap fields describe the history the action was chosen on."""

    t: int
    action: int
    obs: int
    reward: float
    alive: int
    chosen: str
    chosen_value: float
    v_opt: Optional[float] = None
    v_agent: Optional[float] = None
    gap: Optional[float] = None
    gap_se: Optional[float] = None
    excluded: list = field(default_factory=list)
    logratio_true: Optional[float] = None
    radius: Optional[float] = None
    true_considered: Optional[bool] = None

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in TRACE_KEYS}
        lr = d["logratio_true"]
        if lr is not None and not math.isfinite(lr):
            d["logratio_true"] = None
        return d


@dataclass
class RunSummary:
    run: int
    seed: int
    true_env: str
    steps: int
    T_opt: Optional[int]
    counts: dict
    excluded: bool
    K: int
    empty_class: bool = False
    settled: dict = field(default_factory=dict)
    covered: Optional[bool] = None
    radius_monotone: Optional[bool] = None
    measured: int = 0
    monte_carlo: bool = False


# --- experiment setup ------------------------------------------------------------

@dataclass
class ExperimentSetup:
    """Everything a run needs that does not depend on the run index."""

    config: ExperimentConfig
    env_class: EnvironmentClass
    members: list
    names: list
    family: Optional[ParametricEnvFamily]
    planner: Planner
    distances: Optional[np.ndarray] = None
    cover: Optional[Cover] = None

    @property
    def kind(self) -> str:
        return self.config.agent.kind

    def new_agent(self) -> OptimisticAgent:
        return make_agent(self.config.agent, self.members, self.names, family=self.family,
                          H=self.config.H, planner=self.planner, distances=self.distances)

    def true_env(self, run_index: int, rng: Optional[np.random.Generator] = None
                 ) -> tuple[EnvironmentModel, Optional[int]]:
        """The run's true environment and its index among the agent's members (None if absent)."""
        sel = self.config.true_env
        n = len(self.members)
        if isinstance(sel, bool):
            raise ConfigError(f"true_env: cannot interpret {sel!r}")
        if isinstance(sel, int):
            if not 0 <= sel < n:
                raise ConfigError(f"true_env index {sel} out of range for a class of {n}")
            return self.members[sel], sel
        if sel == "cycle":
            return self.members[run_index % n], run_index % n
        if sel == "uniform" or (isinstance(sel, dict) and sel.get("param") == "uniform"):
            rng = rng if rng is not None else np.random.default_rng(self.config.seed_for(run_index))
            if self.kind == "compact_cover":
                fam = self.family
                theta = tuple(float(x) for x in rng.uniform(fam.lower, fam.upper))
                return fam.instantiate(theta), None
            i = int(rng.integers(n))
            return self.members[i], i
        if isinstance(sel, str):
            if sel in self.names:
                i = self.names.index(sel)
                return self.members[i], i
            raise ConfigError(f"true_env: no environment named {sel!r} in the class")
        if isinstance(sel, dict) and "param" in sel:
            if self.family is None:
                raise ConfigError("true_env.param needs a parametric family in the class")
            try:
                env = self.family.instantiate(sel["param"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"true_env.param: {exc}") from None
            return self._check_member(env)
        if isinstance(sel, dict) and "environment" in sel:
            try:
                env = env_from_dict(sel["environment"], self.env_class.alphabets)
            except (ClassFileError, ValueError, KeyError) as exc:
                raise ConfigError(f"true_env.environment: {exc}") from None
            return self._check_member(env)
        raise ConfigError(f"true_env: cannot interpret {sel!r}")

    def _check_member(self, env) -> tuple[EnvironmentModel, Optional[int]]:
        for i, m in enumerate(self.members):
            if m.same_kernel(env):
                return m, i
        if self.kind == "compact_cover":
            if self.proxies(env, None):
                return env, None
            raise ConfigError(f"true environment {env.name!r} is not within the cover radius "
                              f"of any center")
        raise ConfigError(f"true environment {env.name!r} is not a member of the class")

    def proxies(self, env, index: Optional[int]) -> list[int]:
        """Members standing in for the true environment when judging exclusion."""
        if index is not None:
            return [index]
        if self.cover is None:
            return []
        H = self.cover.H
        return [i for i, c in enumerate(self.members)
                if dtilde_horizon(env, c, H) <= self.cover.radius + DISTANCE_TOL]


def prepare(config: ExperimentConfig) -> ExperimentSetup:
    """Resolve the class and agent members; raise ``ConfigError`` on any inconsistency."""
    try:
        cls = resolve_class(config.class_source)
    except FileNotFoundError as exc:
        raise ConfigError(f"class: file not found: {exc.filename}") from None
    kind = config.agent.kind
    planner = Planner(config.gamma, config.agent.node_budget)
    family = cls.families[0].family if cls.families else None
    distances = cover = None
    if kind in ("compact_radius", "compact_cover"):
        if family is None:
            raise ConfigError(f"agent kind {kind} needs a parametric family in the class")
        if kind == "compact_radius":
            members = list(cls.families[0].members)
            if not members:
                raise ConfigError("compact_radius needs a family grid (grid.step or grid.points)")
            distances = pairwise_distances(members, config.H)
        else:
            try:
                cover = build_cover(family, config.agent.cover_epsilon, config.gamma, config.H)
            except CoverVerificationError as exc:
                raise ConfigError(f"cover: {exc}") from None
            members = list(cover.centers)
    else:
        members = cls.members
    if not members:
        raise ConfigError("class has no environments")
    setup = ExperimentSetup(config, cls, members, [m.name for m in members], family, planner,
                            distances, cover)
    try:
        setup.new_agent()
    except ValueError as exc:
        raise ConfigError(f"agent: {exc}") from None
    sel = config.true_env
    if not (sel == "uniform" or (isinstance(sel, dict) and sel.get("param") == "uniform")):
        setup.true_env(0)
    return setup


# --- episodes ----------------------------------------------------------------------

def _final_quarter_start(T_max: int) -> int:
    return T_max - math.ceil(T_max / 4) + 1


def _measure(window: str, t: int, T_max: int) -> bool:
    if window == "all":
        return True
    if window == "final_quarter":
        return t >= _final_quarter_start(T_max)
    return False


def run_streams(seed: int) -> tuple[np.random.Generator, ...]:
    """Independent (environment, gap-estimation, selection) streams of one run."""
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))


def run_episode(config: ExperimentConfig, run_index: int,
                setup: Optional[ExperimentSetup] = None) -> tuple[list[TraceRecord], RunSummary]:
    """Run one episode of ``config``; a pure function of (config, run_index)."""
    setup = setup or prepare(config)
    seed = config.seed_for(run_index)
    env_rng, gap_rng, sel_rng = run_streams(seed)
    mu, mu_index = setup.true_env(run_index, sel_rng)
    proxies = setup.proxies(mu, mu_index)
    agent = setup.new_agent()
    alph = mu.alphabets
    ell = agent.horizon
    names = setup.names
    h = History.empty()
    s_mu = mu.initial_state()
    trace: list[TraceRecord] = []
    excluded = empty = False
    mc = False
    # threshold agents over tabular classes: all of a run's gap snapshots go
    # through one batched rollout after the episode
    batched = _vectorizable(agent, mu)
    deferred: list = []
    for t in range(1, config.T_max + 1):
        est = None
        if _measure(config.gap_window, t, config.T_max):
            if batched:
                deferred.append((len(trace), agent.state.copy(), s_mu))
            else:
                est = oracle_gap(mu, agent, h, ell, config.rollouts, gap_rng,
                                 planner=setup.planner, true_state=s_mu)
                mc = mc or est.rollouts > 1
        try:
            a = agent.act(h)
        except EmptyClassError:
            empty = True
            excluded = True
            break
        plan = agent.last_plan
        k = sample_index(mu.percept_probs(s_mu, a), env_rng.random())
        percept = alph.percept_at(k)
        h = h.append(a, percept)
        s_mu = mu.next_state(s_mu, a, k)
        considered = agent.state.considered
        gone = agent.observe(h)
        st = agent.state
        if proxies and not st.alive[proxies].any():
            excluded = True
        logratio = None
        if proxies and hasattr(agent, "z"):
            ll = st.likelihoods.log_likelihoods
            logratio = float(ll[proxies].max() - ll.max())
        rec = TraceRecord(
            t=t, action=a, obs=percept.observation, reward=alph.reward_of(k),
            alive=int(st.alive.sum()), chosen=names[plan.env_index], chosen_value=plan.value,
            excluded=[names[i] for i in gone], logratio_true=logratio)
        if est is not None:
            rec.v_opt, rec.v_agent, rec.gap, rec.gap_se = est.v_opt, est.v_agent, est.gap, est.se
        if hasattr(agent, "radius_trace"):
            rec.radius = agent.radius
            if mu_index is not None and considered is not None:
                rec.true_considered = bool(considered[mu_index])
        trace.append(rec)
    if deferred:
        ests = oracle_gap_batch(mu, agent, [(st, x) for _, st, x in deferred], ell,
                                config.rollouts, gap_rng, planner=setup.planner)
        for (i, _, _), est in zip(deferred, ests):
            if i < len(trace):
                r = trace[i]
                r.v_opt, r.v_agent, r.gap, r.gap_se = est.v_opt, est.v_agent, est.gap, est.se
        mc = True
    summary = summarize(trace, config, run_index, seed, mu.name, excluded, empty, mc, ell)
    return trace, summary


def gap_slack(rec: TraceRecord, monte_carlo: bool, trunc: float) -> float:
    if monte_carlo:
        return MC_SIGMAS * (rec.gap_se or 0.0) + DET_SLACK
    return 2.0 * trunc + DET_SLACK


def summarize(trace: Sequence[TraceRecord], config: ExperimentConfig, run_index: int, seed: int,
              true_name: str, excluded: bool, empty: bool, monte_carlo: bool,
              ell: int) -> RunSummary:
    trunc = truncation_error_bound(ell, config.gamma)
    eps_min = min(config.epsilons)
    measured = [r for r in trace if r.gap is not None]
    T_opt = None
    if measured:
        if monte_carlo:
            bad = [r.t for r in measured if r.gap > eps_min + gap_slack(r, True, trunc)]
        else:
            bad = [r.t for r in measured if r.gap > gap_slack(r, False, trunc)]
        T_opt = (bad[-1] + 1) if bad else measured[0].t
    counts = {e: sum(1 for r in measured if r.gap > e + gap_slack(r, monte_carlo, trunc))
              for e in config.epsilons}
    start = _final_quarter_start(config.T_max)
    tail = [r for r in measured if r.t >= start]
    settled = {}
    for e in config.epsilons:
        if empty or len(trace) < config.T_max:
            settled[e] = False
        elif not tail:
            settled[e] = None
        else:
            settled[e] = all(r.gap <= e + gap_slack(r, monte_carlo, trunc) for r in tail)
    K = sum(len(r.excluded) for r in trace)
    covered = monotone = None
    radii = [r.radius for r in trace if r.radius is not None]
    if radii:
        monotone = all(b <= a for a, b in zip(radii, radii[1:]))
        flags = [r.true_considered for r in trace if r.true_considered is not None]
        covered = all(flags) and not empty if flags else None
    return RunSummary(run_index, seed, true_name, len(trace), T_opt, counts, excluded, K, empty,
                      settled, covered, monotone, len(measured), monte_carlo)


# --- batches -------------------------------------------------------------------------

@dataclass
class BatchResult:
    config: ExperimentConfig
    summaries: list
    failures: list
    aggregate: dict
    files: list = field(default_factory=list)
    traces: Optional[dict] = None


def trace_filename(config: ExperimentConfig, run_index: int) -> str:
    return f"{config.digest()}_run{run_index:04d}.jsonl"


def write_trace(path: Path, trace: Sequence[TraceRecord]) -> None:
    with open(path, "w") as f:
        for r in trace:
            f.write(json.dumps(r.to_json(), sort_keys=False) + "\n")


def read_trace(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


_SETUPS: dict = {}


def _cached_setup(config: ExperimentConfig) -> ExperimentSetup:
    key = config.digest()
    setup = _SETUPS.get(key)
    if setup is None:
        _SETUPS.clear()
        setup = _SETUPS[key] = prepare(config)
    return setup


def _run_one(config: ExperimentConfig, run_index: int, outdir: Optional[str], keep: bool):
    try:
        trace, summary = run_episode(config, run_index, _cached_setup(config))
    except PlanningBudgetExceeded as exc:
        return run_index, None, {"run": run_index, "error": str(exc), "budget": True,
                                 "node_count": exc.node_count}, None
    except Exception as exc:  # a failed run is reported, the batch goes on
        return run_index, None, {"run": run_index, "error": f"{type(exc).__name__}: {exc}",
                                 "budget": False}, None
    if outdir is not None:
        write_trace(Path(outdir) / trace_filename(config, run_index), trace)
    return run_index, summary, None, trace if keep else None


def _run_chunk(config: ExperimentConfig, indices: Sequence[int], outdir, keep):
    return [_run_one(config, i, outdir, keep) for i in indices]


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("OPTIMIST_JOBS", "1")))
    except ValueError:
        return 1


def batch_run(config: ExperimentConfig, jobs: Optional[int] = None, outdir=None,
              keep_traces: bool = False, run_indices: Optional[Sequence[int]] = None) -> BatchResult:
    """All runs of ``config``; optional trace, summary CSV and aggregate JSON files in ``outdir``."""
    indices = list(range(config.runs)) if run_indices is None else list(run_indices)
    if not indices:
        raise ValueError("empty batch: nothing to run")
    _SETUPS.clear()
    _SETUPS[config.digest()] = prepare(config)
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    out = None
    if outdir is not None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
    results = []
    if jobs == 1 or len(indices) == 1:
        results = _run_chunk(config, indices, None if out is None else str(out), keep_traces)
    else:
        chunks = [indices[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = [ex.submit(_run_chunk, config, c, None if out is None else str(out), keep_traces)
                    for c in chunks if c]
            for f in futs:
                results.extend(f.result())
    results.sort(key=lambda r: r[0])
    summaries = [r[1] for r in results if r[1] is not None]
    failures = [r[2] for r in results if r[2] is not None]
    traces = {r[0]: r[3] for r in results if r[3] is not None} if keep_traces else None
    agg = aggregate(summaries, config, failures)
    files = []
    if out is not None:
        files = [str(out / trace_filename(config, s.run)) for s in summaries]
        (out / f"{config.digest()}_summary.csv").write_text(summary_csv(summaries, config.epsilons))
        (out / f"{config.digest()}_aggregate.json").write_text(
            json.dumps(agg, indent=2, sort_keys=True) + "\n")
    return BatchResult(config, summaries, failures, agg, files, traces)


def summary_csv(summaries: Sequence[RunSummary], epsilons: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "T_opt"] + [f"count_{e!r}" for e in epsilons] + ["excluded", "K"])
    for s in sorted(summaries, key=lambda s: s.run):
        w.writerow([s.run, "" if s.T_opt is None else s.T_opt] + [s.counts[e] for e in epsilons]
                   + [int(s.excluded), s.K])
    return buf.getvalue()


def aggregate(summaries: Sequence[RunSummary], config: Optional[ExperimentConfig] = None,
              failures: Sequence[dict] = ()) -> dict:
    """Order-independent batch statistics; reductions run in run-index order."""
    ss = sorted(summaries, key=lambda s: s.run)
    if not ss:
        return {"runs": 0, "failed_runs": list(failures)}
    eps = sorted({e for s in ss for e in s.counts})
    topt = [s.T_opt for s in ss if s.T_opt is not None]
    kept = [s for s in ss if not s.excluded]
    out = {
        "runs": len(ss),
        "failed_runs": list(failures),
        "excluded_runs": sum(s.excluded for s in ss),
        "exclusion_rate": sum(s.excluded for s in ss) / len(ss),
        "empty_class_runs": sum(s.empty_class for s in ss),
        "K_mean": sum(s.K for s in ss) / len(ss),
        "K_max": max(s.K for s in ss),
        "T_opt_max": max(topt) if topt else None,
        "T_opt_mean": sum(topt) / len(topt) if topt else None,
        "counts": {repr(e): {"max": max(s.counts[e] for s in ss),
                             "mean": sum(s.counts[e] for s in ss) / len(ss)} for e in eps},
    }
    settled = {}
    for e in eps:
        flags = [s.settled.get(e) for s in kept if s.settled.get(e) is not None]
        settled[repr(e)] = sum(flags) / len(flags) if flags else None
    out["settled_fraction"] = settled
    cov = [s.covered for s in ss if s.covered is not None]
    out["coverage_fraction"] = sum(cov) / len(cov) if cov else None
    mono = [s.radius_monotone for s in ss if s.radius_monotone is not None]
    out["radius_monotone_runs"] = sum(mono) if mono else None
    if config is not None:
        out["config_digest"] = config.digest()
        out["name"] = config.name
    return out


# --- certification ------------------------------------------------------------------

@dataclass
class Verdict:
    passed: bool
    lines: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def report(self) -> str:
        return "\n".join(self.warnings + self.lines + [f"verdict: {'PASS' if self.passed else 'FAIL'}"])


def error_count_bounds(epsilon: float, num_envs: int, gamma: float) -> tuple[int, float, int]:
    """(|M| l_eps, |M| log(eps(1-gamma))/(gamma-1), l_eps); zero when eps covers the value range."""
    if epsilon >= value_bound(gamma):
        return 0, 0.0, 0
    ell = horizon_for_epsilon(epsilon, gamma)
    relaxed = max(0.0, num_envs * math.log(epsilon * (1.0 - gamma)) / (gamma - 1.0))
    return num_envs * ell, relaxed, ell


def certify_det_bound(summaries: Sequence[RunSummary], epsilon: float, num_envs: int,
                      gamma: float) -> Verdict:
    tight, relaxed, ell = error_count_bounds(epsilon, num_envs, gamma)
    v = Verdict(True, details={"tight": tight, "relaxed": relaxed, "ell": ell})
    if not summaries:
        return Verdict(False, ["no runs to certify"])
    worst_tight = worst_relaxed = math.inf
    for s in sorted(summaries, key=lambda s: s.run):
        c = s.counts[epsilon]
        ok = c <= tight and c <= relaxed and c <= ell * s.K
        worst_tight = min(worst_tight, tight - c)
        worst_relaxed = min(worst_relaxed, relaxed - c)
        if not ok:
            v.passed = False
            v.lines.append(f"run {s.run}: count {c} exceeds a bound (|M|l={tight}, "
                           f"relaxed={relaxed:.4g}, l*K={ell * s.K})")
    v.details.update(margin_tight=worst_tight, margin_relaxed=worst_relaxed)
    v.lines.append(f"eps={epsilon:g}: max count {max(s.counts[epsilon] for s in summaries)}, "
                   f"bound |M|l={tight} (margin {worst_tight}), relaxed {relaxed:.4f} "
                   f"(margin {worst_relaxed:.4f})")
    return v


def exclusion_threshold(z: float, num_envs: int, runs: int) -> float:
    q = z * (num_envs - 1)
    sigma = math.sqrt(q * (1.0 - q) / runs) if 0.0 < q < 1.0 else 0.0
    return q + MC_SIGMAS * sigma


def certify_stoch(summaries: Sequence[RunSummary], z: float, num_envs: int, epsilon: float,
                  settle_fraction: float = 0.95) -> Verdict:
    if not summaries:
        return Verdict(False, ["no runs to certify"])
    n = len(summaries)
    rate = sum(s.excluded for s in summaries) / n
    thr = exclusion_threshold(z, num_envs, n)
    v = Verdict(True)
    if z * (num_envs - 1) >= 1.0:
        v.warnings.append(f"warning: z(|M|-1) = {z * (num_envs - 1):g} >= 1, the exclusion "
                          f"guarantee is vacuous")
    ok_a = rate <= thr
    v.lines.append(f"exclusion rate {rate:.4f} <= {thr:.4f}: {'ok' if ok_a else 'FAIL'}")
    kept = [s for s in summaries if not s.excluded]
    flags = [s.settled.get(epsilon) for s in kept if s.settled.get(epsilon) is not None]
    frac = sum(flags) / len(flags) if flags else None
    vacuous = z * (num_envs - 1) >= 1.0
    if frac is None:
        ok_b = vacuous or not kept
        v.lines.append("settled fraction: no final-quarter gaps measured")
    else:
        ok_b = frac >= settle_fraction
        v.lines.append(f"settled fraction (eps={epsilon:g}) {frac:.4f} >= {settle_fraction:g}: "
                       f"{'ok' if ok_b else 'FAIL'}")
    v.passed = ok_a and ok_b
    v.details = {"exclusion_rate": rate, "threshold": thr, "settled_fraction": frac,
                 "non_excluded": len(kept)}
    return v


# --- property checks on traces ------------------------------------------------------

@dataclass
class ConsistencyRow:
    t: int
    committed_value: float
    liberal_value: float
    ok: bool


def time_consistency_rows(config: ExperimentConfig, run_index: int,
                          setup: Optional[ExperimentSetup] = None) -> list[ConsistencyRow]:
    """Committed value vs fresh optimistic maximum while no exclusion has followed commitment."""
    setup = setup or prepare(config)
    if setup.kind != "conservative":
        raise ValueError("time-consistency check runs the conservative agent")
    env_rng, _, sel_rng = run_streams(config.seed_for(run_index))
    mu, _ = setup.true_env(run_index, sel_rng)
    agent = setup.new_agent()
    ell, planner = agent.horizon, setup.planner
    tol = DET_SLACK + 2.0 * truncation_error_bound(ell, config.gamma)
    h = History.empty()
    s_mu = mu.initial_state()
    rows = []
    for _ in range(config.T_max):
        st = agent.state
        c = st.committed
        if c is not None and st.alive[c] and st.last_exclusion_t <= st.committed_at:
            states = st.likelihoods.env_states
            free = planner.optimistic_choice(agent.envs, h, ell, states=states,
                                             indices=st.alive_indices())
            mine, _ = planner.solve(agent.envs[c], states[c], ell)
            rows.append(ConsistencyRow(len(h), mine, free.value, abs(free.value - mine) <= tol))
        a = agent.act(h)
        k = sample_index(mu.percept_probs(s_mu, a), env_rng.random())
        h = h.append(a, mu.alphabets.percept_at(k))
        s_mu = mu.next_state(s_mu, a, k)
        agent.observe(h)
    return rows


@dataclass
class ChainRow:
    t: int
    env: str
    value_diff: float
    bound: float
    ok: bool


def value_tv_chain_rows(config: ExperimentConfig, run_index: int, steps: int = 20,
                        setup: Optional[ExperimentSetup] = None) -> list[ChainRow]:
    """|V_nu - V_mu| of the agent's own policy against the TV bound at sampled steps."""
    setup = setup or prepare(config)
    env_rng, _, sel_rng = run_streams(config.seed_for(run_index))
    pick_rng = np.random.default_rng([config.seed_for(run_index), 7])
    mu, _ = setup.true_env(run_index, sel_rng)
    agent = setup.new_agent()
    ell, g, planner = agent.horizon, config.gamma, setup.planner
    slack = 2.0 * truncation_error_bound(ell, g)
    chosen = set(pick_rng.choice(config.T_max, size=min(steps, config.T_max), replace=False).tolist())
    h = History.empty()
    s_mu = mu.initial_state()
    rows = []
    for t in range(config.T_max):
        if t in chosen:
            for i in agent.state.alive_indices():
                nu = agent.envs[i]
                tree = induced_policy(agent, h, ell, support=[nu, mu])
                v_nu = planner.policy_value(nu, tree, h, ell)
                v_mu = planner.policy_value(mu, tree, h, ell, state=s_mu)
                tv = tv_distance_horizon(nu, mu, h, tree, ell)
                bound = tv / (1.0 - g) + slack
                diff = abs(v_nu - v_mu)
                rows.append(ChainRow(len(h), agent.names[i], diff, bound, diff <= bound + DET_SLACK))
        try:
            a = agent.act(h)
        except EmptyClassError:
            break
        k = sample_index(mu.percept_probs(s_mu, a), env_rng.random())
        h = h.append(a, mu.alphabets.percept_at(k))
        s_mu = mu.next_state(s_mu, a, k)
        agent.observe(h)
    return rows


def summary_dict(s: RunSummary) -> dict:
    d = asdict(s)
    d["counts"] = {repr(k): v for k, v in s.counts.items()}
    d["settled"] = {repr(k): v for k, v in s.settled.items()}
    return d
