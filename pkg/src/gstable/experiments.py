"""Monte Carlo experiment engine: scenario configuration, replication runs
with per-replication seed streams, LAN and limit-ratio diagnostics, the total
variation rate study, and deterministic tabular output.

Output contract: every per-replication row carries the scenario hash and its
seed key; aggregates are recomputed from the (sorted) rows, so sharded
parallel runs merge to byte-identical results.
"""
from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import info_levy, prop_tout_check, rate_matrix
from .convolution import Theta
from .errors import BadScenario
from .estimate import (_Problem, initial_theta, mle_levy, qmle_sde,
                       read_increments, write_increments)
from .simulate import (PathSample, SdeModel, TemperingSpec, default_sde_model,
                       replication_rng, sample_coupled_stable_pair, sample_levy_path,
                       sample_sde_path)

_Z95 = 1.959963984540054


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    model: str                      # "levy" | "sde"
    theta0: Theta
    n_list: tuple
    R: int
    seed: int
    tau: TemperingSpec | None = None
    outputs: str = "out"
    m: int = 32                     # Euler refinement (sde only)
    init_mode: str = "perturb"      # "perturb" (10% around theta0) | "auto"

    def __post_init__(self):
        if self.model not in ("levy", "sde"):
            raise BadScenario(f"unknown model {self.model!r}")
        if self.R < 1:
            raise BadScenario("need R >= 1")
        if any(n < 16 for n in self.n_list):
            raise BadScenario("all n must be >= 16")
        if self.model == "sde" and self.tau is None:
            object.__setattr__(self, "tau", TemperingSpec("truncation", eta=1.0))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))

    def to_text(self) -> str:
        lines = ["gstable-scenario v1",
                 f"model {self.model}",
                 f"sigma {self.theta0.sigma!r}",
                 f"delta {self.theta0.delta!r}",
                 f"alpha {self.theta0.alpha!r}",
                 "n " + ",".join(str(n) for n in self.n_list),
                 f"R {self.R}",
                 f"seed {self.seed}",
                 f"m {self.m}",
                 f"init {self.init_mode}",
                 f"outputs {self.outputs}"]
        if self.tau is not None:
            lines.append(f"tau {self.tau.kind} {self.tau.eta!r} {self.tau.lam!r} {self.tau.bound!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Scenario":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "gstable-scenario v1":
            raise BadScenario("not a scenario file (missing header)")
        kv = {}
        for ln in lines[1:]:
            key, _, val = ln.partition(" ")
            kv[key] = val
        tau = None
        if "tau" in kv:
            kind, eta, lam, bound = kv["tau"].split()
            tau = TemperingSpec(kind, eta=float(eta), lam=float(lam), bound=float(bound))
        return cls(model=kv["model"],
                   theta0=Theta(float(kv["sigma"]), float(kv["delta"]), float(kv["alpha"])),
                   n_list=tuple(int(x) for x in kv["n"].split(",")),
                   R=int(kv["R"]), seed=int(kv["seed"]), tau=tau,
                   outputs=kv.get("outputs", "out"), m=int(kv.get("m", 32)),
                   init_mode=kv.get("init", "perturb"))

    def hash(self) -> str:
        """Experiment identity: all fields except the output location."""
        body = "\n".join(ln for ln in self.to_text().splitlines()
                         if not ln.startswith("outputs "))
        return hashlib.sha256(body.encode()).hexdigest()[:16]


ROW_COLUMNS = ("rep", "n", "ok", "converged", "iterations",
               "sigma_hat", "delta_hat", "alpha_hat",
               "e1", "e2", "e3", "s1", "s2", "s3", "os1", "os2", "os3",
               "cover1", "cover2", "cover3",
               "score1", "score2", "score3", "scenario", "seed_key")


@dataclass
class ExperimentRecord:
    scenario_hash: str
    rows: list = field(default_factory=list)

    def add(self, row: dict):
        self.rows.append(row)

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (r["n"], r["rep"]))

    def to_csv(self) -> str:
        out = [",".join(ROW_COLUMNS)]
        for r in self.sorted_rows():
            out.append(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c])
                                for c in ROW_COLUMNS))
        return "\n".join(out) + "\n"

    def aggregates(self, theta0: Theta | None = None) -> dict:
        """Recomputable bit-exactly from the sorted rows."""
        agg = {}
        for n in sorted({r["n"] for r in self.rows}):
            rows = [r for r in self.sorted_rows() if r["n"] == n]
            ok = [r for r in rows if r["ok"] and r["converged"]]
            a = {"R": len(rows), "n_converged": len(ok),
                 "failure_rate": 1.0 - len(ok) / len(rows)}
            if ok:
                E = np.array([[r["e1"], r["e2"], r["e3"]] for r in ok])
                S = np.array([[r["s1"], r["s2"], r["s3"]] for r in ok])
                a["err_mean"] = E.mean(axis=0)
                a["err_cov"] = np.cov(E.T) if len(ok) > 2 else np.full((3, 3), np.nan)
                a["stud_mean"] = S.mean(axis=0)
                a["stud_cov"] = np.cov(S.T) if len(ok) > 2 else np.full((3, 3), np.nan)
                a["coverage"] = np.array([np.mean([float(r[f"cover{j}"]) for r in ok])
                                          for j in (1, 2, 3)])
                G = np.array([[r["score1"], r["score2"], r["score3"]] for r in rows if r["ok"]])
                a["score_mean"] = G.mean(axis=0)
                a["score_cov"] = np.cov(G.T)
            agg[n] = a
        return agg


# ---------------------------------------------------------------------------
# one replication
# ---------------------------------------------------------------------------

def _model_for(scn: Scenario) -> SdeModel | None:
    return default_sde_model() if scn.model == "sde" else None


def _simulate_one(scn: Scenario, n: int, rep: int) -> PathSample:
    rng = replication_rng(scn.seed, rep * 131071 + int(math.log2(max(n, 2))))
    if scn.model == "levy":
        path = sample_levy_path(scn.theta0, n, rng)
    else:
        path = sample_sde_path(_model_for(scn), scn.theta0, scn.tau, n, scn.m, rng)
    path.seed = {"master": scn.seed, "rep": rep, "n": n}
    return path


def _score_at_theta0(path: PathSample, scn: Scenario, n: int) -> np.ndarray:
    prob = _Problem(path, _model_for(scn))
    u = rate_matrix(scn.theta0, n).M
    return u.T @ prob.score(scn.theta0)


def _estimate_one(scn: Scenario, n: int, rep: int, path: PathSample | None = None) -> dict:
    row = {c: float("nan") for c in ROW_COLUMNS}
    row.update(rep=rep, n=n, ok=0, converged=0, iterations=0,
               scenario=scn.hash(), seed_key=f"{scn.seed}:{rep}")
    try:
        if path is None:
            path = _simulate_one(scn, n, rep)
        rng = replication_rng(scn.seed, rep * 131071 + 777)
        if scn.init_mode == "perturb":
            init = Theta(*(scn.theta0.as_array() * (1.0 + 0.1 * (2.0 * rng.random(3) - 1.0))))
        else:
            init = initial_theta(path, _model_for(scn))
        res = (mle_levy(path, init) if scn.model == "levy"
               else qmle_sde(path, _model_for(scn), init))
        th = res.theta_hat
        uinv = rate_matrix(scn.theta0, n).inverse
        err = uinv @ (th.as_array() - scn.theta0.as_array())
        evals, evecs = np.linalg.eigh(res.info_used.M)
        info_sqrt = evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0))) @ evecs.T
        stud = info_sqrt @ err
        # second studentization by the observed normalized information
        oe, ov = np.linalg.eigh(np.linalg.pinv(res.cov_hat))
        stud_obs = (ov @ np.diag(np.sqrt(np.maximum(oe, 0.0))) @ ov.T) @ err
        se = np.sqrt(np.diag(res.theta_cov(n)))
        cover = np.abs(th.as_array() - scn.theta0.as_array()) <= _Z95 * se
        score = _score_at_theta0(path, scn, n)
        row.update(ok=1, converged=int(res.converged), iterations=res.iterations,
                   sigma_hat=float(th.sigma), delta_hat=float(th.delta),
                   alpha_hat=float(th.alpha),
                   e1=float(err[0]), e2=float(err[1]), e3=float(err[2]),
                   s1=float(stud[0]), s2=float(stud[1]), s3=float(stud[2]),
                   os1=float(stud_obs[0]), os2=float(stud_obs[1]), os3=float(stud_obs[2]),
                   score1=float(score[0]), score2=float(score[1]), score3=float(score[2]),
                   cover1=int(cover[0]), cover2=int(cover[1]), cover3=int(cover[2]))
    except Exception as exc:   # failure isolation: never abort the batch
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _estimate_task(args):
    scn_text, n, rep, data_file = args
    scn = Scenario.from_text(scn_text)
    path = read_increments(data_file) if data_file else None
    return _estimate_one(scn, n, rep, path)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(scn: Scenario, out_dir: str | None = None) -> list[str]:
    """Write one increments file per replication plus a manifest."""
    out_dir = out_dir or scn.outputs
    os.makedirs(out_dir, exist_ok=True)
    files = []
    manifest = [f"scenario {scn.hash()}"]
    for n in scn.n_list:
        for rep in range(scn.R):
            path = _simulate_one(scn, n, rep)
            fname = os.path.join(out_dir, f"inc_n{n}_r{rep:04d}.txt")
            write_increments(fname, path.increments)
            digest = hashlib.sha256(open(fname, "rb").read()).hexdigest()[:16]
            manifest.append(f"{os.path.basename(fname)} {digest}")
            files.append(fname)
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write("\n".join(manifest) + "\n")
        fh.write("--- scenario ---\n")
        fh.write(scn.to_text())
    return files


def cmd_estimate(scn: Scenario, data_files: list[str] | None = None,
                 workers: int = 1, out_dir: str | None = None) -> ExperimentRecord:
    """Estimate over all replications; per-replication failures are recorded,
    never raised."""
    rec = ExperimentRecord(scenario_hash=scn.hash())
    tasks = []
    if data_files:
        for rep, f in enumerate(sorted(data_files)):
            n = read_increments(f).n
            tasks.append((scn.to_text(), n, rep, f))
    else:
        tasks = [(scn.to_text(), n, rep, None) for n in scn.n_list for rep in range(scn.R)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for row in pool.map(_estimate_task, tasks, chunksize=1):
                rec.add(row)
    else:
        for t in tasks:
            rec.add(_estimate_task(t))
    if out_dir or scn.outputs:
        od = out_dir or scn.outputs
        os.makedirs(od, exist_ok=True)
        with open(os.path.join(od, "estimates.csv"), "w") as fh:
            fh.write(rec.to_csv())
        with open(os.path.join(od, "summary.txt"), "w") as fh:
            fh.write(summarize(rec, scn))
    return rec


def summarize(rec: ExperimentRecord, scn: Scenario) -> str:
    agg = rec.aggregates(scn.theta0)
    out = [f"scenario {rec.scenario_hash} model={scn.model} theta0="
           f"({scn.theta0.sigma!r},{scn.theta0.delta!r},{scn.theta0.alpha!r})"]
    Iref = info_levy(scn.theta0)
    out.append("reference I(theta0)^-1:")
    out.append(np.array2string(np.linalg.inv(Iref.M), precision=6))
    for n, a in agg.items():
        out.append(f"n={n}: R={a['R']} converged={a['n_converged']} "
                   f"failure_rate={a['failure_rate']!r}")
        if "err_mean" in a:
            out.append("  err_mean " + np.array2string(a["err_mean"], precision=6))
            out.append("  err_cov\n" + np.array2string(a["err_cov"], precision=6))
            if a.get("coverage") is not None:
                out.append("  coverage " + np.array2string(a["coverage"], precision=4))
    return "\n".join(out) + "\n"


def cmd_lan_check(theta0: Theta, n_list, h_list, R: int, seed: int = 0,
                  workers: int = 1) -> dict:
    """Monte Carlo check of the quadratic log-likelihood expansion.

    Per replication: ln L(theta0 + u_n h) - ln L(theta0) - h' (u_n' G_n)
    + 0.5 h' I(theta0) h; returns mean and sd per (n, h).
    """
    I0 = info_levy(theta0).M
    results = {}
    for n in n_list:
        u = rate_matrix(theta0, n).M
        thetas_h = []
        for h in h_list:
            th_vec = theta0.as_array() + u @ np.asarray(h, dtype=float)
            if not (th_vec[0] > 0 and th_vec[1] > 0 and 0.05 <= th_vec[2] <= 1.95):
                raise BadScenario(f"theta0 + u_n h leaves the domain for h={h}, n={n}")
            thetas_h.append(Theta(*th_vec))
        rem = np.empty((R, len(h_list)))
        for rep in range(R):
            rng = replication_rng(seed, rep)
            path = sample_levy_path(theta0, n, rng)
            prob = _Problem(path, None)
            ll0 = prob.loglik(theta0)
            G = prob.score(theta0)
            gn = u.T @ G
            for ih, h in enumerate(h_list):
                h = np.asarray(h, dtype=float)
                ll1 = prob.loglik(thetas_h[ih])
                rem[rep, ih] = ll1 - ll0 - h @ gn + 0.5 * h @ I0 @ h
        results[n] = {"mean": rem.mean(axis=0), "sd": rem.std(axis=0, ddof=1),
                      "remainders": rem}
    return results


def family_tail_integral(alpha: float, w: float, klm, Y: float, jmax: int = 4) -> float:
    """Analytic int_{|y|>Y} f^(k,l,m)(y, w) dy from the leading tail terms."""
    from .stable_core import stable_tail_terms
    k, l, m = klm
    if k >= 1:
        return 0.0      # D^k(phi)-weighted moments start at order 2
    lnw = math.log(w)

    def power_log_mass(s: float, q: int, Y: float) -> float:
        # int_Y^inf y^{-s} (ln y - lnw)^q dy by parts
        base = Y ** (1.0 - s) / (s - 1.0)
        if q == 0:
            return base
        return base * (math.log(Y) - lnw) ** q + q / (s - 1.0) * power_log_mass(s, q - 1, Y)

    total = 0.0
    for j in range(1, jmax + 1):
        sj = j * alpha + 1.0
        for q, cq in stable_tail_terms(alpha, l, m, j).items():
            total += w ** (sj - 1.0) * cq * power_log_mass(sj, q, Y)
    return 2.0 * total


def cmd_density_validate(alpha_list, w_list) -> dict:
    """Invariant suite: normalization, evenness, score-integrates-to-zero and
    the density envelope constant, per (alpha, w)."""
    from ._quad import gl_panel_nodes
    from .asymptotics import psi
    from .convolution import family_values
    report = {}
    for a in alpha_list:
        for w in w_list:
            e1 = np.linspace(0.0, 20.0, 81)
            e2 = np.geomspace(20.0, 1e7, 161)
            nodes, wts = gl_panel_nodes(e1, 12)
            nodes2, wts2 = gl_panel_nodes(e2, 12)
            klms = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
            v1 = family_values(a, nodes, w, klms)
            v2 = family_values(a, nodes2, w, klms)
            entry = {}
            entry["normalization"] = (2.0 * (wts @ v1[(0, 0, 0)] + wts2 @ v2[(0, 0, 0)])
                                      + family_tail_integral(a, w, (0, 0, 0), 1e7))
            for name, klm in [("int_g", (1, 0, 0)), ("int_h", (0, 1, 0)), ("int_k", (0, 0, 1))]:
                entry[name] = (2.0 * (wts @ v1[klm] + wts2 @ v2[klm])
                               + family_tail_integral(a, w, klm, 1e7))
            ygrid = np.linspace(-30.0, 30.0, 241)
            f = family_values(a, ygrid, w, [(0, 0, 0)])[(0, 0, 0)]
            env = (np.exp(-0.5 * ygrid ** 2) / math.sqrt(2 * math.pi)
                   + w ** a * psi(a, 0, ygrid))
            entry["envelope_C"] = float(max(np.max(f / env), np.max(env / f)))
            report[(a, w)] = entry
    return report


def cmd_tout_check(theta0: Theta, n_list) -> dict:
    return {n: prop_tout_check(theta0, n) for n in n_list}


def kde_l1_distance(x: np.ndarray, y: np.ndarray, gridsize: int = 1200,
                    qclip: float = 0.001) -> float:
    """L1 distance between Gaussian-kernel density estimates of two samples,
    evaluated on a shared grid covering the central mass; mass lost outside
    the grid enters as |p_out_x - p_out_y|."""
    pooled = x
    lo, hi = np.quantile(pooled, [qclip, 1.0 - qclip])
    grid = np.linspace(lo, hi, gridsize)
    dx = grid[1] - grid[0]
    iqr = np.quantile(x, 0.75) - np.quantile(x, 0.25)
    h = max(0.9 * min(np.std(x), iqr / 1.34) * len(x) ** -0.2, 2.0 * dx)
    edges = np.append(grid - dx / 2, grid[-1] + dx / 2)
    hx, _ = np.histogram(x, bins=edges)
    hy, _ = np.histogram(y, bins=edges)
    kw = int(4 * h / dx)
    kern = np.exp(-0.5 * (np.arange(-kw, kw + 1) * dx / h) ** 2)
    kern /= kern.sum()
    fx = np.convolve(hx, kern, mode="same") / (len(x) * dx)
    fy = np.convolve(hy, kern, mode="same") / (len(y) * dx)
    out_x = 1.0 - hx.sum() / len(x)
    out_y = 1.0 - hy.sum() / len(y)
    return float(np.sum(np.abs(fx - fy)) * dx + abs(out_x - out_y))


def cmd_tv_study(alpha: float, tau: TemperingSpec, n_list, R: int = 4,
                 count: int = 100_000, seed: int = 0) -> dict:
    """Kernel-density L1 proxy for d_TV(n^{1/alpha} L_{1/n}, S_1) per n, with
    the coupled construction cancelling shared Monte Carlo noise; returns the
    distances and the fitted log-log slope."""
    dists = []
    for n in n_list:
        acc = 0.0
        for rep in range(R):
            rng = replication_rng(seed, 100000 + rep)
            S, L = sample_coupled_stable_pair(alpha, tau, int(n), count, rng)
            acc += kde_l1_distance(S, L)
        dists.append(acc / R)
    ln_n = np.log(np.asarray(n_list, dtype=float))
    slope = float(np.polyfit(ln_n, np.log(np.maximum(dists, 1e-300)), 1)[0])
    return {"n_list": list(n_list), "distances": dists, "slope": slope}
