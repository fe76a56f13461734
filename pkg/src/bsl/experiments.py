"""Experiment configurations and the batch runners behind the CLI.

Every run is a pure function of its :class:`ExperimentConfig` (seed included);
trials may fan out over worker processes but are always merged in trial order,
so the worker count never changes the output.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .search import DEFAULT_BUDGET, audit_good_sets, greedy_lookahead, idfs, snap_eps
from .survival import RHO_DP_MAX_N, gw_allones_survival, rho_dp, rho_gf, rho_mc
from .tree_oracle import MASK64, derive_trial_oracle, sub_seed

DEFAULT_SEED = 0x5EED
COMMANDS = ("rho", "search", "scaling", "verify", "plot")
METHODS = ("dp", "mc", "gf")
ALGOS = ("idfs", "greedy")
FORMATS = ("csv", "json")

RHO_COLUMNS = ["p", "eps", "n", "method", "value", "stderr", "trials", "seed", "reference"]
SEARCH_COLUMNS = [
    "trial", "p", "eps", "r", "n", "algo", "lookahead", "success", "queries", "restarts",
    "witness_sum", "target", "budget", "stop_reason", "queries_per_n_over_eps", "good_found",
]
SCALING_COLUMNS = [
    "p", "eps", "n", "r", "trials", "successes", "success_rate", "mean_queries",
    "stderr_queries", "rho_ref", "ratio_n_over_eps", "ratio_rho",
]
COLUMNS = {"rho": RHO_COLUMNS, "search": SEARCH_COLUMNS, "scaling": SCALING_COLUMNS}


def default_jobs() -> int:
    return os.cpu_count() or 1


@dataclass
class ExperimentConfig:
    command: str
    p: float = 0.5
    eps: float | None = None
    eps_list: list[float] = field(default_factory=list)
    n: int | None = None
    n_list: list[int] = field(default_factory=list)
    r: float = 0.5
    s: float = 2.0
    method: str = "dp"
    algo: str = "idfs"
    lookahead: int = 8
    trials: int = 1
    seed: int = DEFAULT_SEED
    budget: int = DEFAULT_BUDGET
    record: bool = False
    output: str | None = None
    format: str = "csv"

    def validate(self) -> ExperimentConfig:
        if self.command not in COMMANDS:
            raise ValueError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.format not in FORMATS:
            raise ValueError(f"format must be csv or json, got {self.format!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.command == "rho":
            self._need("eps", "n")
            if self.method not in METHODS:
                raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
            if self.method == "dp" and not 0 < self.p < 1:
                raise ValueError("--p must lie in (0, 1) for the dp method")
            if self.method == "gf" and self.p != 0.5:
                raise ValueError("the gf method needs --p 0.5")
        elif self.command == "search":
            self._need("eps", "n")
            if self.algo not in ALGOS:
                raise ValueError(f"algo must be one of {ALGOS}, got {self.algo!r}")
            if not 0 < self.r < 1:
                raise ValueError("--r must lie in (0, 1)")
            if self.eps <= 0:
                raise ValueError("--eps must be positive for search")
            if self.lookahead < 1:
                raise ValueError("--lookahead must be >= 1")
            if self.budget < 1:
                raise ValueError("--budget must be >= 1")
        elif self.command == "scaling":
            if not self.eps_list or not self.n_list:
                raise ValueError("scaling needs --eps-list and --n-list")
            if any(e <= 0 for e in self.eps_list):
                raise ValueError("every eps in --eps-list must be positive")
            if any(n < 1 for n in self.n_list):
                raise ValueError("every n in --n-list must be >= 1")
            if not 0 < self.r < 1:
                raise ValueError("--r must lie in (0, 1)")
        return self

    def _need(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ValueError(f"{self.command} needs --{name.replace('_', '-')}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        return cls.from_dict(json.loads(text))

    def header(self) -> dict[str, str]:
        """Config echo for the CSV comment header; ``output`` is not part of the result."""
        d = self.to_dict()
        d.pop("output")
        return {"config": json.dumps(d, sort_keys=True)}


# -- runners ----------------------------------------------------------------

def _rho_rows(cfg: ExperimentConfig, jobs: int) -> list[dict]:
    p, eps, n = cfg.p, cfg.eps, cfg.n
    if cfg.method == "dp":
        est = rho_dp(p, eps, n)
        ref = gw_allones_survival(n) if p == 0.5 and eps == 0 else None
    elif cfg.method == "mc":
        est = rho_mc(p, eps, n, cfg.trials, cfg.seed, jobs)
        ref = rho_dp(p, eps, n).value if 0 < p < 1 and n <= RHO_DP_MAX_N else None
    else:
        est = rho_gf(p, eps, n)
        ref = rho_dp(p, eps, n).value if n <= RHO_DP_MAX_N else None
    return [{
        "p": p, "eps": eps, "n": n, "method": est.method, "value": est.value,
        "stderr": est.stderr, "trials": est.trials, "seed": cfg.seed, "reference": ref,
    }]


def _search_one(args) -> dict:
    cfg, k = args
    oracle = derive_trial_oracle(cfg.seed, k, cfg.p)
    if cfg.algo == "idfs":
        out = idfs(oracle, cfg.eps, cfg.r, cfg.n, cfg.budget, record=cfg.record)
    else:
        out = greedy_lookahead(oracle, cfg.lookahead, cfg.n, eps=cfg.eps)
    good = None
    if cfg.record and out.examined_order is not None:
        b, _ = snap_eps(cfg.eps)
        good = sum(audit_good_sets(oracle, out.examined_order, b))
    return {
        "trial": k, "p": cfg.p, "eps": cfg.eps, "r": cfg.r, "n": cfg.n, "algo": cfg.algo,
        "lookahead": cfg.lookahead if cfg.algo == "greedy" else None,
        "success": out.success, "queries": out.queries, "restarts": out.restarts,
        "witness_sum": out.witness_sum, "target": out.target, "budget": out.budget,
        "stop_reason": out.stop_reason, "queries_per_n_over_eps": out.queries * cfg.eps / cfg.n,
        "good_found": good,
    }


def _map(fn, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _search_rows(cfg: ExperimentConfig, jobs: int) -> list[dict]:
    return _map(_search_one, [(cfg, k) for k in range(cfg.trials)], jobs)


def scaling_cell_seed(seed: int, eps: float, n: int) -> int:
    """Seed of one (eps, n) cell; independent of which other cells are in the sweep."""
    return sub_seed(seed, n, int(round(eps * 2**32)))


def _idfs_trial(args) -> tuple[bool, int]:
    seed, k, p, eps, r, n, budget = args
    out = idfs(derive_trial_oracle(seed, k, p), eps, r, n, budget)
    return out.success, out.queries


def scaling_cell(p: float, eps: float, n: int, r: float, trials: int, seed: int,
                 budget: int = DEFAULT_BUDGET, jobs: int = 1) -> dict:
    cell_seed = scaling_cell_seed(seed, eps, n)
    res = _map(_idfs_trial, [(cell_seed, k, p, eps, r, n, budget) for k in range(trials)], jobs)
    q = np.array([x[1] for x in res], dtype=float)
    successes = sum(1 for x in res if x[0])
    mean_q = float(q.mean())
    sq = float(q.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    rho_ref = None
    if 0 < p < 1:
        rho_ref = rho_dp(p, r * eps, min(n, RHO_DP_MAX_N)).value
    return {
        "p": p, "eps": eps, "n": n, "r": r, "trials": trials, "successes": successes,
        "success_rate": successes / trials, "mean_queries": mean_q, "stderr_queries": sq,
        "rho_ref": rho_ref, "ratio_n_over_eps": mean_q / (n / eps),
        "ratio_rho": mean_q * rho_ref / n if rho_ref is not None else None,
    }


def _scaling_rows(cfg: ExperimentConfig, jobs: int) -> list[dict]:
    return [
        scaling_cell(cfg.p, eps, n, cfg.r, cfg.trials, cfg.seed, cfg.budget, jobs)
        for eps in cfg.eps_list
        for n in cfg.n_list
    ]


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> tuple[list[str], list[dict]]:
    """Run a rho/search/scaling config; returns (columns, rows)."""
    cfg.validate()
    if cfg.command == "rho":
        rows = _rho_rows(cfg, jobs)
    elif cfg.command == "search":
        rows = _search_rows(cfg, jobs)
    elif cfg.command == "scaling":
        rows = _scaling_rows(cfg, jobs)
    else:
        raise ValueError(f"{cfg.command} is not a row-producing experiment")
    return COLUMNS[cfg.command], rows
