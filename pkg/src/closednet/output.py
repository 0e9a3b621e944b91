"""File writers for fluid curves, trajectories, pre-departure records and summaries.

Floats are written with 17 significant digits so every value round-trips.
All writers are deterministic: same inputs, same bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fluid, stats
from .config import ExperimentConfig
from .des import Trajectory
from .model import derive


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_rows(path: Path, header: Sequence[str], rows) -> int:
    n = 0
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) for v in row) + "\n")
            n += 1
    return n


def fluid_columns(k: int, r: int) -> list[str]:
    return (["t", "q", "int_q"] + [f"x_star_{j + 1}" for j in range(k)]
            + [f"rho_{j + 1}" for j in range(k - 1)] + [f"occ_{i + 1}" for i in range(r)])


def write_fluid(cfg: ExperimentConfig, out: Path, form: str = "beta_product") -> Path:
    params = derive(cfg.network)
    grid = np.asarray(cfg.grid)
    curves = fluid.x_star(params, grid, form)
    header = fluid_columns(params.k, params.r)
    rows = []
    for g, t in enumerate(grid):
        rows.append([t, curves.q[g], curves.int_q[g], *curves.x_star_j[:, g],
                     *curves.rho_t[:, g], *curves.occupancy[:, g]])
    path = out / "fluid_curves.csv"
    _write_rows(path, header, rows)
    return path


def trajectory_columns(k: int, r: int) -> list[str]:
    return (["rep", "t"] + [f"Q_{j + 1}" for j in range(k)] + [f"Sigma_{i + 1}" for i in range(r)]
            + [f"predep_{j + 1}" for j in range(k)] + [f"predep_seen_{j + 1}" for j in range(k)])


def write_trajectories(trajs: Sequence[Trajectory], out: Path) -> Path:
    k = trajs[0].Q.shape[1]
    r = trajs[0].sigma.shape[1]

    def rows():
        for tr in trajs:
            for g, t in enumerate(tr.grid):
                yield [tr.rep, float(t), *tr.Q[g], *tr.sigma[g], *tr.predep[g],
                       *tr.predep_has[g].astype(np.int64)]

    path = out / "trajectories.csv"
    _write_rows(path, trajectory_columns(k, r), rows())
    return path


def write_predeparture(trajs: Sequence[Trajectory], out: Path) -> Path:
    path = out / "predeparture.jsonl"
    with open(path, "w") as f:
        for tr in trajs:
            if tr.records is None:
                continue
            for j, (times, seen) in enumerate(tr.records):
                f.write('{"rep":%d,"station":%d,"epochs":[%s],"queue_before":[%s]}\n' % (
                    tr.rep, j + 1, ",".join(fmt(x) for x in times), ",".join(str(int(v)) for v in seen)))
    return path


CROSSING_COLUMNS = ["rep", "station", "level", "up_below", "down", "final_at_least", "identity_holds"]


def crossing_rows(trajs: Sequence[Trajectory]):
    for tr in trajs:
        ind = tr.final_at_least()
        for j in range(tr.up.shape[0]):
            for l in range(1, tr.L + 1):
                up, down, last = int(tr.up[j, l - 1]), int(tr.down[j, l]), int(ind[j, l])
                yield [tr.rep, j + 1, l, up, down, last, int(up == down + last)]


def write_crossings(trajs: Sequence[Trajectory], out: Path) -> Path:
    path = out / "crossings.csv"
    _write_rows(path, CROSSING_COLUMNS, crossing_rows(trajs))
    return path


def summarize(cfg: ExperimentConfig, trajs: Sequence[Trajectory]) -> dict:
    L = cfg.record_levels
    k, r = cfg.network.k, cfg.network.r
    N = cfg.network.N
    est = []
    for t in cfg.grid:
        for j in range(k):
            d = stats.pmf_at(trajs, j, t, L).to_dict()
            p = stats.predeparture_pmf_at(trajs, j, t, L)
            d["predeparture_pmf"] = p.pmf.tolist()
            d["predeparture_tail"] = p.tail
            d["no_epoch_fraction"] = p.no_epoch_fraction
            est.append(d)
    occ = []
    for t in cfg.grid:
        for i in range(r):
            m, se = stats.occupancy_at(trajs, i, t, N)
            occ.append({"server": i + 1, "t": t, "mean": m, "stderr": se})
    return {
        "name": cfg.name,
        "config": cfg.to_dict(),
        "n_reps": len(trajs),
        "events": int(sum(tr.events for tr in trajs)),
        "tie_anomalies": int(sum(tr.anomalies for tr in trajs)),
        "crossing_identity_failures": int(sum(len(stats.crossing_identity_violations(tr)) for tr in trajs)),
        "queue_distributions": est,
        "server_occupancy": occ,
    }


def write_json(obj, path: Path) -> Path:
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


SCHEMA = {
    "fluid_curves.csv": {
        "t": "sample time",
        "q": "bottleneck fluid queue (scaled by N)",
        "int_q": "integral of q over [0, t]",
        "x_star_<j>": "fluid limit of the centred driver of client j",
        "rho_<j>": "time-dependent utilization of non-bottleneck client j",
        "occ_<i>": "fluid occupancy of server i (scaled by N)",
    },
    "trajectories.csv": {
        "rep": "replication index",
        "t": "sample time",
        "Q_<j>": "queue length at client j",
        "Sigma_<i>": "units at server i",
        "predep_<j>": "queue seen just before the last epoch of client j at or before t (0 if none)",
        "predep_seen_<j>": "1 if client j had an epoch in [0, t]",
    },
    "predeparture.jsonl": {
        "rep": "replication index",
        "station": "client index (1-based)",
        "epochs": "all service epochs of the client up to the horizon",
        "queue_before": "queue length just before each epoch",
    },
    "crossings.csv": {
        "rep": "replication index",
        "station": "client index (1-based)",
        "level": "level l >= 1",
        "up_below": "arrivals finding l - 1 units",
        "down": "departures finding l units",
        "final_at_least": "1 if the queue at the horizon is at least l",
        "identity_holds": "1 if up_below == down + final_at_least",
    },
    "summary.json": {
        "queue_distributions": "per (t, station): pmf of Q and of the pre-departure queue, with binomial stderr",
        "server_occupancy": "per (t, server): mean and stderr of Sigma_i / N",
    },
}
