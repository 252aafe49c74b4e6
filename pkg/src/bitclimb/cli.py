"""Run orchestration: the ``bitclimb`` command line.

``bitclimb train`` runs a training session (optionally many restarts)
and writes plot-ready CSV artifacts plus rendered figures into the
output directory; ``bitclimb replay`` re-evaluates a saved genome.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import statistics
import time
from dataclasses import dataclass, field, replace

import click
import numpy as np

from . import report
from .codec import BitGenome, WeightFormat
from .data import load_csv, normalize_split, two_spirals
from .net import Topology, forward
from .objective import LossSpec, classification_accuracy
from .pendulum import ControlProblem, SimConfig, fitness, simulate, holdout_errors
from .search import DatasetProblem, SearchConfig, run
from .telescope import TelescopeConfig


@dataclass
class RunSpec:
    task: str
    arch: str
    recurrent: bool
    hidden_transfer: str
    output_transfer: str
    n_bits: int
    w_max: float
    telescopic: bool
    n_start: int
    trigger: str
    phi: float
    eta: float
    search: SearchConfig
    loss: LossSpec
    feedback: str = "complete"
    csv_path: str | None = None
    schema: dict | None = None
    sim: SimConfig = field(default_factory=SimConfig)
    out_dir: str = "runs"
    grid_resolution: int = 64
    restarts: int = 1
    success_threshold: float = 0.1
    target_val: float | None = None

    def topology(self) -> Topology:
        return Topology.from_arch(self.arch, hidden=self.hidden_transfer,
                                  output=self.output_transfer,
                                  recurrent=self.recurrent)

    def weight_format(self) -> WeightFormat:
        return WeightFormat(self.n_bits, self.w_max)

    def telescope_config(self) -> TelescopeConfig | None:
        if not self.telescopic:
            return None
        return TelescopeConfig(n_start=self.n_start, n_max=self.n_bits,
                               trigger=self.trigger, phi=self.phi, eta=self.eta)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sim"] = dataclasses.asdict(self.sim)
        d["search"] = dataclasses.asdict(self.search)
        d["loss"] = dataclasses.asdict(self.loss)
        return d


def parse_schema(text: str) -> dict:
    """Parse \"name=role,name=role,...\" column-role assignments."""
    schema = {}
    for item in text.split(","):
        if "=" not in item:
            raise click.BadParameter(f"schema entry {item!r} is not name=role")
        name, role = item.split("=", 1)
        schema[name.strip()] = role.strip()
    return schema


def build_runspec(**kw) -> RunSpec:
    """Assemble and cross-validate a RunSpec from CLI parameters."""
    task = kw["task"]
    feedback = kw["feedback"]
    arch = kw["arch"]
    if arch is None:
        arch = {
            "two-spirals": "2-20-20-1",
            "pendulum": "4-5-1" if feedback == "complete" else "2-10-1",
        }.get(task)
        if arch is None:
            raise click.UsageError("--arch is required for csv tasks")
    recurrent = kw["recurrent"]
    if recurrent is None:
        recurrent = task == "pendulum" and feedback == "positional"
    if task == "csv" and kw["csv_path"] is None:
        raise click.UsageError("--csv is required with --task csv")
    schema = parse_schema(kw["schema"]) if kw.get("schema") else None
    if task == "csv" and schema is None:
        raise click.UsageError("--schema is required with --task csv")

    sizes = [int(s) for s in arch.split("-")]
    if task == "pendulum":
        want_inputs = 4 if feedback == "complete" else 2
        if sizes[0] != want_inputs or sizes[-1] != 1:
            raise click.UsageError(
                f"pendulum with {feedback} feedback needs arch "
                f"{want_inputs}-...-1, got {arch}"
            )
    output_transfer = kw["output_transfer"]
    if output_transfer == "auto":
        if task == "pendulum":
            output_transfer = "linear"
        elif task == "two-spirals":
            output_transfer = "logistic"
        else:
            output_transfer = "logistic" if kw["loss"] == "ce" else "linear"

    search = SearchConfig(
        strategy=kw["strategy"], restart=kw["restart"],
        sparsity="prefer-nonzero" if kw["sparsity"] else "off",
        init=kw["init"], w_init=kw["init_range"], seed=kw["seed"],
        max_seconds=kw["budget_seconds"], max_moves=kw["max_moves"],
        validate_every=kw["validate_every"],
    )
    # Training trajectories are truncated at |theta| = pi or |x| = 100 m
    # and charged the worst in-bounds error density for the unsimulated
    # remainder; this rewards surviving longer and keeps probes of hopeless
    # candidates cheap. Held-out evaluation lifts the caps (see execute).
    sim = SimConfig(horizon=kw["sim_horizon"], dt=kw["sim_dt"], hold=kw["hold"],
                    theta_limit=math.pi, x_limit=100.0)
    return RunSpec(
        task=task, arch=arch, recurrent=recurrent,
        hidden_transfer="symmetric-sigmoid", output_transfer=output_transfer,
        n_bits=kw["bits"], w_max=kw["wmax"], telescopic=kw["telescopic"],
        n_start=kw["n_start"], trigger=kw["trigger"], phi=kw["phi"],
        eta=kw["eta"], search=search, loss=LossSpec(kw["loss"], kw["reg"]),
        feedback=feedback, csv_path=kw["csv_path"], schema=schema, sim=sim,
        out_dir=kw["out"], grid_resolution=kw["grid_res"],
        restarts=kw["restarts"], success_threshold=kw["success_threshold"],
        target_val=kw["target_val"],
    )


def make_problem(spec: RunSpec, topology: Topology):
    if spec.task == "two-spirals":
        train, test = two_spirals()
        return DatasetProblem(topology, spec.loss,
                              (train.inputs, train.targets),
                              (test.inputs, test.targets))
    if spec.task == "csv":
        dataset = load_csv(spec.csv_path, spec.schema)
        rng = np.random.default_rng(spec.search.seed)
        train, val, _ = normalize_split(dataset, 0.70, rng)
        return DatasetProblem(topology, spec.loss,
                              (train.inputs, train.targets),
                              (val.inputs, val.targets))
    return ControlProblem(topology, spec.sim, batch_seed=spec.search.seed)


def _write_csv(path, spec: RunSpec, colnames, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# bitclimb artifact\n")
        fh.write("# spec=" + json.dumps(spec.to_dict(), sort_keys=True) + "\n")
        fh.write(",".join(colnames) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def save_genome(path, spec: RunSpec, genome: BitGenome):
    payload = {
        "arch": spec.arch,
        "recurrent": spec.recurrent,
        "hidden_transfer": spec.hidden_transfer,
        "output_transfer": spec.output_transfer,
        "n_bits": spec.n_bits,
        "w_max": spec.w_max,
        "multipliers": [int(v) for v in genome.mult],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_genome(path):
    """Rebuild (genome, topology, format) from a genome.json file."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        topology = Topology.from_arch(payload["arch"],
                                      hidden=payload["hidden_transfer"],
                                      output=payload["output_transfer"],
                                      recurrent=payload["recurrent"])
        fmt = WeightFormat(payload["n_bits"], payload["w_max"])
        genome = BitGenome.from_multipliers(fmt, topology.layout(),
                                            payload["multipliers"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise click.ClickException(f"bad genome file {path}: {exc}") from exc
    return genome, topology, fmt


def execute(spec: RunSpec) -> int:
    """Run training (possibly restarted) and write all artifacts."""
    os.makedirs(spec.out_dir, exist_ok=True)
    topology = spec.topology()
    fmt = spec.weight_format()
    tele = spec.telescope_config()

    stop_when = None
    if spec.target_val is not None:
        stop_when = lambda trace, problem: trace.best_val_loss <= spec.target_val

    seeds = [spec.search.seed] if spec.restarts == 1 else [
        int(ss.generate_state(1)[0])
        for ss in np.random.SeedSequence(spec.search.seed).spawn(spec.restarts)
    ]
    results = []
    for run_seed in seeds:
        problem = make_problem(spec, topology)
        cfg = replace(spec.search, seed=run_seed)
        t_start = time.monotonic()
        trace = run(topology, fmt, problem, cfg, telescope=tele,
                    stop_when=stop_when)
        wall = time.monotonic() - t_start
        test_err = math.nan
        if spec.task == "pendulum" and trace.best_genome is not None:
            test_sim = replace(spec.sim, theta_limit=math.inf,
                               x_limit=math.inf)
            errs, _, _ = holdout_errors(trace.best_genome, topology, test_sim,
                                     seed=run_seed + 1)
            test_err = float(np.mean(errs))
        results.append((run_seed, trace, wall, test_err))
        if len(seeds) > 1:
            click.echo(f"run {len(results)}/{len(seeds)}: seed={run_seed} "
                       f"best_val={trace.best_val_loss:.4g} "
                       f"test_err={test_err:.4g} wall={wall:.0f}s")

    best_seed, best_trace, _, _ = min(
        results, key=lambda r: (r[1].best_val_loss, r[0])
    )
    genome = best_trace.best_genome

    _write_csv(
        os.path.join(spec.out_dir, "trace.csv"), spec,
        ["time_s", "moves", "n_bits_unlocked", "train_loss", "val_loss",
         "frac_explored"],
        [(t, m, n, float(tr), float(v), float(f))
         for t, m, n, tr, v, f in best_trace.records],
    )
    report.save_trace_figure(best_trace.records,
                             os.path.join(spec.out_dir, "trace.png"))
    save_genome(os.path.join(spec.out_dir, "genome.json"), spec, genome)

    eps = fmt.epsilon
    counts, edges = np.histogram(genome.values, bins=51,
                                 range=(-spec.w_max - eps, spec.w_max))
    _write_csv(
        os.path.join(spec.out_dir, "weights_hist.csv"), spec,
        ["bin_lo", "bin_hi", "count"],
        [(float(lo), float(hi), int(c))
         for lo, hi, c in zip(edges[:-1], edges[1:], counts)],
    )
    report.save_histogram_figure(
        np.column_stack([edges[:-1], edges[1:], counts]),
        os.path.join(spec.out_dir, "weights_hist.png"),
    )

    if spec.task != "pendulum" and topology.n_inputs == 2:
        res = spec.grid_resolution
        ticks = np.linspace(-1.0, 1.0, res)
        gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        out, _ = forward(genome, topology, pts)
        grid_rows = [(float(x), float(y), float(z))
                     for (x, y), z in zip(pts, out[:, 0])]
        _write_csv(os.path.join(spec.out_dir, "grid.csv"), spec,
                   ["x", "y", "output"], grid_rows)
        report.save_grid_figure(np.array(grid_rows), res,
                                os.path.join(spec.out_dir, "grid.png"))

    if spec.task == "pendulum":
        long_sim = replace(spec.sim, horizon=spec.sim.horizon * 10,
                           theta_limit=math.inf, x_limit=math.inf)
        result = simulate(genome, topology, spec.sim.theta0_range, long_sim,
                          record_trajectory=True)
        _write_csv(os.path.join(spec.out_dir, "trajectory.csv"), spec,
                   ["t", "x", "x_dot", "theta", "theta_dot", "force"],
                   [tuple(map(float, row)) for row in result.trajectory])
        report.save_trajectory_figure(
            result.trajectory, os.path.join(spec.out_dir, "trajectory.png")
        )

    if spec.restarts > 1:
        metric = [r[3] if spec.task == "pendulum" else r[1].best_val_loss
                  for r in results]
        _write_csv(
            os.path.join(spec.out_dir, "restarts.csv"), spec,
            ["run", "seed", "best_val_loss", "test_err", "wall_s"],
            [(i, r[0], float(r[1].best_val_loss), float(r[3]), float(r[2]))
             for i, r in enumerate(results)],
        )
        ordered = sorted(metric)
        q1 = ordered[max(0, math.ceil(len(ordered) / 4) - 1)]
        success = sum(m < spec.success_threshold for m in metric)
        _write_csv(
            os.path.join(spec.out_dir, "restart_summary.csv"), spec,
            ["minimum", "first_quartile", "n_success", "n_runs", "threshold",
             "median_wall_s"],
            [(float(ordered[0]), float(q1), success, len(metric),
              float(spec.success_threshold),
              float(statistics.median(r[2] for r in results)))],
        )
        click.echo(
            f"restarts: min={ordered[0]:.4g} q1={q1:.4g} "
            f"success={success}/{len(metric)} at {spec.success_threshold}"
        )

    click.echo(
        f"best run: seed={best_seed} best_val={best_trace.best_val_loss:.6g} "
        f"moves={best_trace.records[-1][1]} artifacts in {spec.out_dir}"
    )
    return 0


def task_options(f):
    decorators = [
        click.option("--task", type=click.Choice(["two-spirals", "csv", "pendulum"]),
                     required=True),
        click.option("--csv", "csv_path", type=click.Path(exists=True), default=None),
        click.option("--schema", default=None,
                     help="column roles, e.g. 'len=num,sex=nom,age=target'"),
        click.option("--feedback", type=click.Choice(["complete", "positional"]),
                     default="complete", show_default=True),
        click.option("--arch", default=None, help="layer sizes, e.g. 2-20-20-1"),
        click.option("--recurrent/--no-recurrent", default=None),
        click.option("--output-transfer",
                     type=click.Choice(["auto", "logistic", "linear",
                                        "symmetric-sigmoid"]),
                     default="auto", show_default=True),
        click.option("--bits", type=click.IntRange(2, 24), default=12,
                     show_default=True),
        click.option("--wmax", type=click.FloatRange(min=0, min_open=True),
                     default=6.0, show_default=True),
        click.option("--loss", type=click.Choice(["rmse", "ce"]), default="rmse",
                     show_default=True),
        click.option("--reg", type=click.FloatRange(min=0), default=0.0,
                     show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--sim-horizon", type=float, default=100.0, show_default=True),
        click.option("--sim-dt", type=float, default=0.01, show_default=True),
        click.option("--hold", type=int, default=10, show_default=True),
    ]
    for dec in reversed(decorators):
        f = dec(f)
    return f


@click.group()
def main():
    """Derivative-free neural network training by bit-flip local search."""


@main.command()
@task_options
@click.option("--telescopic/--no-telescopic", default=False)
@click.option("--n-start", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--trigger", type=click.Choice(["threshold", "local-minimum"]),
              default="threshold", show_default=True)
@click.option("--phi", type=click.FloatRange(0.0, 1.0), default=0.10,
              show_default=True)
@click.option("--eta", type=click.FloatRange(0.0, 1.0, max_open=True),
              default=0.95, show_default=True)
@click.option("--strategy", type=click.Choice(["first-improving", "best-move"]),
              default="first-improving", show_default=True)
@click.option("--restart", type=click.Choice(["none", "repeated"]),
              default="none", show_default=True)
@click.option("--sparsity", is_flag=True, default=False)
@click.option("--init", type=click.Choice(["full-random", "bounded-random",
                                           "telescopic-grid"]),
              default="bounded-random", show_default=True)
@click.option("--init-range", type=float, default=0.001, show_default=True)
@click.option("--budget-seconds", type=float, default=None)
@click.option("--max-moves", type=int, default=None)
@click.option("--validate-every", type=click.IntRange(min=1), default=100,
              show_default=True)
@click.option("--out", default=None, help="output directory "
              "(default $BITCLIMB_OUT or ./runs)")
@click.option("--grid-res", type=click.IntRange(min=2), default=64,
              show_default=True)
@click.option("--restarts", type=click.IntRange(min=1), default=1,
              show_default=True)
@click.option("--success-threshold", type=float, default=0.1, show_default=True)
@click.option("--target-val", type=float, default=None,
              help="stop a run once best validation loss reaches this")
def train(**kw):
    """Train a network and emit trace/genome/figure artifacts."""
    if kw["out"] is None:
        kw["out"] = os.environ.get("BITCLIMB_OUT", "runs")
    if kw["budget_seconds"] is None and kw["max_moves"] is None \
            and kw["target_val"] is None:
        raise click.UsageError(
            "give at least one of --budget-seconds, --max-moves, --target-val"
        )
    spec = build_runspec(**kw)
    raise SystemExit(execute(spec))


@main.command()
@task_options
@click.option("--genome", "genome_path", type=click.Path(exists=True),
              required=True)
def replay(genome_path, **kw):
    """Re-evaluate a saved genome on its task (test horizon for pendulum)."""
    genome, topology, fmt = load_genome(genome_path)
    kw.update(
        arch=kw["arch"] or "-".join(map(str, topology.layer_sizes)),
        recurrent=topology.recurrent, output_transfer=topology.transfer[-1],
        telescopic=False, n_start=2, trigger="threshold", phi=0.1, eta=0.95,
        strategy="first-improving", restart="none", sparsity=False,
        init="bounded-random", init_range=max(fmt.epsilon, 0.001),
        budget_seconds=None, max_moves=1, validate_every=100, out="runs",
        grid_res=64, restarts=1, success_threshold=0.1, target_val=None,
        bits=fmt.n_bits, wmax=fmt.w_max,
    )
    spec = build_runspec(**kw)
    if spec.topology().layer_sizes != topology.layer_sizes \
            or spec.topology().recurrent != topology.recurrent:
        raise click.ClickException(
            f"genome architecture {topology.layer_sizes} does not match "
            f"the task architecture {spec.topology().layer_sizes}"
        )
    if spec.task == "pendulum":
        problem = make_problem(spec, topology)
        val = fitness(genome, topology, spec.sim, problem.val_theta0)
        test_sim = replace(spec.sim, theta_limit=math.inf, x_limit=math.inf)
        errs, diverged, _ = holdout_errors(genome, topology, test_sim,
                                        seed=spec.search.seed + 1)
        click.echo(f"val_err={val!r}")
        click.echo(f"test_err={float(np.mean(errs))!r}")
        click.echo(f"test_horizon_s={spec.sim.horizon * 10!r}")
        click.echo(f"diverged={int(diverged.sum())}/{len(errs)}")
    else:
        problem = make_problem(spec, topology)
        problem.attach(genome)
        click.echo(f"train_loss={problem.objective()!r}")
        click.echo(f"val_loss={problem.validation_loss()!r}")
        click.echo(f"train_accuracy={problem.train_accuracy()!r}")
        Xv, Yv = problem.validation
        pred, _ = forward(genome, topology, Xv)
        click.echo(f"val_accuracy={classification_accuracy(pred, Yv)!r}")


if __name__ == "__main__":
    main()
