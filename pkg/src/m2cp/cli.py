"""Command-line front end.

Every option can also be set through an environment variable named
``M2CP_<COMMAND>_<OPTION>``, e.g. ``M2CP_SIMULATE_SEED``. Exit status is 0
on success, 1 when a test rejects or a violation is found, and 2 on bad
input.
"""

from __future__ import annotations

import csv
import io as _io
import sys
from pathlib import Path

import click

from . import __version__
from . import io as mio
from .chains import ChainError
from .model import CONDITIONED, RENORMALIZED, ModelError, sync_product
from .trajectory import LatticeError, TrajectoryError

INPUT_ERRORS = (ChainError, ModelError, TrajectoryError, LatticeError, mio.FormatError, OSError, ValueError)


class InputError(click.ClickException):
    exit_code = 2


def _model(spec: str):
    try:
        if spec.startswith("fixture:"):
            return mio.load_fixture(spec.split(":", 1)[1])
        return mio.model_from_json(mio.read_json(spec))
    except INPUT_ERRORS as exc:
        raise InputError(f"{spec}: {exc}") from None


def _state(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise InputError(f"a global state is written 'x,z', got {text!r}")
    return parts[0], parts[1]


def _default_start(model) -> tuple[str, str]:
    y = model.q0[0] if model.q0 else None
    return (y, y) if y else tuple(model.x0[0])


def _emit(payload: dict, config: dict, out: str | None) -> None:
    text = mio.dumps(mio.report(payload, config))
    if out:
        mio.write_text(out, text)
    else:
        click.echo(text, nl=False)


def _config(ctx: click.Context) -> dict:
    cfg = {"command": ctx.command_path.split(" ", 1)[-1]}
    cfg.update({k: v for k, v in ctx.params.items() if k != "out"})
    return cfg


model_opt = click.option("--model", "model_spec", default="fixture:two-site", show_default=True,
                         help="Model JSON file or fixture:<name>.")
seed_opt = click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
samples_opt = click.option("--samples", type=click.IntRange(min=0), default=100_000, show_default=True)
horizon_opt = click.option("--horizon-syncs", type=click.IntRange(min=0), default=10, show_default=True)
sig_opt = click.option("--significance", type=click.FloatRange(0, 1), default=0.01, show_default=True)
threads_opt = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
out_opt = click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (stdout if omitted).")
start_opt = click.option("--start", default=None, help="Start state 'x,z' (default: first synchronization state).")


@click.group(context_settings={"auto_envvar_prefix": "M2CP", "help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="m2cp")
def main():
    """Markov two-components processes: derive, simulate, analyze and test."""


@main.command()
@click.argument("m1", type=click.Path(exists=True, dir_okay=False))
@click.argument("m2", type=click.Path(exists=True, dir_okay=False))
@click.option("--family", type=click.Choice([CONDITIONED, RENORMALIZED]), default=CONDITIONED, show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the derivation report here.")
@out_opt
@click.pass_context
def derive(ctx, m1, m2, family, report_path, out):
    """Build the synchronization product of two chains given as matrix JSON files."""
    try:
        a = mio.load_matrix(m1)
        b = mio.load_matrix(m2)
        model = sync_product(a, b, family)
        derivation = mio.derivation_report(a, b, family)
    except INPUT_ERRORS as exc:
        raise InputError(str(exc)) from None
    data = mio.model_to_json(model)
    data["derivation"]["report"] = derivation
    text = mio.dumps(data)
    if out:
        mio.write_text(out, text)
    else:
        click.echo(text, nl=False)
    if report_path:
        mio.write_text(report_path, mio.dumps(mio.report(derivation, _config(ctx))))


@main.command()
@model_opt
@start_opt
@samples_opt
@horizon_opt
@seed_opt
@threads_opt
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="CSV of Y-sequences.")
@out_opt
def simulate(model_spec, start, samples, horizon_syncs, seed, threads, csv_path, out):
    """Sample prefixes and write them as JSON lines."""
    from .simulation import DirectSampler, draw_prefixes, write_jsonl, write_y_csv

    model = _model(model_spec)
    alpha = _state(start) if start else _default_start(model)
    try:
        prefixes = draw_prefixes(DirectSampler(model), alpha, samples, horizon_syncs, seed, threads)
    except INPUT_ERRORS as exc:
        raise InputError(str(exc)) from None
    buf = _io.StringIO()
    write_jsonl(prefixes, buf)
    if out:
        mio.write_text(out, buf.getvalue())
    else:
        click.echo(buf.getvalue(), nl=False)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            write_y_csv(prefixes, fh)


@main.command()
@model_opt
@click.option("--samples", type=click.IntRange(min=0), default=2000, show_default=True)
@click.option("--horizon-syncs", type=click.IntRange(min=1), default=50, show_default=True)
@seed_opt
@threads_opt
@out_opt
@click.pass_context
def analyze(ctx, model_spec, samples, horizon_syncs, seed, threads, out):
    """Irreducible components, per-state classification and return estimates."""
    from .analysis import (
        classify_open_closed,
        classify_recurrence,
        irreducible_components,
        node_graph,
        structural_class,
    )

    model = _model(model_spec)
    graph = node_graph(model)
    comps = irreducible_components(model, graph)
    states = {}
    for a in model.x0:
        entry = {"structural": structural_class(model, a, graph), "process": classify_open_closed(model, a)}
        if model.is_admissible(a) and samples:
            rec = classify_recurrence(model, a, samples, horizon_syncs, seed, threads=threads)
            entry["recurrence"] = rec.to_json()
        states[f"{a[0]},{a[1]}"] = entry
    payload = {
        "kind": model.kind(),
        "components": [sorted(f"{x},{z}" for x, z in c) for c in comps],
        "states": states,
    }
    _emit(payload, _config(ctx), out)


@main.command()
@click.argument("kind", type=click.Choice(["markov", "lip", "ychain", "tv", "stopping", "recurrence"]))
@model_opt
@start_opt
@samples_opt
@horizon_opt
@sig_opt
@seed_opt
@threads_opt
@click.option("--max-prefix", type=click.IntRange(min=0), default=3, show_default=True)
@click.option("--max-future", type=click.IntRange(min=0), default=3, show_default=True)
@click.option("--step", type=click.IntRange(min=1), default=2, show_default=True, help="Elementary step for lip.")
@click.option("--depth", type=click.IntRange(min=0), default=1, show_default=True, help="Sync depth for tv.")
@click.option("--sampler", type=click.Choice(["direct", "rejection", "coupled", "perturbed"]), default="direct",
              show_default=True)
@out_opt
@click.pass_context
def test(ctx, kind, model_spec, start, samples, horizon_syncs, significance, seed, threads,
         max_prefix, max_future, step, depth, sampler, out):
    """Run one verification and exit 1 on rejection or violation."""
    from . import stats
    from .simulation import CoupledSampler, DirectSampler, PerturbedSampler, RejectionSampler

    model = _model(model_spec)
    alpha = _state(start) if start else _default_start(model)
    cfg = _config(ctx)
    try:
        if sampler == "rejection":
            smp = RejectionSampler(*mio.raw_chains(model))
        elif sampler == "coupled":
            smp = CoupledSampler(model)
        elif sampler == "perturbed":
            smp = PerturbedSampler(model)
        else:
            smp = DirectSampler(model)
    except INPUT_ERRORS as exc:
        raise InputError(str(exc)) from None

    ok = True
    if kind == "markov":
        from .consistency import markov_consistency_report

        rep = markov_consistency_report(model, alpha, max_prefix, max_future)
        payload = rep.to_json()
        ok = rep.ok
    elif kind == "lip":
        r = stats.lip_test(smp, alpha, step, samples, significance, seed, threads)
        payload, ok = r.to_json(), r.passed
    elif kind == "ychain":
        r = stats.y_chain_test(smp, model, alpha, samples, horizon_syncs, significance, seed, threads)
        payload, ok = r.to_json(), r.passed
    elif kind == "tv":
        payload = stats.sampler_vs_exact_tv(smp, model, alpha, depth, samples, seed, threads=threads)
        payload["tolerance"] = 0.01
        ok = payload["tv_distance"] <= payload["tolerance"]
    elif kind == "stopping":
        payload, ok = _stopping_suite(model, alpha, samples, horizon_syncs, seed, threads)
    else:
        from .analysis import classify_recurrence

        rec = classify_recurrence(model, alpha, samples, max(horizon_syncs, 1), seed, threads=threads)
        payload, ok = rec.to_json(), rec.geometric_ok
    payload["passed"] = ok
    _emit(payload, cfg, out)
    if not ok:
        ctx.exit(1)


def _stopping_suite(model, alpha, samples, horizon, seed, threads):
    from .simulation import DirectSampler, draw_prefixes
    from .stopping import as_time, check_stopping_property, extension_pairs, supremum

    prefixes = draw_prefixes(DirectSampler(model), alpha, samples, horizon, seed, threads)
    others = [a for a in model.x0 if a != alpha]
    beta = others[0] if others else alpha
    times = {
        f"first_return {alpha[0]},{alpha[1]}": as_time(alpha),
        f"supremum {alpha[0]},{alpha[1]} | {beta[0]},{beta[1]}": supremum(as_time(alpha), as_time(beta)),
    }
    out = {}
    ok = True
    for name, fn in times.items():
        pairs = list(extension_pairs(prefixes, fn, seed))
        v = check_stopping_property(fn, pairs)
        out[name] = {"pairs": len(pairs), "violations": len(v)}
        ok = ok and not v
    return {"times": out}, ok


def _trajectory_arg(path):
    try:
        return mio.trajectory_from_json(mio.read_json(path))
    except INPUT_ERRORS as exc:
        raise InputError(f"{path}: {exc}") from None


def _fmt(word) -> str:
    return "·".join(word) if word else "ε"


@main.command()
@click.argument("trajectory", type=click.Path(exists=True, dir_okay=False))
@out_opt
def lattice(trajectory, out):
    """List the subtrajectories of a finite trajectory as CSV."""
    from .trajectory import subtrajectory_lattice

    v, _ = _trajectory_arg(trajectory)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "n", "w1", "w2"])
    for s in subtrajectory_lattice(v):
        w.writerow([len(s.w1), len(s.w2), _fmt(s.w1), _fmt(s.w2)])
    _write(buf.getvalue(), out)


@main.command()
@click.argument("trajectory", type=click.Path(exists=True, dir_okay=False))
@click.option("--state", default=None, help="Target global state 'x,z'.")
@click.option("--square", default=None,
              help="Square set: 'X0', 'QxQ', or two ';'-separated state lists like 'a,b;e'.")
@click.option("--max-returns", type=click.IntRange(min=0), default=100, show_default=True)
@out_opt
def returns(trajectory, state, square, max_returns, out):
    """Table of iterated first return times as CSV."""
    from .simulation import OmegaPrefix
    from .stopping import SquareSet, iterated_returns

    v, start = _trajectory_arg(trajectory)
    system = v.system
    if (state is None) == (square is None):
        raise InputError("give exactly one of --state and --square")
    if state is not None:
        spec = _state(state)
    elif square == "X0":
        spec = SquareSet.everything(system)
    elif square == "QxQ":
        spec = SquareSet.diagonal(system)
    else:
        try:
            left, right = square.split(";")
        except ValueError:
            raise InputError(f"cannot parse square set {square!r}") from None
        spec = SquareSet(frozenset(filter(None, left.split(","))), frozenset(filter(None, right.split(","))), system)
    # return lengths do not depend on the start state
    start = start or (system.private(1)[0], system.private(2)[0])
    omega = OmegaPrefix(start, v, len(v.q_sequence))
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "m", "n", "x", "z"])
    for k, r in enumerate(iterated_returns(omega, spec, max_returns), 1):
        w.writerow([k, r.length.m, r.length.n, r.prefix.w1[-1], r.prefix.w2[-1]])
    _write(buf.getvalue(), out)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
