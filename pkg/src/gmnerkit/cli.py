"""Command-line interface.

Thin client over the core package: every subcommand loads files, calls the
same functions the HTTP service exposes, and writes results plus a manifest
that is sufficient to reproduce the output.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 internal
invariant violation.
"""

from __future__ import annotations

import json
import sys

import click

from . import __version__
from .config import ToolkitConfig, read_config
from .databuilder import (
    ReasoningProvider,
    build_training_set,
    default_template,
    load_template,
    validate_training_set,
    write_manifest,
    write_training_set,
)
from .errors import ConfigError, InputError, InvariantViolation, ToolkitError
from .grbp import GrbpConfig, perturb_dataset
from .records import (
    COORD_FRAME_ABSOLUTE,
    COORD_FRAME_NORMALIZED_1000,
    Generation,
    load_dataset,
    load_generations,
    parse_generation,
    write_dataset,
)
from .scoring import ScoreReport, oracle_score, score
from .sweep import BoxSamplerSpec, characterize, write_sweep_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_INVARIANT = 4

_COORD_FRAMES = (COORD_FRAME_ABSOLUTE, COORD_FRAME_NORMALIZED_1000)


def _load_settings(config_path: str | None) -> ToolkitConfig:
    return read_config(config_path) if config_path else ToolkitConfig()


def _grbp_overrides(base: GrbpConfig, **overrides: float | int | None) -> GrbpConfig:
    kwargs = {k: v for k, v in overrides.items() if v is not None}
    if not kwargs:
        return base
    return GrbpConfig(
        beta=kwargs.get("beta", base.beta),
        gamma=kwargs.get("gamma", base.gamma),
        tau=kwargs.get("tau", base.tau),
        max_tries=kwargs.get("max_tries", base.max_tries),
        min_size=kwargs.get("min_size", base.min_size),
        s_min=kwargs.get("s_min", base.s_min),
        s_max=kwargs.get("s_max", base.s_max),
    )


def _grbp_options(fn):
    for name in ("--s-max", "--s-min", "--min-size", "--tau", "--gamma", "--beta"):
        fn = click.option(name, type=float, default=None, help=f"override grbp {name[2:].replace('-', '_')}")(fn)
    return click.option("--max-tries", type=int, default=None, help="override grbp max_tries")(fn)


def _grbp_manifest(cfg: GrbpConfig) -> dict:
    return {
        "beta": cfg.beta, "gamma": cfg.gamma, "tau": cfg.tau,
        "max_tries": cfg.max_tries, "min_size": cfg.min_size,
        "s_min": cfg.s_min, "s_max": cfg.s_max,
    }


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, ensure_ascii=False, indent=2)
        f.write("\n")


def _report_table(report: ScoreReport) -> str:
    lines = [f"{'task':<8}{'n_correct':>10}{'n_pred':>8}{'n_gold':>8}{'precision':>11}{'recall':>9}{'f1':>9}"]
    for name, task in (("MNER", report.mner), ("EEG", report.eeg), ("GMNER", report.gmner)):
        lines.append(
            f"{name:<8}{task.n_correct:>10}{task.n_pred:>8}{task.n_gold:>8}"
            f"{task.precision:>11.4f}{task.recall:>9.4f}{task.f1:>9.4f}"
        )
    accs = "   ".join(f"Acc@{thr:g} = {acc:.4f}" for thr, acc in sorted(report.acc_at.items()))
    lines.append(accs)
    lines.append(f"mean IoU = {report.mean_iou:.4f} (over {report.n_gold_with_box} gold boxes)")
    lines.append("(precision/recall/F1/Acc/mean-IoU are 0 when their denominators are 0)")
    return "\n".join(lines)


@click.group()
@click.version_option(version=__version__, prog_name="gmnerkit")
@click.option("--config", "config_path", type=click.Path(), default=None, help="INI config file")
@click.option("--seed", type=int, default=None, help="base seed; overrides the config file")
@click.option("--workers", type=int, default=1, show_default=True, help="parallel workers")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, seed: int | None, workers: int) -> None:
    """Toolkit for grounded multimodal NER datasets, perturbation, and scoring."""
    settings = _load_settings(config_path)
    ctx.obj = {
        "settings": settings,
        "seed": seed if seed is not None else settings.seed,
        "workers": workers,
    }


@cli.command("score")
@click.option("--golds", "golds_path", required=True, type=click.Path())
@click.option("--generations", "gens_path", required=True, type=click.Path())
@click.option("--thresholds", type=str, default=None, help="comma-separated IoU thresholds")
@click.option("--coord-frame", type=click.Choice(_COORD_FRAMES), default=COORD_FRAME_ABSOLUTE,
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(), help="machine-readable report (JSON)")
@click.option("--table-out", type=click.Path(), default=None, help="also write the table to a file")
@click.option("--oracle", is_flag=True, help="use the exhaustive matching oracle (small corpora only)")
@click.pass_context
def cmd_score(ctx, golds_path, gens_path, thresholds, coord_frame, out_path, table_out, oracle):
    """Score a generations file against a gold dataset."""
    settings: ToolkitConfig = ctx.obj["settings"]
    thrs = settings.thresholds
    if thresholds:
        thrs = tuple(float(t.strip()) for t in thresholds.split(",") if t.strip())
        if not thrs:
            raise ConfigError("--thresholds is empty")

    golds = {ex.id: ex for ex in load_dataset(golds_path)}
    gens = load_generations(gens_path)

    preds = {}
    n_malformed = 0
    unknown_ids = []
    unknown_types: set[str] = set()
    for g in gens:
        if g.id not in golds:
            unknown_ids.append(g.id)
            continue
        parsed = parse_generation(g, coord_frame=coord_frame, dims=golds[g.id].dims)
        n_malformed += len(parsed.malformed_lines)
        preds[g.id] = parsed.records
        if settings.type_vocabulary:
            unknown_types.update(
                r.etype for r in parsed.records if r.etype not in settings.type_vocabulary
            )

    gold_records = {ex_id: ex.gold for ex_id, ex in golds.items()}
    scorer = oracle_score if oracle else score
    report = scorer(preds, gold_records, thrs)

    missing = sorted(set(golds) - set(preds))
    diagnostics = {
        "n_generations": len(gens),
        "n_unknown_ids": len(unknown_ids),
        "n_missing_predictions": len(missing),
        "n_malformed_lines": n_malformed,
    }
    if unknown_ids:
        click.echo(f"warning: {len(unknown_ids)} generation id(s) not in the gold file; ignored", err=True)
    if unknown_types:
        click.echo(f"warning: predicted types outside the vocabulary: {sorted(unknown_types)}", err=True)

    machine = report.to_dict()
    machine["diagnostics"] = diagnostics
    _write_json(out_path, machine)
    table = _report_table(report)
    if table_out:
        with open(table_out, "w", encoding="utf-8") as f:
            f.write(table + "\n")
    click.echo(table)


@cli.command("perturb")
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@_grbp_options
@click.pass_context
def cmd_perturb(ctx, dataset_path, out_path, beta, gamma, tau, max_tries, min_size, s_min, s_max):
    """Replace every gold box with its jittered counterpart."""
    settings: ToolkitConfig = ctx.obj["settings"]
    cfg = _grbp_overrides(settings.grbp, beta=beta, gamma=gamma, tau=tau, max_tries=max_tries,
                          min_size=min_size, s_min=s_min, s_max=s_max)
    seed = ctx.obj["seed"]
    examples = load_dataset(dataset_path)
    perturbed = perturb_dataset(examples, cfg, seed, workers=ctx.obj["workers"])
    write_dataset(perturbed, out_path)
    n_boxes = sum(1 for ex in examples for r in ex.gold if r.box is not None)
    _write_json(out_path + ".manifest.json", {
        "command": "perturb",
        "dataset": dataset_path,
        "grbp": _grbp_manifest(cfg),
        "base_seed": seed,
        "counts": {"examples": len(examples), "boxes": n_boxes},
        "toolkit_version": __version__,
    })
    click.echo(f"perturbed {n_boxes} boxes across {len(examples)} examples -> {out_path}")


@cli.command("build-train")
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--traces", "traces_path", type=click.Path(), default=None,
              help="reasoning traces JSONL (required unless --no-cot)")
@click.option("--template", "template_path", type=click.Path(), default=None,
              help="instruction template file; packaged default when omitted")
@click.option("--no-cot", is_flag=True, help="build targets without reasoning prefixes")
@click.option("--out", "out_path", required=True, type=click.Path())
@_grbp_options
@click.pass_context
def cmd_build_train(ctx, dataset_path, traces_path, template_path, no_cot, out_path,
                    beta, gamma, tau, max_tries, min_size, s_min, s_max):
    """Assemble instruction-tuning examples with jittered supervision boxes."""
    settings: ToolkitConfig = ctx.obj["settings"]
    cfg = _grbp_overrides(settings.grbp, beta=beta, gamma=gamma, tau=tau, max_tries=max_tries,
                          min_size=min_size, s_min=s_min, s_max=s_max)
    seed = ctx.obj["seed"]
    if not no_cot and traces_path is None:
        raise ConfigError("--traces is required unless --no-cot is set")
    template = load_template(template_path) if template_path else default_template()
    provider = ReasoningProvider.from_jsonl(traces_path) if traces_path else None
    dataset = load_dataset(dataset_path)
    built, report = build_training_set(dataset, template, provider, cfg, seed, use_cot=not no_cot)
    write_training_set(built, out_path)
    write_manifest(out_path + ".manifest.json", template.name, cfg, seed, report, __version__)
    click.echo(
        f"built {report.n_built}/{report.n_input} examples "
        f"({len(report.skipped)} skipped, {report.n_fallback} box fallbacks) -> {out_path}"
    )
    for ex_id, reason in report.skipped:
        click.echo(f"skipped {ex_id}: {reason}", err=True)


@cli.command("sweep")
@click.option("--grid", required=True, type=str, help="comma-separated jitter values, applied to beta and gamma")
@click.option("--tau", type=float, default=None, help="guard threshold for every cell")
@click.option("--n-samples", type=int, default=10000, show_default=True)
@click.option("--sampler", "sampler_spec", type=str, default=None,
              help="synthetic sampler, e.g. 'W=640,H=480,min_size=8,max_frac=0.5'")
@click.option("--dataset", "dataset_path", type=click.Path(), default=None,
              help="draw boxes from a dataset instead of the synthetic sampler")
@click.option("--out", "out_path", required=True, type=click.Path(), help="CSV output")
@click.pass_context
def cmd_sweep(ctx, grid, tau, n_samples, sampler_spec, dataset_path, out_path):
    """Monte-Carlo characterization of jitter strength (plot-ready CSV)."""
    settings: ToolkitConfig = ctx.obj["settings"]
    base = settings.grbp
    if tau is None:
        tau = base.tau
    values = [v.strip() for v in grid.split(",") if v.strip()]
    if not values:
        raise ConfigError("--grid is empty")
    configs = []
    for i, raw in enumerate(values):
        try:
            v = float(raw)
            configs.append(GrbpConfig(beta=v, gamma=v, tau=tau, max_tries=base.max_tries,
                                      min_size=base.min_size, s_min=base.s_min, s_max=base.s_max))
        except (ValueError, ConfigError) as e:
            raise ConfigError(f"grid entry {i} ({raw!r}): {e}") from e

    boxes = None
    sampler = None
    if dataset_path is not None:
        boxes = [
            (r.box, ex.dims)
            for ex in load_dataset(dataset_path)
            for r in ex.gold
            if r.box is not None
        ]
        if not boxes:
            raise InputError(f"dataset {dataset_path} contains no boxed records")
    else:
        sampler = _parse_sampler(sampler_spec) if sampler_spec else BoxSamplerSpec()

    rows = characterize(configs, n_samples, ctx.obj["seed"], sampler=sampler, boxes=boxes)
    write_sweep_csv(rows, out_path)
    for row in rows:
        click.echo(
            f"beta={row.beta:g} gamma={row.gamma:g} tau={row.tau:g}  "
            f"mean_iou={row.mean_iou:.4f} accept={row.acceptance_rate:.4f} "
            f"fallback={row.fallback_rate:.4f} acc@0.5={row.acc_at_half:.4f}"
        )


def _parse_sampler(spec: str) -> BoxSamplerSpec:
    keys = {"W": "width", "H": "height", "min_size": "min_size", "max_frac": "max_frac"}
    kwargs: dict = {}
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"sampler spec entry {item!r} is not key=value")
        k, v = item.split("=", 1)
        if k.strip() not in keys:
            raise ConfigError(f"unknown sampler key {k.strip()!r} (use W, H, min_size, max_frac)")
        field = keys[k.strip()]
        try:
            kwargs[field] = int(v) if field in ("width", "height") else float(v)
        except ValueError as e:
            raise ConfigError(f"sampler key {k.strip()}={v!r} is not numeric") from e
    return BoxSamplerSpec(**kwargs)


@cli.command("parse")
@click.option("--generations", "gens_path", required=True, type=click.Path())
@click.option("--coord-frame", type=click.Choice(_COORD_FRAMES), default=COORD_FRAME_ABSOLUTE,
              show_default=True)
@click.option("--dataset", "dataset_path", type=click.Path(), default=None,
              help="gold dataset supplying image dims (needed for normalized coordinates)")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def cmd_parse(ctx, gens_path, coord_frame, dataset_path, out_path):
    """Parse raw generations into structured records plus diagnostics."""
    dims_by_id = {}
    if dataset_path:
        dims_by_id = {ex.id: ex.dims for ex in load_dataset(dataset_path)}
    elif coord_frame == COORD_FRAME_NORMALIZED_1000:
        raise ConfigError("normalized coordinates need --dataset to supply image dimensions")

    gens = load_generations(gens_path)
    n_records = 0
    n_malformed = 0
    with open(out_path, "w", encoding="utf-8") as f:
        for g in gens:
            parsed = parse_generation(g, coord_frame=coord_frame, dims=dims_by_id.get(g.id))
            n_records += len(parsed.records)
            n_malformed += len(parsed.malformed_lines)
            f.write(json.dumps({
                "id": parsed.id,
                "reasoning": parsed.reasoning,
                "records": [
                    {"span": r.span, "type": r.etype,
                     "box": None if r.box is None else list(r.box.as_tuple())}
                    for r in parsed.records
                ],
                "malformed_lines": [{"line": l, "reason": r} for l, r in parsed.malformed_lines],
            }, ensure_ascii=False))
            f.write("\n")
    click.echo(
        f"parsed {len(gens)} generations: {n_records} records, {n_malformed} malformed lines -> {out_path}"
    )


@cli.command("validate-train")
@click.option("--train", "train_path", required=True, type=click.Path())
@click.option("--gold", "gold_path", type=click.Path(), default=None,
              help="original gold dataset for guard checks")
@click.option("--tau", type=float, default=None,
              help="guard threshold; read from the manifest next to --train when omitted")
@click.option("--out", "out_path", type=click.Path(), default=None, help="write the report as JSON")
def cmd_validate_train(train_path, gold_path, tau, out_path):
    """Re-parse a built training set and check targets against the gold boxes."""
    if gold_path is not None and tau is None:
        manifest_path = train_path + ".manifest.json"
        try:
            with open(manifest_path, "r", encoding="utf-8") as f:
                tau = json.load(f)["grbp"]["tau"]
        except (OSError, KeyError, json.JSONDecodeError) as e:
            raise ConfigError(
                f"cannot read tau from {manifest_path} ({e}); pass --tau explicitly"
            ) from e
    report = validate_training_set(train_path, gold_path=gold_path, tau=tau)
    if out_path:
        _write_json(out_path, report.to_dict())
    click.echo(
        f"{report.n_examples} examples, {report.n_records} records, "
        f"{len(report.malformed)} malformed lines, {len(report.guard_violations)} guard violations"
    )
    if not report.ok:
        raise InputError("training set failed validation (see report)")


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def cmd_serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.ClickException as e:
        e.show()
        sys.exit(EXIT_CONFIG)
    except click.Abort:
        sys.exit(EXIT_CONFIG)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except InvariantViolation as e:
        click.echo(f"internal invariant violation: {e}", err=True)
        sys.exit(EXIT_INVARIANT)
    except ToolkitError as e:
        click.echo(f"input error: {e}", err=True)
        sys.exit(EXIT_INPUT)


if __name__ == "__main__":
    main()
