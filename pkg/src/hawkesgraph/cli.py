"""Command-line front end: ingest -> fit -> inference -> graphs.

Every command writes its delimited outputs plus a manifest recording the
config hash and input hashes; report paths also render figures. Exit codes:
0 success, 1 computational failure, 2 usage/input error.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import click
import numpy as np

from . import graph as graphmod
from . import inference, report
from .errors import HawkesGraphError, PsvParseError
from .estimator import fit_node
from .ingest import build_panel, read_psv, subgroup_match
from .model import LinkFunction
from .panel import load_panels, save_panels
from .rules import default_rules, load_rules
from .selection import CvConfig, forward_select
from .simulate import SimulationSpec, simulate_panels


class ComputationError(click.ClickException):
    exit_code = 1


def _fail_usage(message: str):
    raise click.UsageError(message)


@dataclass
class RunConfig:
    """One serializable bundle describing a full run; the pipeline command is
    reproducible from (RunConfig, seed, input files) alone."""

    output_dir: str = "out"
    seed: int = 0
    data_dir: str | None = None          # .psv directory, or:
    sim_config: str | None = None        # simulation config path
    n_panels: int = 8
    rules: str | None = None
    fill_horizon: int = 24
    window: int = 6
    sex: int | None = None
    min_age: float | None = None
    max_age: float | None = None
    node_mode: str = "sad"
    d: int = 1
    link: str = "sigmoid"
    bound: float = 10.0
    theta_max: float = 100.0
    tol: float = 1e-7
    max_iter: int = 100000
    select_target: str | None = None
    criterion: str = "tp_rate"
    split: float = 0.8
    decision_threshold: float = 0.5
    class_weighting: bool = False
    standardize: bool = False
    epsilon: float = 0.1
    s: float | None = None
    B: int = 1000
    level: float = 0.9
    threshold: float = 0.15
    linkage: str = "average"
    far_constant: float = 1e3
    K: int = 2
    depth: int = 2
    min_block: int = 4
    lag_agg: str = "sum"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _link(kind: str, bound: float) -> LinkFunction:
    return LinkFunction(kind, domain_bound=bound)


@click.group()
def main():
    """Granger-causal graph learning over clinical time series."""


@main.command()
@click.argument("data_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--output-dir", default="out", show_default=True)
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None,
              help="Override the built-in scoring rule table.")
@click.option("--fill-horizon", default=24, show_default=True)
@click.option("--window", default=6, show_default=True)
@click.option("--sex", type=int, default=None, help="Keep only Gender == SEX.")
@click.option("--min-age", type=float, default=None, help="Keep only Age > MIN_AGE.")
@click.option("--max-age", type=float, default=None)
@click.option("--node-mode", type=click.Choice(["sad", "abnormality"]),
              default="sad", show_default=True)
def ingest(data_dir, output_dir, rules_path, fill_horizon, window, sex,
           min_age, max_age, node_mode):
    """Parse .psv files into a panel archive plus an accounting report."""
    out = _outdir(output_dir)
    files = sorted(Path(data_dir).glob("*.psv"))
    if not files:
        _fail_usage(f"no .psv files in {data_dir}")
    rules = load_rules(rules_path) if rules_path else default_rules()
    panels = []
    rows_before = rows_after = 0
    skipped_subgroup = failed = 0
    for f in files:
        try:
            rec = read_psv(f)
        except PsvParseError as exc:
            click.echo(f"skipping {f.name}: {exc}", err=True)
            failed += 1
            continue
        if not subgroup_match(rec, sex=sex, min_age=min_age, max_age=max_age):
            skipped_subgroup += 1
            continue
        rows_before += rec.n_rows
        panel = build_panel(rec, rules, fill_horizon=fill_horizon,
                            window_hours=window, node_mode=node_mode)
        rows_after += panel.T
        panels.append(panel)
    if not panels:
        if failed == len(files):
            _fail_usage("all input files failed to parse")
        _fail_usage("no patients left after filtering")
    archive = out / "panels.npz"
    save_panels(archive, panels)
    report.write_kv_report(out / "ingest_report.txt", "ingest", {
        "files_seen": len(files),
        "files_failed": failed,
        "patients_kept": len(panels),
        "patients_skipped_subgroup": skipped_subgroup,
        "rows_before": rows_before,
        "rows_after_fill_drop": rows_after,
        "node_mode": node_mode,
    })
    config = dict(fill_horizon=fill_horizon, window=window, sex=sex,
                  min_age=min_age, max_age=max_age, node_mode=node_mode,
                  rules=rules_path or "builtin")
    report.write_manifest(out / "ingest_manifest.json", "ingest", config, files)
    click.echo(f"wrote {archive} ({len(panels)} patients)")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True, help="Simulation config (JSON).")
@click.option("-o", "--output-dir", default="out", show_default=True)
@click.option("--panels", "n_panels", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--psv", "export_psv", is_flag=True,
              help="Also export each panel in the pipe-separated dialect.")
def simulate(config_path, output_dir, n_panels, seed, export_psv):
    """Draw synthetic panels plus the generating ground truth."""
    from .ingest import panel_to_record, write_psv
    out = _outdir(output_dir)
    spec = SimulationSpec.from_config(Path(config_path).read_text())
    panels, thetas, info = simulate_panels(spec, n_panels, seed)
    archive = out / "panels.npz"
    save_panels(archive, panels)
    if export_psv:
        psv_dir = _outdir(out / "psv")
        for panel in panels:
            (psv_dir / f"{panel.patient_id}.psv").write_text(
                write_psv(panel_to_record(panel)))
    np.savez(out / "truth.npz", **{f"theta_{i}": th for i, th in enumerate(thetas)})
    report.write_kv_report(out / "simulate_report.txt", "simulate", {
        "panels": n_panels, "T": spec.T, "nodes": spec.n1,
        "clamp_count": info["clamp_count"], "seed": seed,
    })
    report.write_manifest(out / "simulate_manifest.json", "simulate",
                          dict(seed=seed, n_panels=n_panels), [config_path])
    click.echo(f"wrote {archive}")


def _load_archive(archive):
    path = Path(archive)
    if not path.exists():
        _fail_usage(f"{archive} not found: run the ingest or simulate "
                    "command first")
    return load_panels(path)


def _features_from(trace_path):
    if trace_path is None:
        return None
    payload = json.loads(Path(trace_path).read_text())
    return payload["final_subset"]


@main.command()
@click.argument("archive", type=click.Path())
@click.option("-o", "--output-dir", default="out", show_default=True)
@click.option("--d", "depth", default=1, show_default=True, help="Lag depth.")
@click.option("--link", type=click.Choice(["linear", "sigmoid"]),
              default="sigmoid", show_default=True)
@click.option("--bound", default=10.0, show_default=True,
              help="Sigmoid predictor bound M.")
@click.option("--theta-max", default=100.0, show_default=True)
@click.option("--tol", default=1e-7, show_default=True)
@click.option("--max-iter", default=100000, show_default=True)
@click.option("--target", "targets", multiple=True,
              help="Fit only these nodes (default: all).")
@click.option("--features-from", type=click.Path(exists=True), default=None,
              help="JSON selection trace restricting the feature set.")
@click.option("--class-weighting/--no-class-weighting", default=False,
              show_default=True)
@click.option("--standardize/--no-standardize", default=False, show_default=True)
@click.option("--lag-agg", type=click.Choice(["sum", "max_abs", "first_lag"]),
              default="sum", show_default=True)
@click.option("--verbose", is_flag=True, help="Stream solver diagnostics.")
def fit(archive, output_dir, depth, link, bound, theta_max, tol, max_iter,
        targets, features_from, class_weighting, standardize, lag_agg, verbose):
    """Fit the per-node models and export the coefficient graph."""
    out = _outdir(output_dir)
    panels = _load_archive(archive)
    lk = _link(link, bound)
    features = _features_from(features_from)
    names = targets if targets else panels[0].y_names
    models = []
    rows = []
    trace_fn = None
    if verbose:
        def trace_fn(it, residual, fnorm):
            click.echo(f"iter={it} residual={residual:.3e} field_norm={fnorm:.3e}",
                       err=True)
    try:
        for name in names:
            model, res = fit_node(panels, name, depth, lk, features=features,
                                  class_weighting=class_weighting,
                                  standardize=standardize, theta_max=theta_max,
                                  tol=tol, max_iter=max_iter, trace_fn=trace_fn)
            models.append(model)
            blocks = model.blocks
            weights = {"const": blocks["nu"]}
            for z, val in zip(model.layout.z_names, blocks["gamma"]):
                weights[z] = float(val)
            for x, lagrow in zip(model.layout.x_names, blocks["beta"]):
                weights[x] = graphmod.aggregate_lags(lagrow, lag_agg)
            for ynm, lagrow in zip(model.layout.y_names, blocks["alpha"]):
                weights[ynm] = graphmod.aggregate_lags(lagrow, lag_agg)
            # feature rows follow the selection order when a trace is given
            order = ["const"] + [f for f in (features or []) if f in weights]
            order += [f for f in weights if f not in order]
            rows.extend((name, f, weights[f]) for f in order)
            if not res.converged:
                click.echo(f"warning: {name} fit not converged "
                           f"(residual={res.residual:.2e})", err=True)
    except HawkesGraphError as exc:
        raise ComputationError(str(exc))
    report.write_tsv(out / "coefficients.tsv",
                     ("node", "feature", "weight"), rows, title="fit")
    np.savez(out / "models.npz",
             **{f"theta_{m.target}": m.theta for m in models})
    if len(models) == len(panels[0].y_names) and not targets:
        adj = graphmod.extract_adjacency(models, lag_agg=lag_agg)
        (out / "graph.json").write_text(report.export_graph(adj, "json"))
        (out / "graph.dot").write_text(report.export_graph(adj, "dot"))
        report.save_heatmap_figure(adj.weights, adj.labels,
                                   out / "coefficients.png", title="edge weights")
    config = dict(d=depth, link=link, bound=bound, theta_max=theta_max,
                  tol=tol, max_iter=max_iter, targets=list(names),
                  class_weighting=class_weighting, standardize=standardize,
                  lag_agg=lag_agg)
    report.write_manifest(out / "fit_manifest.json", "fit", config, [archive])
    click.echo(f"fitted {len(models)} node models")


@main.command()
@click.argument("archive", type=click.Path())
@click.option("-o", "--output-dir", default="out", show_default=True)
@click.option("--target", required=True)
@click.option("--criterion", type=click.Choice(["tp_rate", "classification_error", "auc"]),
              default="tp_rate", show_default=True)
@click.option("--d", "depth", default=1, show_default=True)
@click.option("--link", type=click.Choice(["linear", "sigmoid"]),
              default="sigmoid", show_default=True)
@click.option("--split", default=0.8, show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--class-weighting/--no-class-weighting", default=True,
              show_default=True)
@click.option("--standardize/--no-standardize", default=False, show_default=True)
@click.option("--initial", multiple=True, help="Initial feature subset.")
@click.option("--seed", default=0, show_default=True)
def select(archive, output_dir, target, criterion, depth, link, split,
           threshold, class_weighting, standardize, initial, seed):
    """Forward feature selection for one target node."""
    out = _outdir(output_dir)
    panels = _load_archive(archive)
    cv = CvConfig(criterion=criterion, split=split, decision_threshold=threshold,
                  class_weighting=class_weighting, d=depth,
                  link=_link(link, 10.0), standardize=standardize, seed=seed)
    candidates = [n for n in (panels[0].y_names + panels[0].x_names +
                              panels[0].z_names) if n != target]
    try:
        trace = forward_select(panels, target, candidates, cv,
                               initial_subset=tuple(initial) if initial else None)
    except HawkesGraphError as exc:
        raise ComputationError(str(exc))
    rows = [(target, feat, val) for feat, val in trace.steps]
    report.write_tsv(out / "selection_trace.tsv",
                     ("node", "feature", criterion), rows, title="selection")
    payload = {
        "target": target, "criterion": criterion,
        "initial_subset": list(trace.initial_subset),
        "steps": [[f, v] for f, v in trace.steps],
        "final_subset": list(trace.final_subset),
        "baseline_value": trace.baseline_value,
    }
    (out / "selection.json").write_text(json.dumps(payload, indent=2) + "\n")
    config = dict(target=target, criterion=criterion, d=depth, link=link,
                  split=split, threshold=threshold,
                  class_weighting=class_weighting, seed=seed)
    report.write_manifest(out / "select_manifest.json", "select", config, [archive])
    click.echo(f"selected {list(trace.final_subset)}")


@main.command()
@click.argument("archive", type=click.Path())
@click.option("-o", "--output-dir", default="out", show_default=True)
@click.option("--target", required=True)
@click.option("--d", "depth", default=1, show_default=True)
@click.option("--link", type=click.Choice(["linear", "sigmoid"]),
              default="linear", show_default=True)
@click.option("--epsilon", default=0.1, show_default=True)
@click.option("--s", "s_param", default=None, type=float,
              help="Confidence parameter; default calibrates to --level.")
@click.option("--level", default=0.9, show_default=True)
@click.option("--theta-max", default=100.0, show_default=True)
def ci(archive, output_dir, target, depth, link, epsilon, s_param, level,
       theta_max):
    """Error-bound report plus per-coordinate LP confidence intervals."""
    from .estimator import build_feasible_set
    from .model import stack_designs
    out = _outdir(output_dir)
    panels = _load_archive(archive)
    lk = _link(link, 10.0)
    try:
        design = stack_designs(panels, target, depth)
        bound = inference.parameter_error_bound(design, lk, epsilon)
        s = s_param if s_param is not None else inference.calibrate_s(
            level, design.N, design.T)
        feasible = build_feasible_set(design, lk, theta_max=theta_max)
        diags = inference.PsiDiagnostics()
        intervals = inference.coordinate_intervals(design, feasible, s, lk,
                                                   diagnostics=diags)
    except HawkesGraphError as exc:
        raise ComputationError(str(exc))
    report.write_kv_report(out / "bound_report.txt", "bounds", {
        "target": target, "epsilon": bound.epsilon,
        "delta_inf_bound": bound.delta_inf_bound,
        "delta_l2_bound": bound.delta_l2_bound,
        "theta_error_bound": bound.theta_error_bound,
        "m_g": bound.m_g, "M_w": bound.M_w, "lambda1": bound.lambda1,
        "N": bound.N, "T": bound.T, "kappa": bound.kappa,
        "s": s, "nominal_level": inference.nominal_level(s, bound.N, bound.T),
        "radicand_clamps": diags.radicand_clamps, "nu_clips": diags.nu_clips,
    })
    names = design.layout.column_names()
    rows = [(names[k], iv.lower, iv.upper, iv.feasible, iv.conservative)
            for k, iv in enumerate(intervals)]
    report.write_tsv(out / "intervals.tsv",
                     ("coordinate", "lower", "upper", "feasible", "conservative"),
                     rows, title="ci")
    config = dict(target=target, d=depth, link=link, epsilon=epsilon,
                  s=s_param, level=level)
    report.write_manifest(out / "ci_manifest.json", "ci", config, [archive])
    click.echo(f"wrote {out / 'intervals.tsv'}")


@main.command()
@click.argument("archive", type=click.Path())
@click.option("-o", "--output-dir", default="out", show_default=True)
@click.option("--d", "depth", default=1, show_default=True)
@click.option("--link", type=click.Choice(["linear", "sigmoid"]),
              default="linear", show_default=True)
@click.option("--B", "n_boot", default=1000, show_default=True)
@click.option("--level", default=0.9, show_default=True)
@click.option("--threshold", default=0.15, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--class-weighting/--no-class-weighting", default=False,
              show_default=True)
@click.option("--standardize/--no-standardize", default=False, show_default=True)
def bootstrap(archive, output_dir, depth, link, n_boot, level, threshold,
              seed, class_weighting, standardize):
    """Bootstrap edge intervals, the existence-tested graph and figures."""
    out = _outdir(output_dir)
    panels = _load_archive(archive)
    try:
        edges = inference.bootstrap_edges(
            panels, depth, _link(link, 10.0), B=n_boot, level=level, seed=seed,
            class_weighting=class_weighting, standardize=standardize)
    except HawkesGraphError as exc:
        raise ComputationError(str(exc))
    rows = []
    for tgt_row in edges.intervals:
        for iv in tgt_row:
            rows.append((iv.source, iv.target, iv.lower, iv.median, iv.upper,
                         int(iv.exists), iv.weight))
    report.write_tsv(out / "edges.tsv",
                     ("source", "target", "lower", "median", "upper",
                      "exists", "weight"), rows, title="bootstrap")
    adj = graphmod.Adjacency(edges.weight_matrix(), edges.node_names)
    thresholded = graphmod.threshold_graph(adj, threshold)
    (out / "graph.json").write_text(
        report.export_graph(thresholded, "json", edges.intervals))
    (out / "graph.dot").write_text(
        report.export_graph(thresholded, "dot", edges.intervals))
    report.save_network_figure(thresholded, out / "network.png",
                               title=f"bootstrap graph (|w| > {threshold})")
    config = dict(d=depth, link=link, B=n_boot, level=level,
                  threshold=threshold, seed=seed)
    report.write_manifest(out / "bootstrap_manifest.json", "bootstrap",
                          config, [archive])
    click.echo(f"wrote {out / 'edges.tsv'} "
               f"({edges.B_effective} effective replicates)")


@main.command()
@click.argument("source", type=click.Path(exists=True))
@click.option("-o", "--output-dir", default="out", show_default=True)
@click.option("--linkage", type=click.Choice(["average", "complete", "single"]),
              default="average", show_default=True)
@click.option("--far-constant", default=1e3, show_default=True)
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None)
def cluster(source, output_dir, linkage, far_constant, rules_path):
    """Hierarchical clustering from a panel archive (indicator correlation)
    or a graph.json (symmetrized adjacency)."""
    out = _outdir(output_dir)
    src = Path(source)
    try:
        if src.suffix == ".json":
            adj = report.graph_from_json(src.read_text())
            sym = graphmod.symmetrize(adj)
            corr = sym
            labels = adj.labels
            dist = graphmod.correlation_to_distance(sym, far_constant)
        else:
            panels = _load_archive(src)
            series = np.hstack([p.binary_y() for p in panels])
            labels = panels[0].y_names
            corr = graphmod.abnormality_correlation(series)
            dist = graphmod.correlation_to_distance(corr, far_constant)
        dend = graphmod.hierarchical_cluster(dist, linkage=linkage, labels=labels)
    except HawkesGraphError as exc:
        raise ComputationError(str(exc))
    rows = [(int(a), int(b), h, int(sz)) for a, b, h, sz in dend.merges]
    report.write_tsv(out / "merges.tsv",
                     ("cluster_a", "cluster_b", "height", "size"),
                     rows, title="cluster")
    report.save_dendrogram_figure(dend, out / "dendrogram.png",
                                  title=f"{linkage} linkage")
    report.save_heatmap_figure(corr, labels, out / "similarity.png",
                               title="similarity matrix")
    config = dict(linkage=linkage, far_constant=far_constant)
    report.write_manifest(out / "cluster_manifest.json", "cluster", config,
                          [source])
    click.echo(f"wrote {out / 'merges.tsv'}")


@main.command()
@click.argument("graph_json", type=click.Path(exists=True))
@click.option("-o", "--output-dir", default="out", show_default=True)
@click.option("--k", "n_blocks", default=2, show_default=True)
@click.option("--depth", default=2, show_default=True)
@click.option("--min-block", default=4, show_default=True)
@click.option("--threshold", default=0.15, show_default=True)
@click.option("--seed", default=0, show_default=True)
def blockmodel(graph_json, output_dir, n_blocks, depth, min_block, threshold,
               seed):
    """Recursive SVD blockmodelling of a thresholded directed graph."""
    out = _outdir(output_dir)
    adj = report.graph_from_json(Path(graph_json).read_text())
    W = (np.abs(adj.weights) > threshold).astype(float)
    try:
        bc = graphmod.hierarchical_blockmodel(
            W, K=n_blocks, max_depth=depth, min_block_size=min_block,
            seed=seed, labels=adj.labels)
    except HawkesGraphError as exc:
        raise ComputationError(str(exc))
    leaves = bc.leaf_labels()
    rows = [(lbl, leaves[lbl]) for lbl in bc.labels]
    report.write_tsv(out / "blocks.tsv", ("node", "block"), rows,
                     title="blockmodel")
    report.write_kv_report(out / "blockmodel_report.txt", "blockmodel", {
        "K": bc.K, "d": bc.d,
        "explained_variance_ratio": bc.explained_variance_ratio,
        "threshold": threshold, "depth": depth,
    })
    report.save_block_figure(W, bc, out / "blocks.png", title="blockmodel")
    config = dict(K=n_blocks, depth=depth, min_block=min_block,
                  threshold=threshold, seed=seed)
    report.write_manifest(out / "blockmodel_manifest.json", "blockmodel",
                          config, [graph_json])
    click.echo(f"wrote {out / 'blocks.tsv'}")


@main.command("export")
@click.argument("graph_json", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["dot", "json"]),
              required=True)
@click.option("-o", "--output", type=click.Path(), required=True)
def export_cmd(graph_json, fmt, output):
    """Re-export a stored graph in another format."""
    adj = report.graph_from_json(Path(graph_json).read_text())
    Path(output).write_text(report.export_graph(adj, fmt))
    click.echo(f"wrote {output}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True, help="RunConfig JSON.")
@click.pass_context
def pipeline(ctx, config_path):
    """Full run from one config: ingest/simulate -> (select) -> fit ->
    bootstrap -> cluster -> blockmodel."""
    cfg = RunConfig.from_json(Path(config_path).read_text())
    if (cfg.data_dir is None) == (cfg.sim_config is None):
        _fail_usage("config must set exactly one of data_dir / sim_config")
    out = _outdir(cfg.output_dir)
    if cfg.data_dir is not None:
        ctx.invoke(ingest, data_dir=cfg.data_dir, output_dir=cfg.output_dir,
                   rules_path=cfg.rules, fill_horizon=cfg.fill_horizon,
                   window=cfg.window, sex=cfg.sex, min_age=cfg.min_age,
                   max_age=cfg.max_age, node_mode=cfg.node_mode)
    else:
        ctx.invoke(simulate, config_path=cfg.sim_config,
                   output_dir=cfg.output_dir, n_panels=cfg.n_panels,
                   seed=cfg.seed)
    archive = str(out / "panels.npz")
    features_from = None
    if cfg.select_target:
        ctx.invoke(select, archive=archive, output_dir=cfg.output_dir,
                   target=cfg.select_target, criterion=cfg.criterion,
                   depth=cfg.d, link=cfg.link, split=cfg.split,
                   threshold=cfg.decision_threshold,
                   class_weighting=cfg.class_weighting,
                   standardize=cfg.standardize, initial=(), seed=cfg.seed)
        features_from = str(out / "selection.json")
    ctx.invoke(fit, archive=archive, output_dir=cfg.output_dir, depth=cfg.d,
               link=cfg.link, bound=cfg.bound, theta_max=cfg.theta_max,
               tol=cfg.tol, max_iter=cfg.max_iter,
               targets=(cfg.select_target,) if cfg.select_target else (),
               features_from=features_from,
               class_weighting=cfg.class_weighting,
               standardize=cfg.standardize, lag_agg=cfg.lag_agg,
               verbose=False)
    ctx.invoke(bootstrap, archive=archive, output_dir=cfg.output_dir,
               depth=cfg.d, link=cfg.link, n_boot=cfg.B, level=cfg.level,
               threshold=cfg.threshold, seed=cfg.seed,
               class_weighting=cfg.class_weighting,
               standardize=cfg.standardize)
    graph_path = str(out / "graph.json")
    ctx.invoke(cluster, source=graph_path, output_dir=cfg.output_dir,
               linkage=cfg.linkage, far_constant=cfg.far_constant,
               rules_path=None)
    ctx.invoke(blockmodel, graph_json=graph_path, output_dir=cfg.output_dir,
               n_blocks=cfg.K, depth=cfg.depth, min_block=cfg.min_block,
               threshold=cfg.threshold, seed=cfg.seed)
    report.write_manifest(out / "pipeline_manifest.json", "pipeline",
                          asdict(cfg), [config_path])
    click.echo("pipeline complete")


if __name__ == "__main__":
    main()
