"""Structured-text reports, graph exports and figure rendering.

Reports are plain text with stable key order so reruns diff cleanly; the
only nondeterministic content is a timestamp confined to the first header
line. Figures are rendered with the Agg backend and written next to the
delimited output.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ValidationError  # noqa: E402
from .graph import Adjacency  # noqa: E402


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_kv_report(path, title: str, mapping: dict) -> None:
    """key<TAB>value lines under a single timestamped header line."""
    lines = [f"# {title} generated={_timestamp()}"]
    for key, value in mapping.items():
        lines.append(f"{key}\t{value}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_tsv(path, header, rows, title: str = "") -> None:
    lines = [f"# {title} generated={_timestamp()}"]
    lines.append("\t".join(str(h) for h in header))
    for row in rows:
        lines.append("\t".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command: str, config: dict, inputs) -> None:
    """Deterministic JSON manifest: config hash plus input file hashes."""
    payload = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "config_hash": config_hash(config),
        "inputs": {str(p): file_hash(p) for p in inputs},
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True,
                                     default=str) + "\n")


# ---------------------------------------------------------------------------
# Graph exports
# ---------------------------------------------------------------------------

def export_graph_dot(adj: Adjacency, intervals=None) -> str:
    """DOT digraph; positive edges solid blue, negative dashed red."""
    lines = ["digraph G {"]
    for lbl in adj.labels:
        lines.append(f'    "{lbl}";')
    n = len(adj.labels)
    for i in range(n):
        for j in range(n):
            w = adj.weights[i, j]
            if w == 0.0:
                continue
            color, style = ("blue", "solid") if w > 0 else ("red", "dashed")
            lines.append(
                f'    "{adj.labels[j]}" -> "{adj.labels[i]}" '
                f'[weight="{w:.6g}", label="{w:.3g}", color={color}, style={style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graph_json(adj: Adjacency, edge_intervals=None) -> str:
    edges = []
    n = len(adj.labels)
    for i in range(n):
        for j in range(n):
            w = adj.weights[i, j]
            if w == 0.0:
                continue
            edge = {"source": adj.labels[j], "target": adj.labels[i],
                    "weight": float(w)}
            if edge_intervals is not None:
                iv = edge_intervals[i][j]
                edge.update(lower=iv.lower, upper=iv.upper, exists=iv.exists)
            edges.append(edge)
    payload = {"directed": adj.directed, "nodes": list(adj.labels),
               "edges": edges}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def export_graph(adj: Adjacency, fmt: str, edge_intervals=None) -> str:
    if fmt == "dot":
        return export_graph_dot(adj, edge_intervals)
    if fmt == "json":
        return export_graph_json(adj, edge_intervals)
    raise ValidationError(f"unknown graph format {fmt!r}")


def graph_from_json(text: str) -> Adjacency:
    payload = json.loads(text)
    labels = tuple(payload["nodes"])
    n = len(labels)
    W = np.zeros((n, n))
    for e in payload["edges"]:
        W[labels.index(e["target"]), labels.index(e["source"])] = e["weight"]
    return Adjacency(W, labels, directed=payload.get("directed", True))


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

def save_network_figure(adj: Adjacency, path, title: str = "") -> None:
    """Circular layout; blue arrows promote, red inhibit, width ~ |weight|."""
    n = len(adj.labels)
    angles = 2 * np.pi * np.arange(n) / max(n, 1)
    xs, ys = np.cos(angles), np.sin(angles)
    fig, ax = plt.subplots(figsize=(7, 7))
    for i in range(n):
        for j in range(n):
            w = adj.weights[i, j]
            if w == 0.0 or i == j:
                continue
            color = "tab:blue" if w > 0 else "tab:red"
            ax.annotate(
                "", xy=(xs[i], ys[i]), xytext=(xs[j], ys[j]),
                arrowprops=dict(arrowstyle="-|>", color=color,
                                lw=0.5 + 2.5 * min(abs(w), 2.0),
                                shrinkA=16, shrinkB=16, alpha=0.8))
    ax.scatter(xs, ys, s=900, c="white", edgecolors="black", zorder=3)
    for lbl, x, y in zip(adj.labels, xs, ys):
        ax.annotate(str(lbl)[:14], (x, y), ha="center", va="center",
                    fontsize=7, zorder=4)
    ax.set_title(title)
    ax.set_xlim(-1.35, 1.35)
    ax.set_ylim(-1.35, 1.35)
    ax.axis("off")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_heatmap_figure(matrix: np.ndarray, labels, path, title: str = "",
                        symmetric_scale: bool = True) -> None:
    matrix = np.asarray(matrix, dtype=float)
    fig, ax = plt.subplots(figsize=(8, 7))
    if symmetric_scale and matrix.size:
        bound = max(float(np.max(np.abs(matrix))), 1e-12)
        im = ax.imshow(matrix, cmap="RdBu_r", vmin=-bound, vmax=bound)
    else:
        im = ax.imshow(matrix, cmap="viridis")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels, fontsize=6)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(title)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_dendrogram_figure(dend, path, title: str = "") -> None:
    """Render the merge tree; heights on the y axis."""
    from scipy.cluster import hierarchy as sp_hier
    fig, ax = plt.subplots(figsize=(9, 5))
    labels = list(dend.labels) if dend.labels else None
    with np.errstate(all="ignore"):
        sp_hier.dendrogram(dend.merges, labels=labels, ax=ax,
                           leaf_font_size=7, color_threshold=None)
    ax.set_title(title)
    ax.set_ylabel("merge height")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_block_figure(W: np.ndarray, clustering, path, title: str = "") -> None:
    """Adjacency reordered by block with block boundaries drawn."""
    order = np.argsort(clustering.assignment, kind="stable")
    Wp = np.asarray(W)[np.ix_(order, order)]
    labels = [clustering.labels[i] for i in order]
    fig, ax = plt.subplots(figsize=(8, 7))
    ax.imshow(Wp, cmap="Greys", vmin=0, vmax=max(1.0, float(np.max(Wp))))
    sorted_blocks = clustering.assignment[order]
    boundaries = np.flatnonzero(np.diff(sorted_blocks)) + 0.5
    for b in boundaries:
        ax.axhline(b, color="tab:orange", lw=1.0)
        ax.axvline(b, color="tab:orange", lw=1.0)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels, fontsize=6)
    ax.set_title(title)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
