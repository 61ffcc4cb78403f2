"""Text-format model dumps and recommendation exports.

A model dump is a single text file: one JSON header line describing the
model, then one CSV block per state array, each introduced by a
``# section: <name>`` marker.  Everything is plain text so dumps diff
cleanly across runs and implementations.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import MostPopularModel, RandomModel
from .knn import ItemKNNModel, UserKNNModel
from .mf_sgd import BiasedMFModel, SVDppModel


def _matrix_block(name, prefix, M):
    f = M.shape[1]
    lines = [f"# section: {name}", prefix + "," + ",".join(f"f{l}" for l in range(f))]
    for r in range(M.shape[0]):
        lines.append(f"{r}," + ",".join(repr(float(v)) for v in M[r]))
    return lines


def _vector_block(name, prefix, v):
    lines = [f"# section: {name}", f"{prefix},value"]
    for r, x in enumerate(v):
        lines.append(f"{r},{repr(float(x))}")
    return lines


def _model_sections(model):
    if isinstance(model, MostPopularModel):
        return [_vector_block("popularity", "item", model.popularity)]
    if isinstance(model, RandomModel):
        return []
    if isinstance(model, (UserKNNModel, ItemKNNModel)):
        # top-k neighbor lists, the part of the similarity state scoring uses
        k = model.hyper.k_neighbors
        kind = "user" if isinstance(model, UserKNNModel) else "item"
        lines = ["# section: neighbors", f"{kind},neighbor,similarity"]
        idx = np.arange(model.sim.shape[0])
        for r in range(model.sim.shape[0]):
            order = np.lexsort((idx, -model.sim[r]))
            order = order[order != r][:k]
            for v in order:
                lines.append(f"{r},{v},{repr(float(model.sim[r, v]))}")
        return [lines]
    sections = [
        _matrix_block("user_factors", "user", model.P),
        _matrix_block("item_factors", "item", model.Q),
    ]
    if isinstance(model, (BiasedMFModel, SVDppModel)):
        sections.append(_vector_block("user_bias", "user", model.bu))
        sections.append(_vector_block("item_bias", "item", model.bi))
    if isinstance(model, SVDppModel):
        sections.append(_matrix_block("implicit_item_factors", "item", model.Y))
    return sections


def dump_model(model, path):
    """Write the model state as a JSON header plus CSV sections."""
    header = {
        "algorithm": model.algorithm.value,
        "train_seed": model.train_seed,
        "n_users": model.n_users,
        "n_items": model.n_items,
        "hyper": vars(model.hyper).copy(),
    }
    if hasattr(model, "mu"):
        header["global_mean"] = float(model.mu)
    lines = [json.dumps(header, sort_keys=True)]
    for block in _model_sections(model):
        lines.extend(block)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_model_dump(path):
    """Parse a dump back into (header, {section: ndarray})."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    sections = {}
    name = None
    rows = []
    expect_header = False

    def flush():
        if name is not None:
            sections[name] = np.array(rows, dtype=np.float64)

    for line in lines[1:]:
        if line.startswith("# section: "):
            flush()
            name = line[len("# section: "):]
            rows = []
            expect_header = True
        elif expect_header:
            expect_header = False
        else:
            rows.append([float(x) for x in line.split(",")[1:]])
    flush()
    return header, sections


def export_recommendations(R_folds, cohort, path):
    """Per-fold top-N lists as a `fold,user,rank,item` CSV with external ids."""
    ds = cohort.dataset
    lines = ["fold,user,rank,item"]
    for R in R_folds:
        for u in range(R.n_users):
            for rank, item in enumerate(R.items_of(u), start=1):
                lines.append(f"{R.fold},{ds.user_ids[u]},{rank},{ds.item_ids[int(item)]}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
