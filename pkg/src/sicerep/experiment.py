"""End-to-end experiment pipeline: representations, CV, training, evaluation.

Hyperparameters (the SVM regularizer C, and the penalty level for the
single-level representation) are selected by stratified k-fold
cross-validation on the training split only; the final model is then fit
on the full training split and scored once on the test split.  Every stage
is a deterministic function of (config, dataset), so identical runs render
byte-identical reports; wall-clock timings are kept in a separate section.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InsufficientClass
from .represent import (DEFAULT_EPS, DEFAULT_GRID_RATIO, DEFAULT_LEVELS,
                        cov_rp, default_lambda_grid, inverse_cov_rp,
                        sample_covariance, sice_hierarchy, spd_hierarchy,
                        SiceHierarchy)
from .spd import median_heuristic_gamma
from .svm import predict_batch, train_multiclass
from .dataio import resolve_split

REPRESENTATIONS = ("cov", "invcov", "sice", "hierarchy")
INTEGRATORS = ("single", "beta", "m", "mkl", "emk")
DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class ExperimentConfig:
    representation: str = "hierarchy"
    integrator: str = "beta"
    levels: int = DEFAULT_LEVELS
    ratio: float = DEFAULT_GRID_RATIO
    eps: float = DEFAULT_EPS
    gamma: object = "auto"
    c_grid: tuple = DEFAULT_C_GRID
    folds: int = 3
    seed: int = None
    split: object = None            # None -> manifest, else a split spec
    glasso_tol: float = 1e-6
    glasso_max_iter: int = 1000
    dual_tol: float = 1e-8
    opt_iters: int = 100
    opt_tau: float = 1e-5

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ConfigError(f"representation must be one of {REPRESENTATIONS}")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"integrator must be one of {INTEGRATORS}")
        if self.representation in ("cov", "invcov", "sice") \
                and self.integrator != "single":
            raise ConfigError(
                f"representation {self.representation!r} is single-level; "
                f"integrator must be 'single'")
        if self.representation == "hierarchy" and self.integrator == "single" \
                and self.levels != 1:
            raise ConfigError("integrator 'single' on a hierarchy needs levels=1")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if not 0 < self.ratio < 1:
            raise ConfigError("ratio must be in (0, 1)")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.gamma != "auto" and not (isinstance(self.gamma, (int, float))
                                         and self.gamma > 0):
            raise ConfigError("gamma must be 'auto' or a positive number")
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise ConfigError("c_grid must be positive values")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.glasso_max_iter < 1:
            raise ConfigError("glasso_max_iter must be >= 1")
        if self.seed is None:
            raise ConfigError("seed is mandatory")


@dataclass(frozen=True)
class Report:
    config: ExperimentConfig
    n_train: int
    n_test: int
    classes: tuple
    dim: int
    gamma: float
    selected_c: float
    selected_level: object          # int for 'sice', None otherwise
    cv_table: tuple                 # ((c, level, mean_acc), ...)
    weights_kind: str
    weights: object                 # tuple / matrix tuple / None
    j_trace: tuple
    accuracy: float
    confusion: tuple                # rows true class, cols predicted
    per_class_recall: tuple
    timings: dict = field(compare=False)


def build_representation(seq, config, tol=None):
    """One sample's representation as a (possibly depth-1) hierarchy."""
    tol = tol if tol is not None else config.glasso_tol
    if config.representation == "cov":
        return spd_hierarchy(cov_rp(seq, config.eps), sample_id=seq.sample_id)
    if config.representation == "invcov":
        return spd_hierarchy(inverse_cov_rp(seq, config.eps), sample_id=seq.sample_id)
    # sice and hierarchy share the penalized path
    sigma = sample_covariance(seq)
    grid = default_lambda_grid(sigma, config.levels, config.ratio)
    return sice_hierarchy(seq, grid, tol=tol, max_iter=config.glasso_max_iter,
                          sample_id=seq.sample_id)


def slice_level(hierarchy, level):
    """Depth-1 view of one penalty level of a hierarchy."""
    return SiceHierarchy((hierarchy.levels[level],),
                         (hierarchy.lambdas[level],),
                         hierarchy.sample_id)


def _stratified_folds(labels, folds, seed):
    """Deterministic stratified fold assignment (round-robin after shuffle)."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=np.int64)
    for cls in sorted(set(labels)):
        idx = np.array([i for i, l in enumerate(labels) if l == cls])
        if idx.size < folds:
            raise ConfigError(
                f"class {cls!r} has {idx.size} training samples, "
                f"fewer than {folds} folds")
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            assignment[i] = pos % folds
    return assignment


def _accuracy(truth, predicted):
    hits = sum(1 for t, p in zip(truth, predicted) if t == p)
    return hits / len(truth)


def _fit_and_score(train_h, train_l, valid_h, valid_l, kind, c, gamma, config):
    model = train_multiclass(train_h, train_l, kind, c, gamma,
                             iters=config.opt_iters, tau=config.opt_tau,
                             tol=config.dual_tol)
    preds = [r[0] for r in predict_batch(model, valid_h)]
    return _accuracy(valid_l, preds)


def select_hyperparameters(train_hiers, train_labels, config, gamma):
    """Cross-validate C (and the penalty level for 'sice') on training data.

    Returns (selected_c, selected_level, cv_table).  Ties go to the
    smaller C, then the smaller level index.
    """
    assignment = _stratified_folds(train_labels, config.folds, config.seed)
    level_choices = (list(range(config.levels))
                     if config.representation == "sice" else [None])
    kind = "single" if config.representation != "hierarchy" else config.integrator
    if config.representation == "hierarchy" and config.levels == 1:
        kind = config.integrator

    table = []
    best = None
    for c in config.c_grid:
        for level in level_choices:
            accs = []
            for f in range(config.folds):
                tr = [i for i in range(len(train_hiers)) if assignment[i] != f]
                va = [i for i in range(len(train_hiers)) if assignment[i] == f]
                th = [train_hiers[i] for i in tr]
                vh = [train_hiers[i] for i in va]
                if level is not None:
                    th = [slice_level(h, level) for h in th]
                    vh = [slice_level(h, level) for h in vh]
                accs.append(_fit_and_score(
                    th, [train_labels[i] for i in tr],
                    vh, [train_labels[i] for i in va],
                    kind, c, gamma, config))
            mean_acc = float(np.mean(accs))
            table.append((float(c), level, mean_acc))
            key = (-mean_acc, c, -1 if level is None else level)
            if best is None or key < best[0]:
                best = (key, float(c), level)
    return best[1], best[2], tuple(table)


def run_experiment(config, dataset):
    """Full pipeline on one dataset; returns a Report.

    Cross-validation sees only the training split; test sequences are
    touched exactly once, for the final evaluation.
    """
    timings = {}
    t0 = time.perf_counter()

    train_ids, test_ids = resolve_split(dataset, config.split)
    if not train_ids or not test_ids:
        raise ConfigError("both train and test splits must be nonempty")
    by_id = dataset.by_id()
    train_seqs = [by_id[i] for i in train_ids]
    test_seqs = [by_id[i] for i in test_ids]
    timings["split"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    train_hiers = [build_representation(s, config) for s in train_seqs]
    timings["represent_train"] = time.perf_counter() - t0

    train_labels = [s.label for s in train_seqs]
    classes = tuple(sorted(set(train_labels)))
    if len(classes) < 2:
        raise InsufficientClass("training split needs at least two classes")

    t0 = time.perf_counter()
    if config.gamma == "auto":
        mats = [lvl for h in train_hiers for lvl in h.levels]
        gamma = median_heuristic_gamma(mats)
    else:
        gamma = float(config.gamma)
    timings["gamma"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    selected_c, selected_level, cv_table = select_hyperparameters(
        train_hiers, train_labels, config, gamma)
    timings["cross_validation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    final_train = train_hiers
    if selected_level is not None:
        final_train = [slice_level(h, selected_level) for h in train_hiers]
    kind = "single" if config.representation != "hierarchy" else config.integrator
    model = train_multiclass(final_train, train_labels, kind, selected_c, gamma,
                             iters=config.opt_iters, tau=config.opt_tau,
                             tol=config.dual_tol)
    timings["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    test_hiers = [build_representation(s, config) for s in test_seqs]
    if selected_level is not None:
        test_hiers = [slice_level(h, selected_level) for h in test_hiers]
    timings["represent_test"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    test_labels = [s.label for s in test_seqs]
    preds = [r[0] for r in predict_batch(model, test_hiers)]
    accuracy = _accuracy(test_labels, preds)
    class_index = {cls: k for k, cls in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(test_labels, preds):
        # test labels outside the training classes count as errors in the
        # accuracy but have no confusion row
        if t in class_index:
            confusion[class_index[t], class_index[p]] += 1
    recalls = []
    for k in range(len(classes)):
        total = confusion[k].sum()
        recalls.append(float(confusion[k, k] / total) if total else 0.0)
    timings["evaluate"] = time.perf_counter() - t0

    if model.weights is None:
        weights_kind, weights = "none", None
    elif kind in ("beta", "mkl", "single"):
        weights_kind, weights = kind, tuple(model.weights.beta)
    else:
        weights_kind, weights = "m", tuple(model.weights.m)

    return Report(
        config=config, n_train=len(train_seqs), n_test=len(test_seqs),
        classes=classes, dim=train_hiers[0].dim, gamma=float(gamma),
        selected_c=selected_c, selected_level=selected_level,
        cv_table=cv_table, weights_kind=weights_kind, weights=weights,
        j_trace=tuple(model.j_trace), accuracy=accuracy,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        per_class_recall=tuple(recalls), timings=timings), model


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def render_report(report):
    """Deterministic text report (no wall-clock content)."""
    cfg = report.config
    lines = [
        "sicerep experiment report",
        "format: 1",
        "",
        "[config]",
        f"representation: {cfg.representation}",
        f"integrator: {cfg.integrator}",
        f"levels: {cfg.levels}",
        f"ratio: {_fmt(cfg.ratio)}",
        f"eps: {_fmt(cfg.eps)}",
        f"gamma: {_fmt(cfg.gamma) if cfg.gamma != 'auto' else 'auto'}",
        f"c grid: {', '.join(_fmt(float(c)) for c in cfg.c_grid)}",
        f"folds: {cfg.folds}",
        f"seed: {cfg.seed}",
        f"glasso tol: {_fmt(cfg.glasso_tol)}",
        "",
        "[data]",
        f"train samples: {report.n_train}",
        f"test samples: {report.n_test}",
        f"classes: {', '.join(str(c) for c in report.classes)}",
        f"feature dim: {report.dim}",
        "",
        "[selection]",
        f"gamma used: {_fmt(report.gamma)}",
        f"selected c: {_fmt(report.selected_c)}",
        f"selected level: {report.selected_level if report.selected_level is not None else '-'}",
        "cv accuracy by (c, level):",
    ]
    for c, level, acc in report.cv_table:
        lvl = "-" if level is None else str(level)
        lines.append(f"  c={_fmt(c)} level={lvl}: {_fmt(acc)}")
    lines += ["", "[weights]", f"kind: {report.weights_kind}"]
    if report.weights is not None and report.weights_kind != "m":
        lines.append("values: " + ", ".join(_fmt(v) for v in report.weights))
    elif report.weights is not None:
        for row in report.weights:
            lines.append("row: " + ", ".join(_fmt(v) for v in row))
    lines.append("j trace: " + ", ".join(_fmt(v) for v in report.j_trace))
    lines += [
        "",
        "[test]",
        f"accuracy: {_fmt(report.accuracy)}",
        f"confusion (rows true, cols predicted; class order as above):",
    ]
    for row in report.confusion:
        lines.append("  " + " ".join(str(v) for v in row))
    lines.append("per-class recall: " + ", ".join(_fmt(r) for r in report.per_class_recall))
    return "\n".join(lines) + "\n"


def render_timings(report):
    """Wall-clock seconds per stage (not byte-stable across runs)."""
    lines = ["sicerep timing report", ""]
    for stage, seconds in report.timings.items():
        lines.append(f"{stage}: {seconds:.3f}s")
    lines.append(f"total: {sum(report.timings.values()):.3f}s")
    return "\n".join(lines) + "\n"
