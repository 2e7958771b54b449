"""Genetic search over booster hyperparameters and feature subsets at once.

A chromosome is seven booster genes followed by ``k`` distinct feature indices
into the TF-IDF vocabulary. Fitness is the geometric mean of TPR and TNR on a
fixed stratified hold-out split. Each generation keeps the ``C`` fittest
chromosomes as parents and refills the population with ``P - C`` mutated
children produced by uniform crossover.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from gaboost import evaluation, gbt
from gaboost._seeding import derive_rng, derive_seed

log = logging.getLogger(__name__)

NUM_BOOSTER_GENES = 7
BOOSTER_GENES = ("learning_rate", "n_estimators", "max_depth", "min_child_weight",
                 "gamma", "subsample", "colsample_bytree")
GENE_RANGES = {
    "learning_rate": (0.01, 1.0),
    "n_estimators": (10, 1500),
    "max_depth": (1, 10),
    "min_child_weight": (0.01, 10.0),
    "gamma": (0.01, 10.0),
    "subsample": (0.01, 1.0),
    "colsample_bytree": (0.01, 1.0),
}
INTEGER_GENES = frozenset({"n_estimators", "max_depth"})
N_ESTIMATORS_STEP = 25
MUTATION_SCALE = 0.10  # delta ~ U(-10%, +10%) of the gene's range width


class GaError(ValueError):
    pass


@dataclass(frozen=True)
class GaConfig:
    feature_percent: float = 10.0
    population_size: int = 400
    generations: int = 50
    crossover_count: int | None = None
    crossover_ratio: float = 0.6
    master_seed: int = 723
    split_fraction: float = 0.30
    threads: int = 1

    def __post_init__(self):
        if self.crossover_count is None:
            if not 0.0 < self.crossover_ratio <= 1.0:
                raise GaError(f"crossover_ratio must be in (0, 1], got {self.crossover_ratio}")
            c = max(1, int(round(self.crossover_ratio * self.population_size)))
            object.__setattr__(self, "crossover_count", c)
        if not 0.0 < self.feature_percent <= 100.0:
            raise GaError(f"feature percent F must be in (0, 100], got {self.feature_percent}")
        if self.population_size < 1:
            raise GaError("population size P must be >= 1")
        if not 1 <= self.crossover_count <= self.population_size:
            raise GaError(f"crossover count C must be in [1, P={self.population_size}], "
                          f"got {self.crossover_count}")
        if self.generations < 1:
            raise GaError("generations G must be >= 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise GaError("split_fraction must be in (0, 1)")

    @property
    def experiment_id(self) -> str:
        return experiment_id(self)

    def feature_gene_count(self, n_features: int) -> int:
        k = int(round(self.feature_percent / 100.0 * n_features))
        if k < 1:
            raise GaError(f"F={self.feature_percent}% of {n_features} features selects no feature")
        return k

    def to_dict(self) -> dict:
        return {"F": self.feature_percent, "P": self.population_size,
                "C": self.crossover_count, "G": self.generations,
                "crossover_ratio": self.crossover_ratio, "master_seed": self.master_seed,
                "split_fraction": self.split_fraction}


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:g}"


def experiment_id(config: GaConfig) -> str:
    return (f"F{_fmt_num(config.feature_percent)}-P{config.population_size}"
            f"-C{config.crossover_count}-G{config.generations}")


@dataclass(frozen=True)
class Chromosome:
    booster_genes: tuple
    feature_genes: tuple[int, ...]  # sorted, distinct

    def __post_init__(self):
        genes = tuple(self.booster_genes)
        if len(genes) != NUM_BOOSTER_GENES:
            raise GaError(f"expected {NUM_BOOSTER_GENES} booster genes, got {len(genes)}")
        genes = tuple(int(round(g)) if name in INTEGER_GENES else float(g)
                      for name, g in zip(BOOSTER_GENES, genes))
        object.__setattr__(self, "booster_genes", genes)
        object.__setattr__(self, "feature_genes",
                           tuple(sorted(int(f) for f in self.feature_genes)))

    @property
    def genes(self) -> tuple:
        """Flat gene sequence: booster genes then feature genes."""
        return self.booster_genes + self.feature_genes

    def booster_params(self, seed: int = gbt.DEFAULT_SEED) -> gbt.BoosterParams:
        return gbt.BoosterParams(**dict(zip(BOOSTER_GENES, self.booster_genes)), seed=seed)

    def is_valid(self, n_features: int | None = None) -> bool:
        if len(set(self.feature_genes)) != len(self.feature_genes):
            return False
        if n_features is not None and any(not 0 <= f < n_features for f in self.feature_genes):
            return False
        for name, g in zip(BOOSTER_GENES, self.booster_genes):
            lo, hi = GENE_RANGES[name]
            if not lo <= g <= hi:
                return False
        return True

    def to_dict(self, vocabulary=None) -> dict:
        d = {"booster": dict(zip(BOOSTER_GENES, self.booster_genes)),
             "features": list(self.feature_genes)}
        if vocabulary is not None:
            d["terms"] = [vocabulary.term(f) for f in self.feature_genes]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Chromosome":
        return cls(tuple(d["booster"][n] for n in BOOSTER_GENES), tuple(d["features"]))


# ---------------------------------------------------------------- operators

def _draw_excluding(rng: np.random.Generator, n: int, exclude: set[int], count: int) -> list[int]:
    """``count`` distinct uniform draws from [0, n) avoiding ``exclude``."""
    free = n - len(exclude)
    if count > free:
        raise GaError(f"cannot draw {count} new features, only {free} remain")
    if count == 0:
        return []
    if free < 4 * count or free < 64:
        pool = np.setdiff1d(np.arange(n), np.fromiter(exclude, dtype=np.int64, count=len(exclude)))
        return rng.choice(pool, size=count, replace=False).tolist()
    out: list[int] = []
    taken = set(exclude)
    while len(out) < count:
        f = int(rng.integers(n))
        if f not in taken:
            taken.add(f)
            out.append(f)
    return out


def random_booster_genes(rng: np.random.Generator) -> tuple:
    return (
        rng.uniform(0.01, 1.0),
        10 + N_ESTIMATORS_STEP * int(rng.integers(0, (1500 - 10 + N_ESTIMATORS_STEP - 1)
                                                  // N_ESTIMATORS_STEP)),
        int(rng.integers(1, 11)),
        rng.uniform(0.01, 10.0),
        rng.uniform(0.01, 10.0),
        rng.uniform(0.01, 1.0),
        rng.uniform(0.01, 1.0),
    )


def init_population(config: GaConfig, n_features: int, rng: np.random.Generator) -> list[Chromosome]:
    k = config.feature_gene_count(n_features)
    if n_features < k:
        raise GaError(f"feature space of {n_features} is smaller than k={k}")
    pop = []
    for _ in range(config.population_size):
        genes = random_booster_genes(rng)
        feats = rng.choice(n_features, size=k, replace=False).tolist()
        pop.append(Chromosome(genes, tuple(feats)))
    return pop


def select_parents(population: Sequence[Chromosome], fitnesses: Sequence[float],
                   c: int) -> list[Chromosome]:
    """The ``c`` fittest chromosomes; equal fitness keeps population order."""
    if c > len(population):
        raise GaError(f"cannot select {c} parents from {len(population)}")
    order = sorted(range(len(population)), key=lambda i: (-fitnesses[i], i))
    return [population[i] for i in order[:c]]


def crossover_pair(a: Chromosome, b: Chromosome, n_features: int,
                   rng: np.random.Generator) -> Chromosome:
    # booster genes: 3 or 4 positions from a, the rest from b
    n_from_a = NUM_BOOSTER_GENES // 2 + int(rng.integers(0, 2))
    from_a = set(rng.choice(NUM_BOOSTER_GENES, size=n_from_a, replace=False).tolist())
    genes = tuple(a.booster_genes[i] if i in from_a else b.booster_genes[i]
                  for i in range(NUM_BOOSTER_GENES))

    k = len(a.feature_genes)
    half = (k + 1) // 2
    fa = np.asarray(a.feature_genes)
    child = [int(f) for f in fa[np.sort(rng.choice(k, size=half, replace=False))]]
    have = set(child)
    for f in rng.permutation(np.asarray(b.feature_genes)).tolist():
        if len(child) == k:
            break
        if f not in have:
            have.add(f)
            child.append(f)
    if len(child) < k:
        child.extend(_draw_excluding(rng, n_features, have, k - len(child)))
    return Chromosome(genes, tuple(child))


def crossover(parents: Sequence[Chromosome], children_needed: int, n_features: int,
              rng: np.random.Generator) -> list[Chromosome]:
    """Children from consecutive parent pairs (wrapping around the list)."""
    if not parents:
        raise GaError("crossover needs at least one parent")
    c = len(parents)
    return [crossover_pair(parents[i % c], parents[(i + 1) % c], n_features, rng)
            for i in range(children_needed)]


def mutate_one(ch: Chromosome, n_features: int, rng: np.random.Generator) -> Chromosome:
    genes = list(ch.booster_genes)
    gi = int(rng.integers(NUM_BOOSTER_GENES))
    name = BOOSTER_GENES[gi]
    lo, hi = GENE_RANGES[name]
    delta = rng.uniform(-MUTATION_SCALE, MUTATION_SCALE) * (hi - lo)
    v = min(max(genes[gi] + delta, lo), hi)
    genes[gi] = int(round(v)) if name in INTEGER_GENES else v

    feats = list(ch.feature_genes)
    if len(feats) < n_features:
        fi = int(rng.integers(len(feats)))
        feats[fi] = _draw_excluding(rng, n_features, set(feats), 1)[0]
    return Chromosome(tuple(genes), tuple(feats))


def mutate(children: Sequence[Chromosome], n_features: int,
           rng: np.random.Generator) -> list[Chromosome]:
    """One booster gene nudged and clamped, one feature gene swapped for an unused feature."""
    return [mutate_one(ch, n_features, rng) for ch in children]


# ------------------------------------------------------------------ fitness

def gmean_fitness(y_true, y_pred) -> float:
    cm = evaluation.confusion(y_true, y_pred)
    return evaluation.metrics(cm).gmean


class FitnessEvaluator:
    """Scores chromosomes on one fixed train/test split, caching by chromosome."""

    def __init__(self, X, y, train_idx, test_idx, booster_seed: int = gbt.DEFAULT_SEED):
        import scipy.sparse as sp

        self.X = sp.csc_matrix(X) if sp.issparse(X) else np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.train_idx = np.asarray(train_idx)
        self.test_idx = np.asarray(test_idx)
        self.booster_seed = booster_seed
        self.cache: dict[Chromosome, float] = {}
        self.evaluations = 0

    def score(self, ch: Chromosome) -> float:
        cols = np.asarray(ch.feature_genes, dtype=np.int64)
        Xs = self.X[:, cols]
        Xtr, Xte = Xs[self.train_idx], Xs[self.test_idx]
        try:
            model = gbt.fit(Xtr, self.y[self.train_idx], ch.booster_params(self.booster_seed))
            pred = gbt.predict_label(model, Xte)
        except gbt.GbtError as exc:
            warnings.warn(f"untrainable chromosome scored 0: {exc}", stacklevel=2)
            return 0.0
        return gmean_fitness(self.y[self.test_idx], pred)

    def evaluate(self, population: Sequence[Chromosome], threads: int = 1) -> list[float]:
        todo = list(dict.fromkeys(ch for ch in population if ch not in self.cache))
        if threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                scores = list(pool.map(self.score, todo))
        else:
            scores = [self.score(ch) for ch in todo]
        for ch, s in zip(todo, scores):
            self.cache[ch] = s
        self.evaluations += len(todo)
        return [self.cache[ch] for ch in population]


# --------------------------------------------------------------------- run

@dataclass
class GenerationStats:
    generation: int
    best_fitness: float  # best ever up to and including this generation
    mean_fitness: float  # mean over this generation's population


@dataclass
class ExperimentRecord:
    experiment_id: str
    config: GaConfig
    trace: list[GenerationStats]
    best: Chromosome
    best_fitness: float
    best_generation: int
    seed: int
    wall_clock: float = 0.0
    evaluations: int = 0
    n_features: int = 0
    error: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def initial_best(self) -> float:
        return self.trace[0].best_fitness

    def best_json(self, vocabulary=None) -> dict:
        return {"experiment_id": self.experiment_id, "config": self.config.to_dict(),
                "fitness": self.best_fitness, "generation": self.best_generation,
                "n_features": self.n_features, **self.best.to_dict(vocabulary)}


def run(X, y, config: GaConfig,
        on_generation: Callable[[GenerationStats], None] | None = None) -> ExperimentRecord:
    """Run the genetic search on a feature matrix and 0/1 labels.

    Generation 0 is the random initial population. Each of the G generations
    then keeps the C fittest chromosomes and adds P - C mutated children.
    ``on_generation`` is called after each generation is scored.
    """
    t0 = time.perf_counter()
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise GaError("the dataset needs both classes")
    n_features = X.shape[1]
    seed = config.master_seed
    train_idx, test_idx = evaluation.stratified_split(
        y, config.split_fraction, derive_seed(seed, "ga", "split"))
    evaluator = FitnessEvaluator(X, y, train_idx, test_idx)
    rng = derive_rng(seed, "ga", "operators")

    population = init_population(config, n_features, rng)
    fitness = evaluator.evaluate(population, config.threads)
    best_i = int(np.argmax(fitness))
    best, best_fit, best_gen = population[best_i], fitness[best_i], 0
    trace = [GenerationStats(0, best_fit, float(np.mean(fitness)))]
    if on_generation:
        on_generation(trace[-1])

    c = config.crossover_count
    for g in range(1, config.generations + 1):
        parents = select_parents(population, fitness, c)
        children = mutate(crossover(parents, config.population_size - c, n_features, rng),
                          n_features, rng)
        population = parents + children
        fitness = evaluator.evaluate(population, config.threads)
        gi = int(np.argmax(fitness))
        if fitness[gi] > best_fit:
            best, best_fit, best_gen = population[gi], fitness[gi], g
        trace.append(GenerationStats(g, best_fit, float(np.mean(fitness))))
        if on_generation:
            on_generation(trace[-1])
        log.debug("%s gen %d best %.4f", experiment_id(config), g, best_fit)

    return ExperimentRecord(experiment_id(config), config, trace, best, float(best_fit),
                            best_gen, seed, time.perf_counter() - t0,
                            evaluator.evaluations, n_features)


def sensitivity_sweep(X, y, grid: Sequence[GaConfig],
                      on_generation=None) -> list[ExperimentRecord]:
    """Run each config independently; a failing config is recorded and the sweep goes on.

    Every run gets its own seed derived from its config's master seed and its
    position in the grid.
    """
    records = []
    for pos, cfg in enumerate(grid):
        cfg = replace(cfg, master_seed=derive_seed(cfg.master_seed, "sweep", pos,
                                                   experiment_id(cfg)))
        try:
            cb = (lambda s, c=cfg: on_generation(c, s)) if on_generation else None
            records.append(run(X, y, cfg, cb))
        except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
            log.warning("config %s failed: %s", experiment_id(cfg), exc)
            records.append(ExperimentRecord(experiment_id(cfg), cfg, [], Chromosome(
                (0.01, 10, 1, 0.01, 0.01, 0.01, 0.01), ()), math.nan, -1,
                cfg.master_seed, error=str(exc)))
    return records


def feature_frequency(records: Sequence[ExperimentRecord], vocabulary=None):
    """Features of the records' best chromosomes, most frequently selected first.

    Returns rows of (term, index, count, [present in record i, ...]).
    """
    if not records:
        raise GaError("feature_frequency needs at least one record")
    counts: dict[int, int] = {}
    for r in records:
        for f in r.best.feature_genes:
            counts[f] = counts.get(f, 0) + 1
    rows = []
    for f in sorted(counts, key=lambda f: (-counts[f], f)):
        term = vocabulary.term(f) if vocabulary is not None else str(f)
        rows.append((term, f, counts[f], [f in set(r.best.feature_genes) for r in records]))
    return rows


# ---------------------------------------------------------------- file I/O

def write_curve(trace: Sequence[GenerationStats], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("generation,best_fitness,mean_fitness\n")
        for s in trace:
            fh.write(f"{s.generation},{s.best_fitness:.10f},{s.mean_fitness:.10f}\n")


def read_curve(path) -> list[GenerationStats]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [GenerationStats(int(r["generation"]), float(r["best_fitness"]),
                                float(r["mean_fitness"])) for r in csv.DictReader(fh)]


def write_best(record: ExperimentRecord, path, vocabulary=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record.best_json(vocabulary), fh, indent=2)
        fh.write("\n")


def read_best(path) -> tuple[Chromosome, dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return Chromosome.from_dict(doc), doc


def write_experiment_table(records: Sequence[ExperimentRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("experiment_id,fitness\n")
        for r in records:
            fit = "NA" if r.error else f"{100 * r.best_fitness:.2f}%"
            fh.write(f"{r.experiment_id}, {fit}\n")


def read_experiment_table(path) -> list[tuple[str, float | None]]:
    with open(path, encoding="utf-8") as fh:
        next(fh)
        out = []
        for line in fh:
            if not line.strip():
                continue
            eid, fit = (s.strip() for s in line.split(","))
            out.append((eid, None if fit == "NA" else float(fit.rstrip("%")) / 100))
        return out


def write_frequency_table(rows, records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["FeatureText", "FNo", "Freq"] + [r.experiment_id for r in records])
        for term, f, n, present in rows:
            w.writerow([term, f, n] + ["TRUE" if p else "FALSE" for p in present])
