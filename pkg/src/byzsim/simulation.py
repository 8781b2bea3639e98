"""Experiment orchestration: the federated round loop under attack.

Every consumer of randomness draws from its own generator derived from
(seed, stream tag, round, client), so runs are bit-reproducible regardless
of worker-thread count, and the unattacked baseline shares the data /
sampling / training streams of the attacked run without ever touching the
attack streams.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aggregation import AggregationRule, RuleKind
from .attacks import (
    AdversaryKnowledge,
    AttackKind,
    AttackSpec,
    Perturbation,
    Visibility,
    adversary_select_attack,
    attack_fang,
    attack_gaussian,
    attack_lie,
    attack_she,
    flip_labels,
    she_perturbation,
)
from .config import (
    DEFAULT_CANDIDATE_KINDS,
    ExperimentConfig,
    build_candidate_rules,
    derived_rule_h,
)
from .defense import DefenseMode, DefenseStrategy, defend_round
from .learning import (
    Architecture,
    Dataset,
    Model,
    ModelSpec,
    MomentumState,
    compute_trusted_update,
    dirichlet_partition,
    evaluate,
    gradient,
    load_columnar,
    local_train,
    measure_heterogeneity,
    measure_local_variance,
    synth_dataset,
)
from .theory import TheoryInputs, empirical_alpha, estimate_smoothness, theory_report
from .validation import AggregationError, ValidationError

logger = logging.getLogger("byzsim")

SCHEMA_VERSION = 1
ACCURACY_WINDOW = 10  # rounds averaged into A_ini / A_att

# RNG stream tags; every (tag, round, client) triple owns one generator.
_DATA, _INIT, _SAMPLING, _TRAIN, _ATTACK, _DEFENSE, _ADVERSARY, _ROOT = range(8)


def stream_rng(seed: int, tag: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, tag, *path)))


@dataclass
class RoundRecord:
    round: int
    sampled_clients: list[int]
    h_t: int
    rule_index: int | None
    attack_kind: str | None
    test_accuracy: float
    alpha_hat: float | None
    inner_product: float | None
    expected_alpha: float | None
    negative_impact_running: float
    probabilities_used: list[float] | None = None
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "sampled_clients": self.sampled_clients,
            "h_t": self.h_t,
            "rule_index": self.rule_index,
            "attack_kind": self.attack_kind,
            "test_accuracy": self.test_accuracy,
            "alpha_hat": self.alpha_hat,
            "inner_product": self.inner_product,
            "expected_alpha": self.expected_alpha,
            "negative_impact_running": self.negative_impact_running,
            "probabilities_used": self.probabilities_used,
            "failed": self.failed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RoundRecord":
        return cls(**doc)


@dataclass
class MetricsLog:
    config: dict
    records: list[RoundRecord]
    summary: dict
    schema_version: int = SCHEMA_VERSION


def negative_impact(a_ini: float, a_att: float) -> float:
    """Accuracy lost to the attack: max(0, A_ini - A_att)."""
    if not (0.0 <= a_ini <= 1.0 and 0.0 <= a_att <= 1.0):
        raise ValidationError("accuracies must lie in [0, 1]", code="bad_accuracy")
    return max(0.0, a_ini - a_att)


@dataclass
class FederatedTask:
    """Datasets and the initial model shared by baseline and attacked runs."""

    shards: list[Dataset]
    test_set: Dataset
    root_set: Dataset
    model0: Model
    flipped_shards: list[Dataset] = field(default_factory=list)


def build_task(cfg: ExperimentConfig) -> FederatedTask:
    d = cfg.dataset
    total = cfg.n_clients * d.samples_per_client + d.test_samples + d.root_size
    if d.source_file is not None:
        pool = load_columnar(d.source_file)
        if len(pool) < d.root_size + d.test_samples + cfg.n_clients:
            raise ValidationError(
                f"dataset file holds {len(pool)} samples, fewer than the "
                f"root + test + one-per-client minimum",
                code="bad_dataset_file",
            )
    else:
        pool = synth_dataset(
            d.num_classes, total, d.feature_dim, d.class_separation, stream_rng(cfg.seed, _DATA)
        )
    # A file source dictates its own dimensions.
    num_classes = pool.num_classes
    feature_dim = pool.features.shape[1]
    root = Dataset(pool.features[: d.root_size], pool.labels[: d.root_size], num_classes)
    stop = d.root_size + d.test_samples
    test = Dataset(pool.features[d.root_size : stop], pool.labels[d.root_size : stop], num_classes)
    train = Dataset(pool.features[stop:], pool.labels[stop:], num_classes)
    shards = dirichlet_partition(train, cfg.n_clients, d.concentration, stream_rng(cfg.seed, _DATA, 1))
    spec = ModelSpec(
        Architecture(cfg.model.arch), feature_dim, num_classes, cfg.model.hidden_width
    )
    model0 = Model.init(spec, stream_rng(cfg.seed, _INIT))
    flipped = [
        Dataset(s.features, flip_labels(s.labels, num_classes), num_classes) for s in shards
    ]
    return FederatedTask(shards, test, root, model0, flipped)


def adversary_rule_pool(cfg: ExperimentConfig) -> list[AggregationRule]:
    """The coalition's own guess of plausible server rules.

    Built from the canonical rule kinds and the coalition's knowledge of its
    size, never from the server's actual candidate set.
    """
    h = derived_rule_h(cfg)
    return [AggregationRule(kind=RuleKind(k), h=h) for k in DEFAULT_CANDIDATE_KINDS]


def build_adversary_knowledge(
    cfg: ExperimentConfig, strategy: DefenseStrategy
) -> AdversaryKnowledge:
    """Expose to the adversary exactly what its visibility level permits."""
    level = cfg.knowledge_level()
    if level is Visibility.BLACK_BOX:
        pool = adversary_rule_pool(cfg)
        return AdversaryKnowledge(
            server_visibility=level,
            known_candidate_set=None,
            attack_distribution=np.full(len(pool), 1.0 / len(pool)),
        )
    matrix = None
    if cfg.attack.impact_matrix is not None:
        matrix = np.asarray(cfg.attack.impact_matrix, dtype=np.float64)
    return AdversaryKnowledge(
        server_visibility=level,
        known_candidate_set=list(strategy.candidate_set),
        impact_matrix=matrix,
    )


def directed_displacement_matrix(
    benign_updates: list[np.ndarray],
    attack_kind: AttackKind,
    perturbation: Perturbation,
    targets: list[AggregationRule],
    rules: list[AggregationRule],
    n_malicious: int,
) -> np.ndarray:
    """Signed displacement[i, j]: how far the attack targeting rule i moves
    rule j's aggregate along the attack's perturbation direction, scaled by
    the honest standard deviation.

    The directed component is what accumulates into model damage across
    rounds; undirected selection jitter averages out.  Zero honest variance
    or a zero perturbation direction yields an all-zero matrix.
    """
    matrix = np.zeros((len(targets), len(rules)))
    honest = np.stack(benign_updates)
    variance = float(((honest - honest.mean(axis=0)) ** 2).sum()) / len(benign_updates)
    if variance == 0.0:
        return matrix
    clean = [rule.aggregate(benign_updates) for rule in rules]
    if attack_kind is AttackKind.FANG:
        w = -np.sign(honest.mean(axis=0))
    else:
        w = she_perturbation(honest, perturbation)
    norm = np.linalg.norm(w)
    if norm == 0:
        return matrix
    w_unit = w / norm
    scale = math.sqrt(variance)
    for i, target in enumerate(targets):
        if attack_kind is AttackKind.FANG:
            vectors = attack_fang(benign_updates, target, n_malicious)
        else:
            vectors = attack_she(benign_updates, target, perturbation, n_malicious)
        combined = benign_updates + vectors
        for j, rule in enumerate(rules):
            matrix[i, j] = float((rule.aggregate(combined) - clean[j]) @ w_unit) / scale
    return matrix


def estimate_impact_matrix(
    benign_updates: list[np.ndarray],
    attack_kind: AttackKind,
    perturbation: Perturbation,
    targets: list[AggregationRule],
    rules: list[AggregationRule],
    n_malicious: int,
) -> np.ndarray:
    """One-shot non-negative impact estimate from a single local experiment."""
    signed = directed_displacement_matrix(
        benign_updates, attack_kind, perturbation, targets, rules, n_malicious
    )
    return np.maximum(signed, 0.0) ** 2


@dataclass
class AdversaryState:
    """Running local-experiment results the white-box-dynamic coalition
    accumulates over rounds; drift survives the averaging, jitter does not."""

    displacement_sum: np.ndarray
    rounds: int = 0

    def update(self, signed: np.ndarray) -> None:
        self.displacement_sum = self.displacement_sum + signed
        self.rounds += 1

    def impact_matrix(self) -> np.ndarray:
        mean = self.displacement_sum / max(1, self.rounds)
        return np.maximum(mean, 0.0) ** 2


def _find_rule(pool: list[AggregationRule], kind: RuleKind, default_h: int) -> AggregationRule:
    for rule in pool:
        if rule.kind is kind:
            return rule
    return AggregationRule(kind=kind, h=default_h)


def _resolve_target(
    cfg: ExperimentConfig,
    strategy: DefenseStrategy,
    knowledge: AdversaryKnowledge,
    benign_updates: list[np.ndarray],
    h_t: int,
    adv_rng: np.random.Generator,
    adv_state: AdversaryState | None,
) -> AggregationRule:
    level = knowledge.server_visibility
    pool = (
        list(knowledge.known_candidate_set)
        if knowledge.known_candidate_set is not None
        else adversary_rule_pool(cfg)
    )
    if cfg.attack.target is not None:
        return _find_rule(pool, RuleKind(cfg.attack.target), derived_rule_h(cfg))
    if level is Visibility.WHITE_BOX_STATIC:
        return strategy.candidate_set[strategy.static_index]
    if level is Visibility.WHITE_BOX_DYNAMIC:
        if knowledge.impact_matrix is not None:
            matrix = knowledge.impact_matrix
        else:
            signed = directed_displacement_matrix(
                benign_updates,
                AttackKind(cfg.attack.kind),
                Perturbation(cfg.attack.perturbation),
                pool,
                pool,
                max(1, h_t),
            )
            adv_state.update(signed)
            matrix = adv_state.impact_matrix()
        matrix_knowledge = AdversaryKnowledge(
            server_visibility=level,
            known_candidate_set=pool,
            impact_matrix=matrix,
        )
        idx = adversary_select_attack(matrix_knowledge, strategy.distribution)
        return pool[idx]
    # Black box: draw a target from the coalition's own attack distribution.
    p_a = knowledge.attack_distribution
    if p_a is None:
        p_a = np.full(len(pool), 1.0 / len(pool))
    return pool[int(adv_rng.choice(len(pool), p=p_a))]


def _craft_attack_vectors(
    cfg: ExperimentConfig,
    strategy: DefenseStrategy,
    knowledge: AdversaryKnowledge,
    benign_updates: list[np.ndarray],
    mal_train_deltas: list[np.ndarray],
    h_t: int,
    dimension: int,
    round_index: int,
    adv_state: AdversaryState | None,
) -> tuple[list[np.ndarray], AttackSpec | None]:
    kind = AttackKind(cfg.attack.kind)
    if kind is AttackKind.GAUSSIAN:
        spec = AttackSpec(kind=kind, sigma=cfg.attack.sigma)
        rng = stream_rng(cfg.seed, _ATTACK, round_index)
        return attack_gaussian(dimension, h_t, spec.sigma, rng), spec
    if kind is AttackKind.LABEL_FLIP:
        return mal_train_deltas, AttackSpec(kind=kind)
    if not benign_updates:
        # Degenerate round with no visible benign updates: the colluders
        # have nothing to anchor on and upload zeros.
        logger.warning("round %d: no benign updates visible; uploading zeros", round_index)
        return [np.zeros(dimension) for _ in range(h_t)], None
    if kind is AttackKind.LIE:
        spec = AttackSpec(kind=kind, z_override=cfg.attack.z_override)
        vector = attack_lie(
            benign_updates, n_total=len(benign_updates) + h_t, n_malicious=h_t,
            z_override=spec.z_override,
        )
        return [vector.copy() for _ in range(h_t)], spec
    adv_rng = stream_rng(cfg.seed, _ADVERSARY, round_index)
    target = _resolve_target(cfg, strategy, knowledge, benign_updates, h_t, adv_rng, adv_state)
    spec = AttackSpec(
        kind=kind, target_rule=target, perturbation=Perturbation(cfg.attack.perturbation)
    )
    if kind is AttackKind.FANG:
        return attack_fang(benign_updates, target, h_t), spec
    return attack_she(benign_updates, target, spec.perturbation, h_t), spec


def _train_clients(
    cfg: ExperimentConfig,
    model: Model,
    jobs: list[tuple[int, Dataset, MomentumState | None]],
    round_index: int,
    threads: int,
) -> dict[int, tuple[np.ndarray, MomentumState]]:
    def work(job):
        client, shard, momentum = job
        rng = stream_rng(cfg.seed, _TRAIN, round_index, client)
        return client, local_train(
            model, shard, cfg.eta, cfg.beta, cfg.local_steps, momentum, rng,
            batch_size=cfg.batch_size,
        )

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(job) for job in jobs]
    return {client: out for client, out in results}


def _tail_mean(values: list[float], window: int = ACCURACY_WINDOW) -> float:
    tail = values[-window:] if values else values
    return float(np.mean(tail)) if tail else float("nan")


@dataclass
class PhaseResult:
    records: list[RoundRecord]
    accuracies: list[float]
    model: Model
    initial_accuracy: float
    snapshots: list[np.ndarray] = field(default_factory=list)


@dataclass
class SimulationState:
    """Everything one training run carries between rounds."""

    cfg: ExperimentConfig
    task: FederatedTask
    strategy: DefenseStrategy
    knowledge: AdversaryKnowledge | None
    h_total: int
    attack_kind: AttackKind | None
    adv_state: AdversaryState | None
    model: Model
    momenta: dict[int, MomentumState]
    records: list[RoundRecord]
    accuracies: list[float]
    a_ini: float | None = None
    threads: int = 1
    capture: list | None = None


def run_round(state: SimulationState, t: int) -> RoundRecord:
    """Advance the simulation by one round, appending the round's record.

    Sampled benign clients train locally, sampled malicious clients upload
    attack vectors, the server defends and applies the chosen aggregate; a
    rule-precondition failure aborts the round with the model unchanged.
    """
    cfg, task, strategy = state.cfg, state.task, state.strategy
    sample_rng = stream_rng(cfg.seed, _SAMPLING, t)
    drawn = np.sort(
        sample_rng.choice(cfg.n_clients, size=cfg.clients_per_round, replace=False)
    ).tolist()
    # Clients whose shard came out empty have nothing to train on and sit
    # the round out.
    sampled = [i for i in drawn if len(task.shards[i])]
    mal_ids = [i for i in sampled if i < state.h_total]
    benign_ids = [i for i in sampled if i >= state.h_total]
    h_t = len(mal_ids)

    jobs = [(i, task.shards[i], state.momenta.get(i)) for i in benign_ids]
    if state.attack_kind is AttackKind.LABEL_FLIP:
        jobs += [(i, task.flipped_shards[i], state.momenta.get(i)) for i in mal_ids]
    trained = _train_clients(cfg, state.model, jobs, t, state.threads)
    for client in sorted(trained):
        state.momenta[client] = trained[client][1]

    benign_updates = [trained[i][0] for i in benign_ids]
    attack_spec = None
    if h_t:
        mal_train_deltas = (
            [trained[i][0] for i in mal_ids]
            if state.attack_kind is AttackKind.LABEL_FLIP
            else []
        )
        attack_vectors, attack_spec = _craft_attack_vectors(
            cfg, strategy, state.knowledge, benign_updates, mal_train_deltas,
            h_t, state.model.spec.dimension, t, state.adv_state,
        )
    else:
        attack_vectors = []

    by_client = dict(zip(mal_ids, attack_vectors)) | dict(zip(benign_ids, benign_updates))
    uploads = [by_client[i] for i in sampled]
    weights = [len(task.shards[i]) for i in sampled]

    trusted = None
    if strategy.mode is DefenseMode.BLACK_BOX_WEIGHTED:
        trusted = compute_trusted_update(
            state.model, task.root_set, cfg.eta, cfg.local_steps,
            stream_rng(cfg.seed, _ROOT, t), batch_size=cfg.batch_size,
        )

    try:
        rec = defend_round(
            strategy, uploads, weights, trusted, stream_rng(cfg.seed, _DEFENSE, t)
        )
    except AggregationError as exc:
        logger.warning("round %d aborted: %s", t, exc)
        state.accuracies.append(evaluate(state.model, task.test_set))
        record = RoundRecord(
            round=t, sampled_clients=sampled, h_t=h_t, rule_index=None,
            attack_kind=state.attack_kind.value if h_t else None,
            test_accuracy=state.accuracies[-1], alpha_hat=None, inner_product=None,
            expected_alpha=None,
            negative_impact_running=_running_impact(state.a_ini, state.accuracies),
            probabilities_used=None, failed=True,
        )
        state.records.append(record)
        return record

    alpha_hat, inner, expected_alpha = _robustness_accounting(
        strategy, rec, uploads, weights, benign_updates
    )
    state.model.params = state.model.params + rec.chosen_aggregate
    state.accuracies.append(evaluate(state.model, task.test_set))
    record = RoundRecord(
        round=t, sampled_clients=sampled, h_t=h_t, rule_index=rec.rule_index,
        attack_kind=state.attack_kind.value if h_t else None,
        test_accuracy=state.accuracies[-1], alpha_hat=alpha_hat, inner_product=inner,
        expected_alpha=expected_alpha,
        negative_impact_running=_running_impact(state.a_ini, state.accuracies),
        probabilities_used=[float(p) for p in rec.probabilities_used],
    )
    state.records.append(record)
    if state.capture is not None:
        state.capture.append({
            "round": t, "sampled": sampled, "malicious": mal_ids,
            "uploads": uploads, "benign_updates": dict(zip(benign_ids, benign_updates)),
            "attack_vectors": attack_vectors, "attack_spec": attack_spec,
            "target_rule": attack_spec.target_rule if attack_spec else None,
            "record": rec, "trusted": trusted,
        })
    return record


def run_phase(
    cfg: ExperimentConfig,
    task: FederatedTask,
    *,
    attacked: bool,
    threads: int = 1,
    a_ini: float | None = None,
    capture: list | None = None,
) -> PhaseResult:
    """One full training run: the attacked run, or the clean FedAvg baseline.

    The baseline ignores the configured defense/attack and aggregates with
    the data-size-weighted mean over honest updates.
    """
    if attacked:
        strategy = DefenseStrategy(
            DefenseMode(cfg.defense.mode), build_candidate_rules(cfg), cfg.defense.static_index
        )
    else:
        strategy = DefenseStrategy(DefenseMode.STATIC, [AggregationRule(RuleKind.MEAN)], 0)
    knowledge = build_adversary_knowledge(cfg, strategy) if attacked else None
    h_total = cfg.h_total if attacked and cfg.attack.kind is not None else 0
    attack_kind = AttackKind(cfg.attack.kind) if h_total else None
    adv_state = None
    if (
        attack_kind in (AttackKind.FANG, AttackKind.SHE)
        and cfg.knowledge_level() is Visibility.WHITE_BOX_DYNAMIC
        and cfg.attack.impact_matrix is None
    ):
        adv_state = AdversaryState(np.zeros((strategy.size, strategy.size)))

    state = SimulationState(
        cfg=cfg, task=task, strategy=strategy, knowledge=knowledge,
        h_total=h_total, attack_kind=attack_kind, adv_state=adv_state,
        model=task.model0.copy(), momenta={}, records=[], accuracies=[],
        a_ini=a_ini, threads=threads, capture=capture,
    )
    initial_accuracy = evaluate(state.model, task.test_set)
    snapshots = [state.model.params.copy()]
    snap_every = max(1, cfg.rounds // 4)
    for t in range(cfg.rounds):
        run_round(state, t)
        if (t + 1) % snap_every == 0 and not state.records[-1].failed:
            snapshots.append(state.model.params.copy())
    return PhaseResult(state.records, state.accuracies, state.model, initial_accuracy, snapshots)


def _running_impact(a_ini: float | None, accuracies: list[float]) -> float:
    if a_ini is None:
        return 0.0
    return negative_impact(a_ini, _tail_mean(accuracies))


def _robustness_accounting(
    strategy: DefenseStrategy,
    rec,
    uploads: list[np.ndarray],
    weights: list[float],
    benign_updates: list[np.ndarray],
) -> tuple[float | None, float | None, float | None]:
    """Empirical alpha of the chosen aggregate plus the P-weighted expected
    alpha over the whole candidate set."""
    if not benign_updates:
        return None, None, None
    chosen = empirical_alpha(benign_updates, rec.chosen_aggregate)
    per_rule = []
    for j, rule in enumerate(strategy.candidate_set):
        try:
            if rec.candidate_results is not None:
                q_j = rec.candidate_results[j]
            elif j == rec.rule_index:
                q_j = rec.chosen_aggregate
            else:
                q_j = rule.aggregate(uploads, weights)
        except AggregationError:
            per_rule.append(None)
            continue
        per_rule.append(empirical_alpha(benign_updates, q_j).alpha_hat)
    if any(a is None for a in per_rule):
        expected = None
    else:
        expected = float(np.dot(rec.probabilities_used, per_rule))
    return chosen.alpha_hat, chosen.inner_product, expected


_baseline_cache: dict[str, PhaseResult] = {}


def _baseline_key(cfg: ExperimentConfig) -> str:
    # The clean FedAvg baseline ignores attack, defense, knowledge and the
    # malicious fraction, so those fields must not fragment the cache.
    doc = cfg.to_dict()
    for key in ("attack", "defense", "knowledge", "name", "malicious_fraction"):
        doc.pop(key)
    return json.dumps(doc, sort_keys=True)


def run_baseline(cfg: ExperimentConfig, task: FederatedTask, threads: int = 1,
                 use_cache: bool = True) -> PhaseResult:
    key = _baseline_key(cfg)
    if use_cache and key in _baseline_cache:
        return _baseline_cache[key]
    result = run_phase(cfg, task, attacked=False, threads=threads)
    if use_cache:
        _baseline_cache[key] = result
    return result


def run_experiment(
    cfg: ExperimentConfig, threads: int = 1, capture: list | None = None
) -> MetricsLog:
    """Clean baseline then attacked run; summary carries A_ini / A_att / I."""
    task = build_task(cfg)
    baseline = run_baseline(cfg, task, threads=threads)
    a_ini = _tail_mean(baseline.accuracies) if cfg.rounds else baseline.initial_accuracy
    attacked = run_phase(cfg, task, attacked=True, threads=threads, a_ini=a_ini, capture=capture)
    a_att = _tail_mean(attacked.accuracies) if cfg.rounds else attacked.initial_accuracy
    summary = {
        "a_ini": a_ini,
        "a_att": a_att,
        "negative_impact": negative_impact(a_ini, a_att),
        "expected_alpha": _mean_defined(r.expected_alpha for r in attacked.records),
        "failed_rounds": sum(r.failed for r in attacked.records),
        "final_accuracy": attacked.accuracies[-1] if attacked.accuracies else attacked.initial_accuracy,
        "theory_report": _theory_block(cfg, task, attacked),
    }
    return MetricsLog(config=cfg.to_dict(), records=attacked.records, summary=summary)


def _mean_defined(values) -> float | None:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def _theory_block(cfg: ExperimentConfig, task: FederatedTask, attacked: PhaseResult) -> str:
    """Estimate the convergence constants from the run (reporting only)."""
    try:
        model = attacked.model
        full = Dataset(
            np.concatenate([s.features for s in task.shards if len(s)]),
            np.concatenate([s.labels for s in task.shards if len(s)]),
            task.test_set.num_classes,
        )
        grads = [gradient(model, full, params=p) for p in attacked.snapshots]
        L = max(estimate_smoothness(attacked.snapshots, grads), 1e-9)
        g_l2 = measure_local_variance(
            model, full, stream_rng(cfg.seed, _DATA, 2), batch_size=cfg.batch_size, n_batches=50
        )
        g_g2 = measure_heterogeneity(model, task.shards)
        h_m = max((r.h_t for r in attacked.records), default=0)
        k = cfg.clients_per_round
        if not h_m < k / 2:
            h_m = (k - 1) // 2
        expected_alpha = _mean_defined(r.expected_alpha for r in attacked.records) or 0.0
        loss0 = model.loss(full, params=task.model0.params)
        loss_final = model.loss(full)
        inputs = TheoryInputs(
            L=L, G_l2=g_l2, G_g2=g_g2, K=k, h_m=h_m, T=max(1, cfg.rounds),
            expected_alpha=expected_alpha, F0_gap=max(0.0, loss0 - loss_final),
            grad0_sq=float((gradient(model, full, params=task.model0.params) ** 2).sum()),
        )
        return theory_report(inputs)
    except (ValidationError, ValueError) as exc:
        return f"theory report unavailable: {exc}"


def sweep(
    configs: list[ExperimentConfig], threads: int = 1
) -> tuple[list[MetricsLog | None], list[dict]]:
    """Run each config, isolating failures; returns logs plus a comparison
    table keyed by (defense, attack, malicious fraction)."""
    logs: list[MetricsLog | None] = []
    table: list[dict] = []
    for cfg in configs:
        try:
            log = run_experiment(cfg, threads=threads)
        except Exception as exc:  # noqa: BLE001 - sweep isolates failures
            logger.error("config %s failed: %s", cfg.name, exc)
            logs.append(None)
            table.append({"name": cfg.name, "error": str(exc)})
            continue
        logs.append(log)
        table.append(comparison_row(cfg, log))
    return logs, table


def comparison_row(cfg: ExperimentConfig, log: MetricsLog) -> dict:
    return {
        "name": cfg.name,
        "defense": cfg.defense.mode,
        "attack": cfg.attack.kind or "none",
        "malicious_fraction": cfg.malicious_fraction,
        "seed": cfg.seed,
        "a_ini": log.summary["a_ini"],
        "a_att": log.summary["a_att"],
        "negative_impact": log.summary["negative_impact"],
    }
