"""Expand leaked seed documents with generated ones.

Two prompting strategies are supported: ``random`` draws prompt examples
uniformly from the seed set, ``clustered`` first groups the seeds by
agglomerative clustering (cosine distance, average linkage, TF-IDF
vectors) and prompts once per cluster.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document
from .errors import ConfigurationError, GenerationError, LeakforgeError
from .keywords import to_keyword_docs
from .rng import stream

__all__ = [
    "STRATEGIES",
    "AugmentationPlan",
    "ClusterAssignment",
    "PromptBatch",
    "AugmentationError",
    "AugmentResult",
    "vectorize",
    "hierarchical_cluster",
    "plan_clusters",
    "split_counts",
    "build_prompt",
    "parse_generation",
    "augment",
]

log = logging.getLogger(__name__)

STRATEGIES = ("none", "random", "clustered")
MAX_ATTEMPTS = 3
SEPARATOR = "###"

PROMPT_HEADER = "Generate {message_per_cluster} new texts similar to the following examples:"
PROMPT_EXAMPLE = "Example {i}: {example}"
PROMPT_FOOTER = (
    "Return only the response as a separate entry and put exactly '###' between them so I can parse them.\n"
    "Do not generate any extra messages."
)


class AugmentationError(LeakforgeError):
    def __init__(self, message: str, manifest=None):
        super().__init__(message)
        self.manifest = manifest


@dataclass(frozen=True)
class AugmentationPlan:
    strategy: str = "clustered"
    target_synthetic_count: int = 0
    examples_per_prompt: int = 3
    generations_per_prompt: int = 8
    rng_seed: int = 0
    vocab_cap: int = 3000

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.target_synthetic_count < 0:
            raise ConfigurationError("target_synthetic_count must be >= 0")
        if self.strategy == "none" and self.target_synthetic_count:
            raise ConfigurationError("strategy 'none' cannot request synthetic documents")
        if not 3 <= self.examples_per_prompt <= 5:
            raise ConfigurationError("examples_per_prompt must be between 3 and 5")
        if not 5 <= self.generations_per_prompt <= 10:
            raise ConfigurationError("generations_per_prompt must be between 5 and 10")


@dataclass
class ClusterAssignment:
    labels: dict
    n_clusters: int
    linkage_trace: list[tuple[int, int, float, int]] = field(default_factory=list)

    def members(self) -> list[list]:
        groups: list[list] = [[] for _ in range(self.n_clusters)]
        for key, label in self.labels.items():
            groups[label].append(key)
        return [sorted(g) for g in groups]


@dataclass(frozen=True)
class PromptBatch:
    prompt_text: str
    example_doc_ids: tuple[str, ...]
    requested_count: int
    examples: tuple[str, ...] = ()
    cluster_index: int | None = None


@dataclass
class AugmentResult:
    documents: list[Document]
    manifest: dict

    @property
    def synthetic(self) -> list[Document]:
        return [d for d in self.documents if d.origin == "synthetic"]


# -- vectors and clustering ---------------------------------------------------

def vectorize(docs, vocab_cap: int = 3000) -> tuple[np.ndarray, list[str]]:
    """Binary-tf TF-IDF rows over the ``vocab_cap`` most document-frequent stems.

    IDF is ``ln(N / df) + 1``; rows are L2-normalised. Returns the matrix and
    its column stems (sorted).
    """
    stem_sets = [set(getattr(d, "stems", d)) for d in docs]
    if not stem_sets:
        raise ConfigurationError("vectorize needs at least one document")
    df: dict[str, int] = {}
    for s in stem_sets:
        for t in s:
            df[t] = df.get(t, 0) + 1
    if not df:
        raise ConfigurationError("all documents are empty; nothing to vectorize")
    vocab = sorted(sorted(df, key=lambda t: (-df[t], t))[:vocab_cap])
    col = {t: j for j, t in enumerate(vocab)}
    n = len(stem_sets)
    idf = np.array([math.log(n / df[t]) + 1.0 for t in vocab])
    m = np.zeros((n, len(vocab)))
    for i, s in enumerate(stem_sets):
        for t in s:
            j = col.get(t)
            if j is not None:
                m[i, j] = idf[j]
    norms = np.linalg.norm(m, axis=1)
    nz = norms > 0
    m[nz] /= norms[nz, None]
    return m, vocab


def cosine_distances(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = matrix / safe[:, None]
    d = 1.0 - unit @ unit.T
    zero = norms == 0
    d[zero, :] = 1.0
    d[:, zero] = 1.0
    np.clip(d, 0.0, 2.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def hierarchical_cluster(matrix, n_clusters: int, ids=None) -> ClusterAssignment:
    """Average-linkage agglomerative clustering on cosine distance.

    Merging stops at ``n_clusters``. Equal distances are resolved in favour
    of the pair with the smallest indices, a cluster being indexed by its
    smallest member row. Labels are numbered by smallest member.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if not 1 <= n_clusters <= n:
        raise ConfigurationError(f"n_clusters must be in [1, {n}], got {n_clusters}")
    ids = list(range(n)) if ids is None else list(ids)
    dist = cosine_distances(matrix)
    work = dist.copy()
    work[np.tril_indices(n)] = np.inf
    sizes = np.ones(n, dtype=int)
    members = {i: [i] for i in range(n)}
    trace = []
    for _ in range(n - n_clusters):
        flat = int(np.argmin(work))
        i, j = divmod(flat, n)
        d_ij = float(work[i, j])
        ni, nj = sizes[i], sizes[j]
        # Lance-Williams update for average linkage, merged cluster kept at row i
        merged = (ni * dist[i] + nj * dist[j]) / (ni + nj)
        dist[i, :] = merged
        dist[:, i] = merged
        dist[i, i] = 0.0
        sizes[i] = ni + nj
        members[i].extend(members.pop(j))
        work[j, :] = np.inf
        work[:, j] = np.inf
        active = np.fromiter(members.keys(), dtype=int)
        lo = active[active < i]
        hi = active[active > i]
        work[lo, i] = merged[lo]
        work[i, hi] = merged[hi]
        trace.append((i, j, d_ij, int(sizes[i])))
    labels = {}
    for label, root in enumerate(sorted(members)):
        for r in members[root]:
            labels[ids[r]] = label
    return ClusterAssignment(labels, len(members), trace)


# -- planning -----------------------------------------------------------------

def plan_clusters(n_seed: int, plan: AugmentationPlan) -> tuple[int, int]:
    """Return ``(n_clusters, generations_per_prompt)`` for a clustered plan.

    The cluster count is ``ceil(target / generations)`` clamped to
    ``[1, n_seed // examples_per_prompt]``; when the clamp bites the
    per-prompt generation count is raised so the target is still reached.
    """
    if n_seed < plan.examples_per_prompt:
        raise ConfigurationError(
            f"{n_seed} seed documents cannot fill prompts of {plan.examples_per_prompt} examples")
    target = plan.target_synthetic_count
    if target == 0:
        return 0, plan.generations_per_prompt
    wanted = math.ceil(target / plan.generations_per_prompt)
    k = max(1, min(wanted, n_seed // plan.examples_per_prompt))
    return k, max(plan.generations_per_prompt, math.ceil(target / k))


def split_counts(total: int, parts: int) -> list[int]:
    """Spread ``total`` over ``parts`` as evenly as possible, larger shares first."""
    base, rem = divmod(total, parts)
    return [base + 1] * rem + [base] * (parts - rem)


# -- prompts ------------------------------------------------------------------

def build_prompt(examples, count: int, cluster_index: int | None = None) -> PromptBatch:
    if not examples:
        raise ValueError("a prompt needs at least one example")
    if count < 1:
        raise ValueError("count must be >= 1")
    docs = [e if isinstance(e, Document) else Document(f"example/{i}", e) for i, e in enumerate(examples)]
    lines = [PROMPT_HEADER.format(message_per_cluster=count)]
    lines += [PROMPT_EXAMPLE.format(i=i, example=d.body) for i, d in enumerate(docs, 1)]
    lines.append(PROMPT_FOOTER)
    return PromptBatch(
        prompt_text="\n".join(lines),
        example_doc_ids=tuple(d.doc_id for d in docs),
        requested_count=count,
        examples=tuple(d.body for d in docs),
        cluster_index=cluster_index,
    )


def parse_generation(raw_response: str, expected: int, batch: int | str = 0) -> list[Document]:
    """Split a response on ``###``; at most ``expected`` documents are kept."""
    segments = [s.strip() for s in raw_response.split(SEPARATOR)]
    segments = [s for s in segments if s][:expected]
    return [Document(f"syn/{batch}/{i}", s, "synthetic") for i, s in enumerate(segments)]


# -- driver -------------------------------------------------------------------

@dataclass
class _BatchOutcome:
    index: int
    batch: PromptBatch
    documents: list[Document]
    retries: int
    error: str | None = None

    def manifest(self) -> dict:
        return {
            "batch": self.index,
            "cluster_index": self.batch.cluster_index,
            "example_doc_ids": list(self.batch.example_doc_ids),
            "requested": self.batch.requested_count,
            "parsed": len(self.documents),
            "shortfall": self.batch.requested_count - len(self.documents),
            "retries": self.retries,
            "error": self.error,
        }


def _run_batch(generator, index: int, batch: PromptBatch) -> _BatchOutcome:
    last_error = None
    for attempt in range(MAX_ATTEMPTS):
        if attempt:
            wait = generator.backoff(attempt) if hasattr(generator, "backoff") else 0.0
            if wait > 0:
                time.sleep(wait)
        try:
            record = generator.complete(batch, attempt=attempt)
        except GenerationError as exc:
            last_error = str(exc)
            log.warning("batch %d attempt %d failed: %s", index, attempt + 1, exc)
            if not exc.retryable:
                break
            continue
        docs = parse_generation(record.raw_response, batch.requested_count, index)
        if docs:
            return _BatchOutcome(index, batch, docs, attempt)
        last_error = "no parseable segments"
    return _BatchOutcome(index, batch, [], MAX_ATTEMPTS - 1, last_error or "failed")


def _dispatch(generator, batches: list[tuple[int, PromptBatch]]) -> list[_BatchOutcome]:
    parallel = getattr(getattr(generator, "config", None), "max_parallel", 1)
    if parallel <= 1 or len(batches) <= 1:
        return [_run_batch(generator, i, b) for i, b in batches]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        futures = [pool.submit(_run_batch, generator, i, b) for i, b in batches]
        outcomes = [f.result() for f in futures]
    return sorted(outcomes, key=lambda o: o.index)


def _pick(rng: np.random.Generator, docs: list[Document], k: int) -> list[Document]:
    k = min(k, len(docs))
    idx = sorted(rng.choice(len(docs), size=k, replace=False))
    return [docs[i] for i in idx]


def augment(seed_docs, plan: AugmentationPlan, generator, stopwords=None) -> AugmentResult:
    """Return seed documents plus generated ones, with a per-batch manifest.

    Raises AugmentationError (carrying the partial manifest) when a batch
    still fails after the retry budget.
    """
    seeds = sorted(seed_docs, key=lambda d: d.doc_id)
    manifest: dict = {
        "strategy": plan.strategy,
        "n_seed": len(seeds),
        "target_synthetic": plan.target_synthetic_count,
        "examples_per_prompt": plan.examples_per_prompt,
        "generations_per_prompt": plan.generations_per_prompt,
        "batches": [],
    }
    if plan.strategy == "none" or plan.target_synthetic_count == 0:
        manifest.update(n_synthetic=0, shortfall=0)
        return AugmentResult(list(seeds), manifest)
    if not seeds:
        raise ConfigurationError("cannot augment an empty seed set")

    rng = stream(plan.rng_seed, "augment", plan.strategy)
    if plan.strategy == "clustered":
        synthetic = _augment_clustered(seeds, plan, generator, rng, manifest, stopwords)
    else:
        synthetic = _augment_random(seeds, plan, generator, rng, manifest)
    manifest["n_synthetic"] = len(synthetic)
    manifest["shortfall"] = plan.target_synthetic_count - len(synthetic)
    if manifest["shortfall"]:
        log.warning("augmentation fell %d documents short of its target", manifest["shortfall"])
    return AugmentResult(list(seeds) + synthetic, manifest)


def _record(outcomes, manifest) -> list[Document]:
    docs = []
    for o in outcomes:
        manifest["batches"].append(o.manifest())
        docs.extend(o.documents)
    failed = [o for o in outcomes if o.error and not o.documents]
    if failed:
        raise AugmentationError(
            f"{len(failed)} prompt batch(es) failed after {MAX_ATTEMPTS} attempts: {failed[0].error}",
            manifest,
        )
    return docs


def _augment_clustered(seeds, plan, generator, rng, manifest, stopwords) -> list[Document]:
    n_clusters, per_prompt = plan_clusters(len(seeds), plan)
    keyword_docs = to_keyword_docs(seeds, stopwords)
    matrix, _ = vectorize(keyword_docs, plan.vocab_cap)
    assignment = hierarchical_cluster(matrix, n_clusters, [d.doc_id for d in seeds])
    by_id = {d.doc_id: d for d in seeds}
    counts = split_counts(plan.target_synthetic_count, n_clusters)
    batches = []
    for c, (ids, count) in enumerate(zip(assignment.members(), counts)):
        examples = _pick(rng, [by_id[i] for i in ids], plan.examples_per_prompt)
        batches.append((c, build_prompt(examples, count, cluster_index=c)))
    manifest["clustering"] = {
        "n_clusters": n_clusters,
        "per_prompt": per_prompt,
        "distance": "cosine",
        "linkage": "average",
        "vectors": "tfidf-binary",
        "vocab_cap": plan.vocab_cap,
        "cluster_sizes": [len(m) for m in assignment.members()],
    }
    return _record(_dispatch(generator, batches), manifest)


def _augment_random(seeds, plan, generator, rng, manifest) -> list[Document]:
    synthetic: list[Document] = []
    next_index = 0
    # keep prompting until the target is met, within a bounded number of rounds
    for _round in range(MAX_ATTEMPTS):
        remaining = plan.target_synthetic_count - len(synthetic)
        if remaining <= 0:
            break
        n_batches = math.ceil(remaining / plan.generations_per_prompt)
        counts = split_counts(remaining, n_batches)
        batches = []
        for count in counts:
            examples = _pick(rng, seeds, plan.examples_per_prompt)
            batches.append((next_index, build_prompt(examples, count)))
            next_index += 1
        synthetic.extend(_record(_dispatch(generator, batches), manifest))
    return synthetic
