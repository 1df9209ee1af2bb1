"""Seeded random-sampling experiments on the individual/collective bound ratio.

Every sample ``i`` of a run with master seed ``s`` draws from its own
generator seeded by ``SeedSequence(s, spawn_key=(i,))``, so results do not
depend on execution order or on the number of worker processes.  Records
are always merged in index order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np
import numpy.typing as npt

from . import __version__, bounds, linalg, sdp
from .errors import InvalidModelError, QcrbError, UnsupportedDimensionError
from .gellmann import gmm_basis
from .model import (
    GRAM_TOL,
    StatModel,
    depolarized_plus_model,
    full_model_at,
    gmm_subset_model,
    make_model,
    plus_state,
    purity,
    rank_deficient_min_model,
    tensor_copies,
    theta_of_state,
)

SAMPLERS = ("ginibre", "bloch-reject", "depolarized-mix", "plus-mix")
DERIV_MODES = ("gmm-full", "gmm-subset", "random-directions")
SWEEP_SAMPLERS = ("ginibre", "depolarized-mix", "plus-mix")
RATIO_TOL = 1e-6
QUARANTINE_TOL = 1e-5
STARVATION_WINDOW = 10_000
STARVATION_RATE = 1e-4
MAX_REJECTION_DRAWS = 10_000_000
FORCED_SUBSET_LIMIT = 80
MAX_EXPERIMENT_DIM = 6


class SamplerStarvationWarning(UserWarning):
    """A rejection sampler accepts too rarely to be practical."""


# ---------------------------------------------------------------------------
# specs and records


@dataclass(frozen=True)
class SampleSpec:
    """What to draw: dimension, parameter count, sample count, seed and sampler.

    ``mix_p`` is the mixing-weight grid for the ``*-mix`` samplers; sample
    ``i`` uses ``mix_p[i % len(mix_p)]``.  An empty grid draws ``p``
    uniformly from ``[0, 1]``.
    """

    d: int
    n: int | None = None
    count: int = 1
    seed: int = 0
    sampler: str = "ginibre"
    mix_p: tuple[float, ...] = ()
    deriv_mode: str = "gmm-full"

    def __post_init__(self) -> None:
        if not isinstance(self.d, (int, np.integer)) or not 2 <= self.d <= MAX_EXPERIMENT_DIM:
            raise UnsupportedDimensionError(f"experiments support d in 2..{MAX_EXPERIMENT_DIM}, got {self.d!r}")
        nmax = self.d * self.d - 1
        if self.n is None:
            object.__setattr__(self, "n", nmax)
        if not 1 <= self.n <= nmax:
            raise InvalidModelError(f"n must lie in 1..{nmax}, got {self.n}")
        if self.count < 1:
            raise ValueError("count must be at least 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}; choose from {SAMPLERS}")
        if self.deriv_mode not in DERIV_MODES:
            raise ValueError(f"unknown derivative mode {self.deriv_mode!r}; choose from {DERIV_MODES}")
        if self.deriv_mode == "gmm-full" and self.n != nmax:
            raise InvalidModelError(f"gmm-full needs n = {nmax}, got {self.n}")
        object.__setattr__(self, "mix_p", tuple(float(p) for p in self.mix_p))
        if any(not 0.0 <= p <= 1.0 for p in self.mix_p):
            raise ValueError("mix_p values must lie in [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["mix_p"] = list(self.mix_p)
        return out


@dataclass(frozen=True)
class RatioRecord:
    """Bounds for one sampled model, with the derived ratios."""

    d: int
    n: int
    purity: float
    hcrb: float
    nhcrb: float
    sld: float
    rld: float
    gmcrb: float
    ratio_nh: float
    delta: float
    small_delta: float
    seed: int
    model_hash: str
    index: int = -1
    sampler: str = ""
    label: str = ""

    @classmethod
    def from_bounds(cls, model: StatModel, reps: dict[str, bounds.BoundReport], seed: int, index: int, sampler: str) -> "RatioRecord":
        h, nh, sld = reps["HCRB"].value, reps["NHCRB"].value, reps["SLD"].value
        return cls(
            d=model.dim,
            n=model.n_params,
            purity=purity(model),
            hcrb=h,
            nhcrb=nh,
            sld=sld,
            rld=reps["RLD"].value,
            gmcrb=reps["GMCRB"].value,
            ratio_nh=nh / h,
            delta=(h - sld) / sld,
            small_delta=(nh - h) / h,
            seed=seed,
            model_hash=model.content_hash(),
            index=index,
            sampler=sampler,
            label=model.label,
        )

    def violations(self) -> list[str]:
        out = []
        if self.ratio_nh < 1.0 - RATIO_TOL:
            out.append(f"ratio_nh {self.ratio_nh:.9g} < 1")
        if not -RATIO_TOL <= self.delta <= 1.0 + RATIO_TOL:
            out.append(f"delta {self.delta:.9g} outside [0, 1]")
        return out

    @classmethod
    def csv_fields(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def csv_row(self) -> list[str]:
        return [repr(v) if isinstance(v, float) else str(v) for v in (getattr(self, k) for k in self.csv_fields())]

    @classmethod
    def from_row(cls, row: dict[str, str]) -> "RatioRecord":
        kw: dict[str, Any] = {}
        for f in fields(cls):
            raw = row[f.name]
            kw[f.name] = int(raw) if f.type == "int" else float(raw) if f.type == "float" else raw
        return cls(**kw)


@dataclass
class Quarantined:
    """A sample whose bounds violate the expected ordering; kept for diagnosis."""

    index: int
    seed: int
    reasons: list[str]
    values: dict[str, float]
    solver: dict[str, Any]


@dataclass
class Failure:
    index: int
    seed: int
    error: str


@dataclass
class ExperimentResult:
    """Records in index order plus bookkeeping for the run manifest."""

    name: str
    params: dict[str, Any]
    records: list[RatioRecord] = field(default_factory=list)
    quarantined: list[Quarantined] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)
    solver_options: dict[str, Any] = field(default_factory=dict)
    table: list[Any] | None = None

    def csv_text(self) -> str:
        """The table when one is set (grid cells, subset rows), otherwise the records."""
        return rows_to_csv(self.table) if self.table is not None else records_to_csv(self.records)

    def manifest(self) -> dict[str, Any]:
        return {
            "experiment": self.name,
            "params": self.params,
            "package_version": __version__,
            "solver_options": self.solver_options,
            "content_hash": git_blob_hash(self.csv_text().encode()),
            "counts": {
                "records": len(self.records),
                "quarantined": len(self.quarantined),
                "failed": len(self.failures),
            },
            "quarantined": [asdict(q) for q in self.quarantined],
            "failures": [asdict(f) for f in self.failures],
            "extra": _jsonable(self.extra),
            "table": _jsonable(self.table) if self.table is not None else None,
        }

    def write(self, csv_path: str | Path, manifest_path: str | Path | None = None) -> Path:
        """Write the CSV and its JSON manifest (default: ``<csv>.manifest.json``)."""
        csv_path = Path(csv_path)
        csv_path.write_text(self.csv_text(), encoding="utf-8", newline="")
        if self.table is not None and self.records:
            csv_path.with_suffix(".records.csv").write_text(records_to_csv(self.records), encoding="utf-8", newline="")
        mpath = Path(manifest_path) if manifest_path else csv_path.with_suffix(csv_path.suffix + ".manifest.json")
        mpath.write_text(json.dumps(self.manifest(), indent=1, sort_keys=True), encoding="utf-8")
        return mpath


def records_to_csv(records: Iterable[RatioRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RatioRecord.csv_fields())
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def rows_to_csv(rows: Sequence[Any]) -> str:
    """CSV for a list of dataclass rows; tuples become space-separated cells."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not rows:
        return ""
    names = [f.name for f in fields(rows[0])]
    w.writerow(names)
    for r in rows:
        w.writerow([_csv_cell(getattr(r, k)) for k in names])
    return buf.getvalue()


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return " ".join(_csv_cell(x) for x in v)
    return str(v)


def records_from_csv(path: str | Path) -> list[RatioRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [RatioRecord.from_row(row) for row in csv.DictReader(fh)]


def git_blob_hash(data: bytes) -> str:
    """SHA-1 over ``b"blob <len>\\0" + data``, as ``git hash-object`` computes it."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    if hasattr(v, "__dataclass_fields__"):
        return _jsonable(asdict(v))
    return v


# ---------------------------------------------------------------------------
# sampling


def sample_seed(master: int, index: int) -> int:
    """Per-sample 64-bit seed derived from ``(master, index)`` by counter-based hashing."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def ginibre_state(d: int, rng: np.random.Generator) -> npt.NDArray[np.complex128]:
    """``S S^dagger / Tr(S S^dagger)`` with standard complex normal ``S``."""
    s = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2.0)
    rho = s @ s.conj().T
    return rho / np.trace(rho).real


def bloch_reject_state(d: int, rng: np.random.Generator) -> npt.NDArray[np.complex128]:
    """``1/d + sum phi_j lambda_j`` with uniform ``phi_j`` in ``[-a, a]``, ``a = sqrt((d-1)/d)``, kept if PSD."""
    lam = gmm_basis(d).matrices
    a = np.sqrt((d - 1) / d)
    warned = False
    for draws in range(1, MAX_REJECTION_DRAWS + 1):
        phi = rng.uniform(-a, a, size=lam.shape[0])
        rho = np.eye(d) / d + np.einsum("j,jab->ab", phi, lam)
        if linalg.min_eig(rho) > 0.0:
            return rho
        if not warned and draws >= STARVATION_WINDOW and 1.0 / draws < STARVATION_RATE:
            warnings.warn(f"rejection sampler for d={d} starving after {draws} draws", SamplerStarvationWarning, stacklevel=2)
            warned = True
    raise QcrbError(f"rejection sampler for d={d} found no state in {MAX_REJECTION_DRAWS} draws")


def draw_state(
    sampler: str, d: int, rng: np.random.Generator, mix_p: float | None = None
) -> tuple[npt.NDArray[np.complex128], float | None]:
    """One state from ``sampler``; returns the state and the mixing weight used."""
    if sampler == "ginibre":
        return ginibre_state(d, rng), None
    if sampler == "bloch-reject":
        return bloch_reject_state(d, rng), None
    if sampler in ("depolarized-mix", "plus-mix"):
        base = ginibre_state(d, rng)
        p = float(rng.uniform()) if mix_p is None else float(mix_p)
        target = np.eye(d) / d if sampler == "depolarized-mix" else plus_state(d)
        return (1.0 - p) * base + p * target, p
    raise ValueError(f"unknown sampler {sampler!r}")


def random_derivatives(d: int, n: int, rng: np.random.Generator) -> npt.NDArray[np.complex128]:
    """``n`` derivatives with standard normal GMM coefficients, redrawn until linearly independent."""
    lam = gmm_basis(d).matrices
    for _ in range(1000):
        c = rng.normal(size=(n, lam.shape[0]))
        der = np.einsum("jk,kab->jab", c, lam)
        gram = np.einsum("jab,kba->jk", der, der).real
        if np.linalg.eigvalsh(gram)[0] > GRAM_TOL:
            return der
    raise QcrbError(f"could not draw {n} independent directions in d={d}")


def model_for_state(
    rho: npt.ArrayLike, n: int, deriv_mode: str, rng: np.random.Generator, label: str = ""
) -> StatModel:
    """Attach ``n`` parameter derivatives to a state."""
    r = np.asarray(rho)
    d = r.shape[0]
    nmax = d * d - 1
    if deriv_mode == "gmm-full":
        return full_model_at(r, label=label)
    if deriv_mode == "gmm-subset":
        ks = np.sort(rng.choice(nmax, size=n, replace=False))
        theta = theta_of_state(r)[ks]
        return make_model(r, gmm_basis(d).matrices[ks], theta_star=theta, label=f"{label}K={','.join(str(k + 1) for k in ks)}")
    if deriv_mode == "random-directions":
        return make_model(r, random_derivatives(d, n, rng), label=label)
    raise ValueError(f"unknown derivative mode {deriv_mode!r}")


@dataclass(frozen=True)
class ModelSample:
    index: int
    seed: int
    sampler: str
    mix_p: float | None
    model: StatModel


def _sample_at(spec: SampleSpec, index: int, sampler: str | None = None) -> ModelSample:
    seed = sample_seed(spec.seed, index)
    rng = np.random.default_rng(seed)
    sampler = sampler or spec.sampler
    mix = spec.mix_p[index % len(spec.mix_p)] if spec.mix_p else None
    rho, p = draw_state(sampler, spec.d, rng, mix)
    label = f"{sampler}#{index}" + (f"(p={p:.6g})" if p is not None else "")
    model = model_for_state(rho, spec.n, spec.deriv_mode, rng, label)
    return ModelSample(index, seed, sampler, p, model)


def sample_states(spec: SampleSpec) -> Iterator[tuple[int, int, npt.NDArray[np.complex128]]]:
    """Deterministic ``(index, seed, rho)`` stream."""
    for i in range(spec.count):
        seed = sample_seed(spec.seed, i)
        rng = np.random.default_rng(seed)
        mix = spec.mix_p[i % len(spec.mix_p)] if spec.mix_p else None
        yield i, seed, draw_state(spec.sampler, spec.d, rng, mix)[0]


def sample_models(spec: SampleSpec) -> Iterator[ModelSample]:
    """Deterministic model stream following ``spec.deriv_mode``."""
    for i in range(spec.count):
        yield _sample_at(spec, i)


# ---------------------------------------------------------------------------
# evaluation


def evaluate_model(
    model: StatModel, opts: sdp.SdpOptions | None = None, seed: int = 0, index: int = -1, sampler: str = ""
) -> RatioRecord | Quarantined:
    """All bounds for one model; ordering or ratio violations are quarantined."""
    reps = bounds.all_bounds(model, opts)
    rec = RatioRecord.from_bounds(model, reps, seed, index, sampler)
    reasons = rec.violations()
    viol = bounds.ordering_violation(reps)
    if viol > QUARANTINE_TOL:
        reasons.append(f"ordering violated by {viol:.3e}")
    if not reasons:
        return rec
    solver = {k: reps[k].residuals for k in ("HCRB", "NHCRB")}
    return Quarantined(index, seed, reasons, {k: r.value for k, r in reps.items()}, _jsonable(solver))


def _run_indexed(
    task: Callable[[Any], Any], args: Sequence[Any], jobs: int = 1
) -> list[Any]:
    if jobs <= 1 or len(args) <= 1:
        return [task(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(task, args, chunksize=max(1, len(args) // (4 * jobs))))


def _sample_task(arg: tuple[SampleSpec, int, str | None, sdp.SdpOptions | None]):
    spec, index, sampler, opts = arg
    try:
        s = _sample_at(spec, index, sampler)
        return evaluate_model(s.model, opts, s.seed, s.index, s.sampler)
    except QcrbError as exc:
        return Failure(index, sample_seed(spec.seed, index), f"{type(exc).__name__}: {exc}")


def _collect(result: ExperimentResult, outputs: Iterable[Any]) -> None:
    for out in outputs:
        if isinstance(out, RatioRecord):
            result.records.append(out)
        elif isinstance(out, Quarantined):
            result.quarantined.append(out)
        else:
            result.failures.append(out)


def run_samples(
    spec: SampleSpec,
    opts: sdp.SdpOptions | None = None,
    jobs: int = 1,
    samplers: Sequence[str] | None = None,
    resume: Sequence[RatioRecord] = (),
    name: str = "samples",
) -> ExperimentResult:
    """Evaluate ``spec.count`` models.

    ``samplers`` cycles the state sampler with the index.  Records in
    ``resume`` whose index and seed match are reused instead of recomputed.
    """
    known = {r.index: r for r in resume if r.index >= 0 and r.seed == sample_seed(spec.seed, r.index)}
    todo = [i for i in range(spec.count) if i not in known]
    args = [(spec, i, samplers[i % len(samplers)] if samplers else None, opts) for i in todo]
    computed = dict(zip(todo, _run_indexed(_sample_task, args, jobs)))
    result = ExperimentResult(name, {"spec": spec.to_dict(), "samplers": list(samplers or [spec.sampler])})
    result.solver_options = asdict(opts or sdp.SdpOptions())
    _collect(result, (known[i] if i in known else computed[i] for i in range(spec.count)))
    result.extra["resumed"] = len(known)
    return result


# ---------------------------------------------------------------------------
# purity sweep


@dataclass(frozen=True)
class CurvePoint:
    family: str
    d: int
    p: float
    purity: float
    hcrb: float
    nhcrb: float
    ratio: float
    nhcrb_formula: float | None = None
    hcrb_formula: float | None = None


def rho_max_curve(d: int, ps: Sequence[float], opts: sdp.SdpOptions | None = None) -> list[CurvePoint]:
    """Depolarized ``|+>`` family: SDP values next to the closed forms."""
    out = []
    for p in ps:
        h_f, nh_f = bounds.analytic_rho_max(d, p)
        m = depolarized_plus_model(d, p, eps=1e-8 if p >= 1.0 else 0.0)
        h = bounds.hcrb(m, opts).value
        nh = bounds.nhcrb(m, opts).value
        out.append(CurvePoint("rho_max", d, p, purity(m), h, nh, nh / h, nh_f, h_f))
    return out


def rho_min_curves(d: int, points: int = 5, opts: sdp.SdpOptions | None = None) -> tuple[list[CurvePoint], int]:
    """Classical rank-deficient branches, regularized; returns points and failure count."""
    out, failed = [], 0
    for branch in range(2, d + 1):
        for p in np.linspace(1.0 / branch, 1.0 / (branch - 1), points):
            try:
                m = rank_deficient_min_model(d, branch, float(p))
                h = bounds.hcrb(m, opts).value
                nh = bounds.nhcrb(m, opts).value
            except QcrbError:
                failed += 1
                continue
            out.append(CurvePoint(f"rho_min{branch}", d, float(p), purity(m), h, nh, nh / h))
    return out, failed


def purity_sweep(
    d: int,
    samples: int,
    seed: int = 0,
    include_extremal: bool = True,
    opts: sdp.SdpOptions | None = None,
    jobs: int = 1,
    curve_points: int = 11,
    resume: Sequence[RatioRecord] = (),
) -> ExperimentResult:
    """Full-model ratios for random states of all purities.

    Samplers cycle through Ginibre, depolarized mixing and ``|+>`` mixing so
    that high-purity states are represented.
    """
    if not 2 <= d <= 4:
        raise UnsupportedDimensionError(f"purity sweep supports d in 2..4, got {d}")
    spec = SampleSpec(d=d, count=samples, seed=seed, sampler="ginibre")
    res = run_samples(spec, opts, jobs, SWEEP_SAMPLERS, resume, name="purity-sweep")
    res.params.update(d=d, samples=samples, seed=seed, include_extremal=include_extremal)
    if include_extremal:
        ps = np.linspace(0.0, 1.0, curve_points)
        res.extra["rho_max"] = rho_max_curve(d, ps, opts)
        mins, failed = rho_min_curves(d, opts=opts)
        res.extra["rho_min"] = mins
        res.extra["rho_min_failures"] = failed
    if res.records:
        ratios = np.array([r.ratio_nh for r in res.records])
        res.extra["max_ratio"] = float(ratios.max())
        res.extra["min_ratio"] = float(ratios.min())
    return res


# ---------------------------------------------------------------------------
# subsets of the maximally mixed model


def subset_list(d: int, n: int, limit: int = FORCED_SUBSET_LIMIT, seed: int = 0) -> list[tuple[int, ...]]:
    """All 1-based ``n``-subsets of the GMMs, or a seeded sample of ``limit`` of them."""
    nmax = d * d - 1
    total = math.comb(nmax, n)
    if total <= limit:
        return list(itertools.combinations(range(1, nmax + 1), n))
    rng = np.random.default_rng(sample_seed(seed, n))
    picked: set[tuple[int, ...]] = {tuple(range(1, n + 1))}
    while len(picked) < limit:
        picked.add(tuple(sorted(int(k) + 1 for k in rng.choice(nmax, size=n, replace=False))))
    return sorted(picked)


def _subset_task(arg: tuple[int, tuple[int, ...], sdp.SdpOptions | None, bool]):
    d, ks, opts, want_h = arg
    m = gmm_subset_model(d, ks)
    try:
        nh = bounds.nhcrb(m, opts).value
        h = bounds.hcrb(m, opts).value if want_h else len(ks) / d
    except QcrbError as exc:
        return ks, None, None, str(exc)
    return ks, h, nh, ""


@dataclass(frozen=True)
class SubsetRow:
    n: int
    hcrb: float
    hcrb_spread: float
    nhcrb_min: float
    nhcrb_max: float
    max_ratio: float
    argmax: tuple[int, ...]
    argmin: tuple[int, ...]
    subsets: int
    failures: int


def subset_table(
    d: int = 3,
    ns: Iterable[int] | None = None,
    opts: sdp.SdpOptions | None = None,
    jobs: int = 1,
    limit: int | None = None,
) -> list[SubsetRow]:
    """HCRB and the NHCRB range over GMM subsets of the maximally mixed state."""
    nmax = d * d - 1
    ns = list(range(2, nmax + 1)) if ns is None else list(ns)
    rows = []
    for n in ns:
        subs = subset_list(d, n, limit=limit or math.comb(nmax, n))
        outs = _run_indexed(_subset_task, [(d, ks, opts, True) for ks in subs], jobs)
        ok = [(ks, h, nh) for ks, h, nh, err in outs if not err]
        if not ok:
            raise QcrbError(f"every subset solve failed for n={n}")
        hs = np.array([h for _, h, _ in ok])
        nhs = np.array([nh for _, _, nh in ok])
        ratios = nhs / hs
        rows.append(
            SubsetRow(
                n=n,
                hcrb=float(np.mean(hs)),
                hcrb_spread=float(np.ptp(hs)),
                nhcrb_min=float(nhs.min()),
                nhcrb_max=float(nhs.max()),
                max_ratio=float(ratios.max()),
                argmax=ok[int(np.argmax(ratios))][0],
                argmin=ok[int(np.argmin(nhs))][0],
                subsets=len(subs),
                failures=len(outs) - len(ok),
            )
        )
    return rows


def table1_reproduce(opts: sdp.SdpOptions | None = None, jobs: int = 1) -> list[SubsetRow]:
    """Qutrit subset table for ``n = 2..8`` by full enumeration of all 247 subsets."""
    return subset_table(3, range(2, 9), opts, jobs)


# ---------------------------------------------------------------------------
# (d, n) grid


@dataclass
class GridCell:
    d: int
    n: int
    samples: int
    failures: int
    quarantined: int
    raw_min: float | None
    raw_mean: float | None
    raw_max: float | None
    forced_max: float | None
    forced_argmax: tuple[int, ...] | None

    @property
    def max_ratio(self) -> float | None:
        vals = [v for v in (self.raw_max, self.forced_max) if v is not None]
        return max(vals) if vals else None

    @property
    def empty(self) -> bool:
        return self.max_ratio is None


def ratio_grid(
    d_range: Iterable[int],
    n_range: Iterable[int],
    samples_per_cell: int,
    seed: int = 0,
    sampler: str = "bloch-reject",
    deriv_mode: str = "random-directions",
    include_forced: bool = True,
    opts: sdp.SdpOptions | None = None,
    jobs: int = 1,
) -> ExperimentResult:
    """Min, mean and max ratio per ``(d, n)`` cell.

    Raw random maxima and the maxima over maximally-mixed subset models are
    kept apart; ``GridCell.max_ratio`` is the larger of the two.
    """
    cells: list[GridCell] = []
    result = ExperimentResult("grid", {"seed": seed, "samples_per_cell": samples_per_cell, "sampler": sampler, "deriv_mode": deriv_mode, "include_forced": include_forced})
    result.solver_options = asdict(opts or sdp.SdpOptions())
    for d in d_range:
        nmax = d * d - 1
        for n in n_range:
            if n > nmax:
                continue
            cell_seed = sample_seed(seed, d * 1000 + n)
            raw_min = raw_mean = raw_max = None
            failures = quarantined = 0
            if samples_per_cell > 0:
                mode = "gmm-full" if n == nmax and deriv_mode == "gmm-subset" else deriv_mode
                spec = SampleSpec(d=d, n=n, count=samples_per_cell, seed=cell_seed, sampler=sampler, deriv_mode=mode)
                sub = run_samples(spec, opts, jobs, name="grid-cell")
                result.records.extend(sub.records)
                result.quarantined.extend(sub.quarantined)
                result.failures.extend(sub.failures)
                failures, quarantined = len(sub.failures), len(sub.quarantined)
                if sub.records:
                    r = np.array([x.ratio_nh for x in sub.records])
                    raw_min, raw_mean, raw_max = float(r.min()), float(r.mean()), float(r.max())
            forced_max = forced_arg = None
            if include_forced:
                subs = subset_list(d, n, seed=seed)
                outs = _run_indexed(_subset_task, [(d, ks, opts, False) for ks in subs], jobs)
                ok = [(ks, nh / h) for ks, h, nh, err in outs if not err]
                if ok:
                    forced_arg, forced_max = max(ok, key=lambda t: (t[1], [-k for k in t[0]]))
            cells.append(GridCell(d, n, samples_per_cell, failures, quarantined, raw_min, raw_mean, raw_max, forced_max, forced_arg))
    result.table = cells
    return result


# ---------------------------------------------------------------------------
# weighted ratios


@dataclass(frozen=True)
class WeightedRecord:
    index: int
    seed: int
    purity: float
    ratio: float
    ratio_mm: float
    weight: tuple[float, ...]

    @property
    def below_mm(self) -> bool:
        return self.ratio <= self.ratio_mm + RATIO_TOL


def random_weight(n: int, rng: np.random.Generator) -> npt.NDArray[np.float64]:
    """Random positive-definite weight normalized to ``Tr W = n``."""
    g = rng.normal(size=(n, n))
    w = g @ g.T + 1e-3 * np.eye(n)
    return w * (n / np.trace(w))


def _weighted_task(arg: tuple[int, int, int, sdp.SdpOptions | None, bool]):
    d, master, index, opts, identity = arg
    seed = sample_seed(master, index)
    rng = np.random.default_rng(seed)
    rho, _ = draw_state(SWEEP_SAMPLERS[index % len(SWEEP_SAMPLERS)], d, rng)
    n = d * d - 1
    w = np.eye(n) if identity else random_weight(n, rng)
    try:
        m = full_model_at(rho).with_weight(w)
        mm = full_model_at(np.eye(d) / d).with_weight(w)
        r = bounds.nhcrb(m, opts).value / bounds.hcrb(m, opts).value
        r_mm = bounds.nhcrb(mm, opts).value / bounds.hcrb(mm, opts).value
    except QcrbError as exc:
        return Failure(index, seed, f"{type(exc).__name__}: {exc}")
    return WeightedRecord(index, seed, purity(m), r, r_mm, tuple(w[np.triu_indices(n)].tolist()))


def weighted_experiment(
    d: int, samples: int, seed: int = 0, opts: sdp.SdpOptions | None = None, jobs: int = 1, identity_weight: bool = False
) -> ExperimentResult:
    """Paired weighted ratios at a random state and at the maximally mixed state."""
    outs = _run_indexed(_weighted_task, [(d, seed, i, opts, identity_weight) for i in range(samples)], jobs)
    res = ExperimentResult("weighted", {"d": d, "samples": samples, "seed": seed, "identity_weight": identity_weight})
    res.solver_options = asdict(opts or sdp.SdpOptions())
    recs = [o for o in outs if isinstance(o, WeightedRecord)]
    res.failures = [o for o in outs if isinstance(o, Failure)]
    res.extra["weighted"] = recs
    if recs:
        res.extra["fraction_below_mm"] = sum(r.below_mm for r in recs) / len(recs)
        res.extra["max_ratio_mm"] = max(r.ratio_mm for r in recs)
    return res


# ---------------------------------------------------------------------------
# Gill-Massar versus Nagaoka-Hayashi


@dataclass(frozen=True)
class GmNhRecord:
    index: int
    seed: int
    n: int
    purity: float
    hcrb: float
    nhcrb: float
    gmcrb: float
    gmcrb_two_copy: float
    nhcrb_two_copy: float | None = None


def _gm_task(arg: tuple[int, int, int, str, int | None, sdp.SdpOptions | None, bool]):
    d, master, index, mode, n, opts, two_copy_nh = arg
    seed = sample_seed(master, index)
    rng = np.random.default_rng(seed)
    try:
        rho, _ = draw_state("ginibre", d, rng)
        m = model_for_state(rho, n or d * d - 1, mode, rng)
        nh = bounds.nhcrb(m, opts).value
        h = bounds.hcrb(m, opts).value
        gm1 = bounds.gmcrb(m).value
        gm2 = bounds.gmcrb(m, copies=2).value
        nh2 = bounds.nhcrb(tensor_copies(m, 2), opts).value if two_copy_nh else None
    except QcrbError as exc:
        return Failure(index, seed, f"{type(exc).__name__}: {exc}")
    return GmNhRecord(index, seed, m.n_params, purity(m), h, nh, gm1, gm2, nh2)


def gm_vs_nh_experiment(
    d: int = 3,
    samples: int = 100,
    seed: int = 0,
    subset_n: int | None = None,
    two_copy_nhcrb: bool = False,
    opts: sdp.SdpOptions | None = None,
    jobs: int = 1,
) -> ExperimentResult:
    """Compare the Gill-Massar and Nagaoka-Hayashi bounds on random models.

    ``subset_n`` switches from the full model to random ``n``-subsets of the
    GMMs.  The two-copy NHCRB is an SDP on ``d^2`` dimensions and is only
    offered for ``d <= 3``.
    """
    if two_copy_nhcrb and d > 3:
        raise UnsupportedDimensionError("two-copy NHCRB is restricted to d <= 3")
    mode = "gmm-subset" if subset_n else "gmm-full"
    outs = _run_indexed(_gm_task, [(d, seed, i, mode, subset_n, opts, two_copy_nhcrb) for i in range(samples)], jobs)
    res = ExperimentResult("gm-vs-nh", {"d": d, "samples": samples, "seed": seed, "subset_n": subset_n, "two_copy_nhcrb": two_copy_nhcrb})
    res.solver_options = asdict(opts or sdp.SdpOptions())
    recs = [o for o in outs if isinstance(o, GmNhRecord)]
    res.failures = [o for o in outs if isinstance(o, Failure)]
    res.extra["gm_nh"] = recs
    if recs:
        diff = np.array([r.nhcrb - r.gmcrb for r in recs])
        res.extra["max_abs_nh_minus_gm"] = float(np.max(np.abs(diff)))
        res.extra["min_nh_minus_gm"] = float(diff.min())
        res.extra["max_two_copy_ratio_error"] = float(max(abs(r.gmcrb_two_copy / r.gmcrb - 0.5) for r in recs))
    return res
