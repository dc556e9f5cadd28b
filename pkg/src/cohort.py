# src/cohort.py
# RCT data: patient records, the synthetic cohort generator, CSV ingestion,
# the primary outcome and the recruitment sources a trial draws subjects from.
import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

import config
from src.errors import ConfigError, DatasetParseError, DomainError, RecruitmentError

CONTROL = "control"
TREATMENT = "treatment"
ARMS = (CONTROL, TREATMENT)


@dataclass(frozen=True)
class PatientRecord:
    subject_id: str
    arm: str
    trajectory: tuple

    def __post_init__(self):
        if self.arm not in ARMS:
            raise ConfigError(f"unknown arm label {self.arm!r}")


@dataclass(frozen=True)
class RctDataset:
    visits: int
    baseline_index: int
    endpoint_index: int
    control: tuple = ()
    treatment: tuple = ()

    def __post_init__(self):
        if self.visits < 2:
            raise ConfigError(f"a dataset needs at least 2 visits, got {self.visits}")
        if not 0 <= self.baseline_index < self.endpoint_index < self.visits:
            raise ConfigError(
                f"need 0 <= baseline_index < endpoint_index < visits, got "
                f"{self.baseline_index}, {self.endpoint_index}, {self.visits}")
        for arm_name, records in ((CONTROL, self.control), (TREATMENT, self.treatment)):
            for record in records:
                if record.arm != arm_name:
                    raise ConfigError(f"subject {record.subject_id} labelled {record.arm} stored in {arm_name} arm")
                if len(record.trajectory) != self.visits:
                    raise ConfigError(
                        f"subject {record.subject_id} has {len(record.trajectory)} visits, expected {self.visits}")

    @property
    def arm_size(self):
        return min(len(self.control), len(self.treatment))

    def matrix(self, arm):
        records = self.control if arm == CONTROL else self.treatment
        if not records:
            return np.empty((0, self.visits))
        return np.array([r.trajectory for r in records], dtype=float)

    def outcome(self):
        return ChangeScore(self.baseline_index, self.endpoint_index)

    def extend(self, control_new, treatment_new):
        """The concatenate step: prior subjects first, new ones appended."""
        return RctDataset(
            visits=self.visits,
            baseline_index=self.baseline_index,
            endpoint_index=self.endpoint_index,
            control=self.control + tuple(control_new),
            treatment=self.treatment + tuple(treatment_new),
        )


class ChangeScore:
    """Endpoint visit minus baseline visit, for one trajectory or a
    (subjects x visits) matrix."""

    def __init__(self, baseline_index, endpoint_index):
        self.baseline_index = baseline_index
        self.endpoint_index = endpoint_index

    def __call__(self, trajectories):
        arr = np.asarray(trajectories, dtype=float)
        return arr[..., self.endpoint_index] - arr[..., self.baseline_index]


def outcome_change_score(trajectory, baseline_index, endpoint_index):
    n = len(trajectory)
    for index in (baseline_index, endpoint_index):
        if not -n <= index < n:
            raise DomainError(f"visit index {index} outside a trajectory of length {n}")
    return float(trajectory[endpoint_index]) - float(trajectory[baseline_index])


def as_matrix(rows):
    """Accept a trajectory matrix or a sequence of PatientRecords."""
    if isinstance(rows, np.ndarray):
        return np.atleast_2d(rows).astype(float, copy=False)
    rows = list(rows)
    if rows and isinstance(rows[0], PatientRecord):
        return np.array([r.trajectory for r in rows], dtype=float)
    return np.atleast_2d(np.asarray(rows, dtype=float))


# --- Synthetic generator ---

@dataclass(frozen=True)
class CohortGenConfig:
    visits: int = config.VISITS
    baseline_mean: float = config.BASELINE_MEAN
    baseline_sd: float = config.BASELINE_SD
    control_drift: float = config.CONTROL_DRIFT
    treatment_effect_mean: float = config.TREATMENT_EFFECT_MEAN
    treatment_effect_sd: float = config.TREATMENT_EFFECT_SD
    noise_sd: float = config.NOISE_SD
    latent_factor_count: int = config.LATENT_FACTOR_COUNT
    latent_loading_sd: float = config.LATENT_LOADING_SD
    baseline_index: int = config.BASELINE_INDEX
    endpoint_index: int = config.ENDPOINT_INDEX

    def __post_init__(self):
        if self.visits < 2:
            raise ConfigError(f"visits must be >= 2, got {self.visits}")
        if self.latent_factor_count < 1:
            raise ConfigError(f"latent_factor_count must be >= 1, got {self.latent_factor_count}")
        for name in ("baseline_sd", "treatment_effect_sd", "noise_sd", "latent_loading_sd"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0 <= self.baseline_index < self.endpoint_index < self.visits:
            raise ConfigError("need 0 <= baseline_index < endpoint_index < visits")

    def factor_curves(self):
        # (factors x visits); loadings are drawn per subject, curves are shared
        v = np.arange(self.visits)
        k = np.arange(1, self.latent_factor_count + 1)[:, None]
        return np.cos(np.pi * k * v / (self.visits - 1))

    def effect_ramp(self):
        v = np.arange(self.visits, dtype=float)
        span = self.endpoint_index - self.baseline_index
        return np.clip((v - self.baseline_index) / span, 0.0, 1.0)

    def control_outcome_variance(self):
        curves = self.factor_curves()
        diff = curves[:, self.endpoint_index] - curves[:, self.baseline_index]
        return float(self.latent_loading_sd ** 2 * np.sum(diff ** 2) + 2 * self.noise_sd ** 2)

    def with_standardized_effect(self, effect_size):
        """Copy whose mean effect is effect_size control-outcome SDs."""
        tau = effect_size * math.sqrt(self.control_outcome_variance())
        return _replace(self, treatment_effect_mean=tau)

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def _replace(cfg, **changes):
    values = cfg.to_dict()
    values.update(changes)
    return CohortGenConfig(**values)


def generate_trajectories(gen, n, rng, treated):
    curves = gen.factor_curves()
    v = np.arange(gen.visits)
    base = rng.normal(gen.baseline_mean, gen.baseline_sd, size=(n, 1))
    loadings = rng.normal(0.0, gen.latent_loading_sd, size=(n, gen.latent_factor_count))
    noise = rng.normal(0.0, gen.noise_sd, size=(n, gen.visits))
    traj = base + gen.control_drift * v + loadings @ curves + noise
    if treated:
        tau = rng.normal(gen.treatment_effect_mean, gen.treatment_effect_sd, size=(n, 1))
        traj = traj + tau * gen.effect_ramp()
    return traj


def _records(matrix, arm, start):
    prefix = "C" if arm == CONTROL else "T"
    return tuple(
        PatientRecord(subject_id=f"{prefix}{start + i:05d}", arm=arm, trajectory=tuple(float(x) for x in row))
        for i, row in enumerate(matrix)
    )


def generate_cohort(gen, n_control, n_treatment, rng):
    if n_control < 1 or n_treatment < 1:
        raise ConfigError("generate_cohort needs at least one subject per arm")
    ctrl = generate_trajectories(gen, n_control, rng, treated=False)
    treat = generate_trajectories(gen, n_treatment, rng, treated=True)
    return RctDataset(
        visits=gen.visits,
        baseline_index=gen.baseline_index,
        endpoint_index=gen.endpoint_index,
        control=_records(ctrl, CONTROL, 0),
        treatment=_records(treat, TREATMENT, 0),
    )


# --- CSV ingestion ---

def _parse_header(header):
    if len(header) < 4 or header[0] != "subject_id" or header[1] != "arm":
        raise DatasetParseError("header must start with subject_id,arm followed by v0..v{V-1}", line=1)
    visit_cols = header[2:]
    expected = [f"v{i}" for i in range(len(visit_cols))]
    if visit_cols != expected:
        raise DatasetParseError(f"visit columns must be {','.join(expected)}", line=1)
    return len(visit_cols)


def load_dataset(source, metadata):
    """Parse the cohort CSV. `source` is a byte or text stream, `metadata`
    the sidecar mapping with baseline_index and endpoint_index."""
    raw = source.read()
    try:
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    except UnicodeDecodeError as exc:
        raise DatasetParseError(f"dataset is not valid UTF-8 (byte {exc.start})") from None
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetParseError("empty dataset file", line=1) from None
    visits = _parse_header([h.strip() for h in header])
    arms = {CONTROL: [], TREATMENT: []}
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != visits + 2:
            raise DatasetParseError(f"expected {visits + 2} cells, got {len(row)}", line=line)
        subject_id, arm = row[0].strip(), row[1].strip()
        if arm not in ARMS:
            raise DatasetParseError(f"unknown arm label {arm!r}", line=line)
        try:
            values = tuple(float(cell) for cell in row[2:])
        except ValueError:
            raise DatasetParseError("non-numeric visit value", line=line) from None
        if any(math.isnan(x) for x in values):
            raise DatasetParseError("missing visit value", line=line)
        arms[arm].append(PatientRecord(subject_id=subject_id, arm=arm, trajectory=values))
    try:
        baseline_index = int(metadata["baseline_index"])
        endpoint_index = int(metadata["endpoint_index"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetParseError(f"metadata sidecar must declare baseline_index and endpoint_index ({exc})") from None
    try:
        return RctDataset(visits=visits, baseline_index=baseline_index, endpoint_index=endpoint_index,
                          control=tuple(arms[CONTROL]), treatment=tuple(arms[TREATMENT]))
    except ConfigError as exc:
        raise DatasetParseError(str(exc)) from None


def write_dataset(dataset, sink):
    """Write the CSV body; the sidecar comes from dataset_metadata()."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["subject_id", "arm"] + [f"v{i}" for i in range(dataset.visits)])
    for record in dataset.control + dataset.treatment:
        writer.writerow([record.subject_id, record.arm] + [repr(x) for x in record.trajectory])


def dataset_metadata(dataset):
    return {"baseline_index": dataset.baseline_index, "endpoint_index": dataset.endpoint_index,
            "visits": dataset.visits}


def read_dataset_files(csv_path, metadata_path=None):
    metadata_path = metadata_path or f"{csv_path}.json"
    with open(metadata_path, encoding="utf-8") as fh:
        try:
            metadata = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetParseError(f"{metadata_path}: metadata is not valid JSON ({exc})") from None
    with open(csv_path, "rb") as fh:
        return load_dataset(fh, metadata)


# --- Recruitment sources ---

class SubjectSource:
    """Where a trial recruits from. Draws are memoised in fixed-size blocks
    so the k-th subject of an arm depends only on the source stream, never on
    how a design chunked its recruitment."""

    def __init__(self, rng, block_size=config.DRAW_BLOCK_SIZE):
        self.rng = rng
        # per-arm child streams; an arm's draws never depend on the other arm's
        self.arm_rng = dict(zip(ARMS, rng.spawn(2)))
        self.block_size = block_size
        self._drawn = {CONTROL: [], TREATMENT: []}
        self._used = {CONTROL: 0, TREATMENT: 0}

    @property
    def visits(self):
        raise NotImplementedError

    @property
    def baseline_index(self):
        raise NotImplementedError

    @property
    def endpoint_index(self):
        raise NotImplementedError

    def _draw_block(self, arm):
        raise NotImplementedError

    def _take(self, arm, n):
        drawn = self._drawn[arm]
        while len(drawn) < self._used[arm] + n:
            drawn.extend(self._draw_block(arm))
        start = self._used[arm]
        self._used[arm] += n
        return tuple(drawn[start:start + n])

    def recruit(self, n_step):
        if n_step < 1:
            raise DomainError(f"recruit needs n_step >= 1, got {n_step}")
        return self._take(CONTROL, n_step), self._take(TREATMENT, n_step)

    def empty_dataset(self):
        return RctDataset(visits=self.visits, baseline_index=self.baseline_index,
                          endpoint_index=self.endpoint_index)


class GeneratorSource(SubjectSource):
    """Fresh synthetic subjects. Under H0 the treatment arm is generated
    without any treatment effect."""

    def __init__(self, gen, rng, hypothesis="H1", block_size=config.DRAW_BLOCK_SIZE):
        super().__init__(rng, block_size)
        self.gen = gen
        self.hypothesis = hypothesis
        self._counter = {CONTROL: 0, TREATMENT: 0}

    visits = property(lambda self: self.gen.visits)
    baseline_index = property(lambda self: self.gen.baseline_index)
    endpoint_index = property(lambda self: self.gen.endpoint_index)

    def _draw_block(self, arm):
        treated = arm == TREATMENT and self.hypothesis == "H1"
        matrix = generate_trajectories(self.gen, self.block_size, self.arm_rng[arm], treated=treated)
        records = _records(matrix, arm, self._counter[arm])
        self._counter[arm] += self.block_size
        return records


class PoolSource(SubjectSource):
    """Subjects resampled from an existing dataset. H1 resamples each arm
    from its own original arm, H0 resamples both arms from the control arm.
    With replace=False the pool is consumed and can run dry."""

    def __init__(self, dataset, rng, hypothesis="H1", replace=True, block_size=config.DRAW_BLOCK_SIZE):
        super().__init__(rng, block_size)
        if hypothesis not in ("H0", "H1"):
            raise ConfigError(f"hypothesis must be H0 or H1, got {hypothesis!r}")
        self.dataset = dataset
        self.hypothesis = hypothesis
        self.replace = replace
        pool_ctrl = dataset.control
        pool_treat = dataset.control if hypothesis == "H0" else dataset.treatment
        self._pools = {CONTROL: pool_ctrl, TREATMENT: pool_treat}
        if not replace:
            # one shuffle per arm; H0 splits a single shuffled control pool
            if hypothesis == "H0":
                order = list(rng.permutation(len(pool_ctrl)))
                half = len(order) // 2
                self._orders = {CONTROL: order[:half], TREATMENT: order[half:]}
            else:
                self._orders = {arm: list(rng.permutation(len(self._pools[arm]))) for arm in ARMS}

    visits = property(lambda self: self.dataset.visits)
    baseline_index = property(lambda self: self.dataset.baseline_index)
    endpoint_index = property(lambda self: self.dataset.endpoint_index)

    def _relabel(self, record, arm):
        if record.arm == arm:
            return record
        return PatientRecord(subject_id=record.subject_id, arm=arm, trajectory=record.trajectory)

    def _draw_block(self, arm):
        pool = self._pools[arm]
        if self.replace:
            if not pool:
                raise RecruitmentError(f"the {arm} pool is empty")
            idx = self.arm_rng[arm].integers(0, len(pool), size=self.block_size)
        else:
            order = self._orders[arm]
            if not order:
                raise RecruitmentError(f"the {arm} pool is exhausted")
            idx, self._orders[arm] = order[:self.block_size], order[self.block_size:]
        return [self._relabel(pool[i], arm) for i in idx]

    def _take(self, arm, n):
        try:
            return super()._take(arm, n)
        except RecruitmentError:
            raise RecruitmentError(
                f"cannot recruit {n} more {arm} subjects without replacement; pool exhausted") from None


def recruit(source, n_step):
    """Return n_step new subjects per arm from a SubjectSource."""
    return source.recruit(n_step)


def make_source(origin, rng, hypothesis="H1", replace=True):
    if isinstance(origin, RctDataset):
        return PoolSource(origin, rng, hypothesis=hypothesis, replace=replace)
    if isinstance(origin, CohortGenConfig):
        return GeneratorSource(origin, rng, hypothesis=hypothesis)
    raise ConfigError(f"cannot build a subject source from {type(origin).__name__}")
