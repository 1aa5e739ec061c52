"""Monte Carlo experiments: configuration, per-run simulation, aggregation, CSV."""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import vi, viterbi
from .bem import make_basis
from .fading import HopChannelSpec
from .initial import initialize
from .ofdm import assemble, bit_error_rate, build_pilot_pattern, random_data
from .relay import RelaySystem, propagate

SPEED_OF_LIGHT = 299_792_458.0
CSV_HEADER = ("snr_db", "iteration", "mse_mean", "ber_mean", "active_bases_mean", "runs")

DUALHOP_LINKS = [
    [{"pool": [0, 1, 2], "n_taps": 2, "max_norm_doppler": 0.05},
     {"pool": [0, 1, 2], "n_taps": 2, "max_norm_doppler": 0.15}],
    [{"pool": [0, 1, 2, 3, 4], "n_taps": 2, "max_norm_doppler": 0.05},
     {"pool": [0, 1, 2, 3], "n_taps": 2, "max_norm_doppler": 0.15}],
]
THREEHOP_LINKS = [
    [{"pool": list(range(n)), "n_taps": n, "max_norm_doppler": f}
     for n, f in zip(taps, (0.05, 0.15, 0.05))]
    for taps in ((2, 3, 2), (3, 2, 2))
]
PRESETS = {
    "dualhop": {"links": DUALHOP_LINKS, "kappa": 3},
    "threehop": {"links": THREEHOP_LINKS, "kappa": 4},
}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a batch of runs.

    ``links[k][rho]`` describes hop rho of link k with keys ``pool``,
    ``n_taps`` and ``max_norm_doppler``.  The receiver's Doppler bound per hop
    comes from ``v_max`` (m/s) when given, otherwise from the largest
    configured hop Doppler.  ``workers=None`` uses every available CPU.
    """

    links: list = field(default_factory=lambda: [list(map(dict, l)) for l in DUALHOP_LINKS])
    n_subcarriers: int = 128
    cp_len: int = 8
    n_clusters: int = 14
    pilot_power_ratio: float = 3.0
    v: int = 20
    kappa: int = 3
    carrier_freq: float = 2e9
    sample_interval: float = 2e-6
    v_max: float = None
    snr_db: list = field(default_factory=lambda: [10.0, 20.0, 30.0])
    n_runs: int = 100
    n_iters: int = 10
    seed: int = 0
    prune_threshold: float = 1e-10
    workers: int = None
    output: str = "results.csv"

    def __post_init__(self):
        self.validate()

    @classmethod
    def preset(cls, name, **overrides):
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        base = {"links": [list(map(dict, l)) for l in PRESETS[name]["links"]],
                "kappa": PRESETS[name]["kappa"]}
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)} | {"preset"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        name = data.pop("preset", None)
        return cls.preset(name, **data) if name else cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)

    def hop_specs(self):
        return [[HopChannelSpec.from_pool(h["pool"], h["n_taps"], h["max_norm_doppler"])
                 for h in link] for link in self.links]

    @property
    def n_hops(self):
        return len(self.links[0])

    def doppler_bound_norm(self):
        """Receiver-side bound N f_U T_s on the composite Doppler."""
        if self.v_max is not None:
            per_hop = (self.v_max * self.carrier_freq / SPEED_OF_LIGHT
                       * self.n_subcarriers * self.sample_interval)
        else:
            per_hop = max(h["max_norm_doppler"] for link in self.links for h in link)
        return self.n_hops * per_hop

    def validate(self):
        if not self.links or any(len(l) != len(self.links[0]) for l in self.links):
            raise ValueError("links must be a non-empty list of equal-length hop lists")
        if self.n_hops < 2:
            raise ValueError("each link needs at least two hops")
        for link in self.links:
            for h in link:
                if set(h) != {"pool", "n_taps", "max_norm_doppler"}:
                    raise ValueError(f"hop entries need pool, n_taps, max_norm_doppler: {h}")
        specs = self.hop_specs()
        longest = max(sum(s.max_delay for s in l) - (len(l) - 1) for l in specs)
        if longest > self.cp_len:
            raise ValueError(f"composite channel length {longest} exceeds cp_len {self.cp_len}")
        if self.n_runs < 1 or self.n_iters < 0 or not self.snr_db:
            raise ValueError("need n_runs >= 1, n_iters >= 0 and at least one SNR")
        if 3 * self.n_clusters > self.n_subcarriers:
            raise ValueError("pilot clusters do not fit in the band")
        if not 1 <= self.kappa < self.n_subcarriers // 2:
            raise ValueError("kappa out of range")
        if self.v < 1 or (self.workers is not None and self.workers < 1):
            raise ValueError("v and workers must be >= 1")


@dataclass(frozen=True)
class MetricsRecord:
    snr_db: float
    iteration: int
    mse_mean: float
    ber_mean: float
    active_bases_mean: float
    runs: int


@dataclass(frozen=True)
class RunResult:
    mse: np.ndarray
    ber: np.ndarray
    active: np.ndarray
    ber_perfect_csi: float


@dataclass
class ExperimentResult:
    records: list
    runs: dict
    perfect_csi_ber: dict

    def series(self, snr_db, name):
        """Per-iteration mean of ``name`` ('mse', 'ber' or 'active') at one SNR."""
        attr = {"mse": "mse_mean", "ber": "ber_mean", "active": "active_bases_mean"}[name]
        rows = sorted((r for r in self.records if r.snr_db == snr_db), key=lambda r: r.iteration)
        return np.array([getattr(r, attr) for r in rows])


def perfect_csi_detect(y, truth, frame, pilots, kappa):
    """Viterbi detection on the banded true channel (no posterior spread)."""
    banded = viterbi.from_dense(truth.freq_matrix(), kappa)
    return viterbi.detect(y, banded, frame, pilots)


def run_seed(seed, run_index):
    """Seed for one run index, shared by every SNR point.

    Sharing the draws (channel, pilots, data and unit-power noise) across SNR
    makes the SNR comparison paired, which removes most of its sampling noise.
    """
    return np.random.SeedSequence(seed, spawn_key=(run_index,))


@dataclass(frozen=True)
class Instance:
    """One drawn trial: observation, bases, starting point and ground truth."""

    obs: vi.Observation
    coarse: object
    fine: object
    init: object
    truth: object
    x_d: np.ndarray


def draw_instance(config, snr_db, seed_seq):
    """Draw a relay system, frame and data, propagate and initialize."""
    rng = np.random.default_rng(seed_seq)
    noise_power = 10.0 ** (-snr_db / 10.0)
    system = RelaySystem.draw(config.hop_specs(), noise_power, config.n_subcarriers,
                              config.cp_len, config.sample_interval, rng)
    frame, pilots = build_pilot_pattern(
        config.n_subcarriers, config.n_clusters, rng.integers(2**63),
        config.pilot_power_ratio, config.cp_len, zero_edge_count=config.kappa)
    x_d = random_data(frame, rng)
    y, truth, _ = propagate(assemble(frame, x_d, pilots), system, rng)

    f_u = config.doppler_bound_norm()
    coarse = make_basis(config.n_subcarriers, 1, f_u, config.cp_len)
    fine = make_basis(config.n_subcarriers, config.v, f_u, config.cp_len)
    init = initialize(y, frame, pilots, coarse)
    return Instance(vi.Observation(y, frame, pilots), coarse, fine, init, truth, x_d)


def simulate_run(config, snr_db, seed_seq):
    """One Monte Carlo trial: draw, propagate, initialize, iterate, score."""
    inst = draw_instance(config, snr_db, seed_seq)
    obs = inst.obs
    _, history = vi.run(obs, inst.fine, inst.init, config.n_iters, config.kappa,
                        truth=vi.Truth(inst.truth.taps, inst.x_d),
                        prune_threshold=config.prune_threshold)
    x_ideal = perfect_csi_detect(obs.y, inst.truth, obs.frame, obs.pilots, config.kappa)
    return RunResult(
        mse=np.array([h.mse for h in history]),
        ber=np.array([h.ber for h in history]),
        active=np.array([h.n_active for h in history], dtype=float),
        ber_perfect_csi=bit_error_rate(x_ideal, inst.x_d, obs.frame),
    )


def _job(args):
    config, snr_db, seed_seq = args
    return simulate_run(config, snr_db, seed_seq)


def run_experiment(config, progress=None):
    """Run every (SNR, run) pair and average per iteration.

    Each run draws from its own seed sequence keyed by the run index, so
    results do not depend on worker count or scheduling.
    """
    config.validate()
    jobs = [(config, snr, run_seed(config.seed, r))
            for snr in config.snr_db for r in range(config.n_runs)]
    workers = config.workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=1))
    else:
        results = []
        for job in jobs:
            results.append(_job(job))
            if progress:
                progress(len(results), len(jobs))

    records, runs, ideal = [], {}, {}
    for i, snr in enumerate(config.snr_db):
        batch = results[i * config.n_runs:(i + 1) * config.n_runs]
        runs[snr] = batch
        mse = np.mean([r.mse for r in batch], axis=0)
        ber = np.mean([r.ber for r in batch], axis=0)
        active = np.mean([r.active for r in batch], axis=0)
        ideal[snr] = float(np.mean([r.ber_perfect_csi for r in batch]))
        for it in range(config.n_iters + 1):
            records.append(MetricsRecord(float(snr), it, float(mse[it]), float(ber[it]),
                                         float(active[it]), len(batch)))
    return ExperimentResult(records, runs, ideal)


def _fmt(value):
    return f"{value:.9g}"


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([_fmt(r.snr_db), r.iteration, _fmt(r.mse_mean), _fmt(r.ber_mean),
                             _fmt(r.active_bases_mean), r.runs])


def write_reference_csv(result, path):
    """Perfect-CSI BER per SNR, the lower reference for the detector."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("snr_db", "ber_perfect_csi", "runs"))
        for snr, ber in result.perfect_csi_ber.items():
            writer.writerow([_fmt(snr), _fmt(ber), len(result.runs[snr])])


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [MetricsRecord(float(r["snr_db"]), int(r["iteration"]), float(r["mse_mean"]),
                              float(r["ber_mean"]), float(r["active_bases_mean"]), int(r["runs"]))
                for r in reader]
