"""Paired-device experiments: mirrored challenges, repeats, and artifacts.

A pair experiment fabricates a chip, carves two related devices from it,
drives both with the same mirrored challenge sequence (same challenge, same
measurement index on each device), and then repeats a single challenge many
times on each device.  Mirrored pairs give inter-device distances and
uniqueness; repeats give intra-device noise floors; the large preset also
sweeps the looseness parameter.

Artifacts are deterministic: rerunning with the same config reproduces
byte-identical CSV/JSON files, recorded in a digest manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .fabrication import (
    Challenge,
    NoiseConfig,
    NoiseStream,
    fabricate_chip,
    measure,
    preset_by_name,
    shared_mzi_count,
)
from .metrics import (
    DEFAULT_BIN_FRACTION,
    DistanceStats,
    LoosenessSweep,
    distance_stats,
    euclidean_distance,
    loose_hamming_distance,
    looseness_sweep,
    quantize,
)

CONFIG_FORMAT = "mzipuf-experiment-config/1"
SUMMARY_FORMAT = "mzipuf-experiment-summary/1"
MANIFEST_FORMAT = "mzipuf-manifest/1"


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of a pair experiment; everything downstream derives from these.

    chip_seeds has one entry normally; a second entry fabricates device B
    from a different chip to model a cloning attempt.  seed drives the
    challenge draw and both devices' noise streams through namespaced
    substreams.
    """

    preset: str = "small-pair"
    chip_seeds: tuple[int, ...] = (1234,)
    challenge_count: int = 2000
    repeat_count: int = 500
    seed: int = 99
    noise: NoiseConfig = NoiseConfig()
    bin_fraction: float = DEFAULT_BIN_FRACTION
    looseness_max: int = 10
    headline_looseness: int = 2
    clone_devices: bool = False
    output_dir: str | None = None

    def __post_init__(self):
        if self.challenge_count < 1 or self.repeat_count < 2:
            raise ValueError("need challenge_count >= 1 and repeat_count >= 2")
        if len(self.chip_seeds) not in (1, 2):
            raise ValueError("chip_seeds takes one chip seed or (device A, adversary)")
        if self.looseness_max < self.headline_looseness:
            raise ValueError("looseness_max must cover headline_looseness")

    def as_dict(self) -> dict:
        return {
            "format": CONFIG_FORMAT,
            "preset": self.preset,
            "chip_seeds": list(self.chip_seeds),
            "challenge_count": self.challenge_count,
            "repeat_count": self.repeat_count,
            "seed": self.seed,
            "noise": {
                "enabled": self.noise.enabled,
                "detector_sigma": self.noise.detector_sigma,
                "coupling_jitter_sigma": self.noise.coupling_jitter_sigma,
                "coupling_drift_step": self.noise.coupling_drift_step,
                "coupling_drift_bound": self.noise.coupling_drift_bound,
                "samples_per_response": self.noise.samples_per_response,
            },
            "bin_fraction": self.bin_fraction,
            "looseness_max": self.looseness_max,
            "headline_looseness": self.headline_looseness,
            "clone_devices": self.clone_devices,
        }


def config_from_dict(payload: dict) -> ExperimentConfig:
    """Rebuild a config from its as_dict form (CLI --config files)."""
    noise = payload.get("noise", {})
    return ExperimentConfig(
        preset=payload["preset"],
        chip_seeds=tuple(payload.get("chip_seeds", (1234,))),
        challenge_count=int(payload.get("challenge_count", 2000)),
        repeat_count=int(payload.get("repeat_count", 500)),
        seed=int(payload.get("seed", 99)),
        noise=NoiseConfig(
            enabled=bool(noise.get("enabled", True)),
            detector_sigma=float(noise.get("detector_sigma", 1e-5)),
            coupling_jitter_sigma=float(noise.get("coupling_jitter_sigma", 0.14)),
            coupling_drift_step=float(noise.get("coupling_drift_step", 0.005)),
            coupling_drift_bound=float(noise.get("coupling_drift_bound", 0.05)),
            samples_per_response=int(noise.get("samples_per_response", 1000)),
        ),
        bin_fraction=float(payload.get("bin_fraction", DEFAULT_BIN_FRACTION)),
        looseness_max=int(payload.get("looseness_max", 10)),
        headline_looseness=int(payload.get("headline_looseness", 2)),
        clone_devices=bool(payload.get("clone_devices", False)),
    )


def small_pair_config(**overrides) -> ExperimentConfig:
    """Desk-scale defaults for the disjoint 10-MZI pair."""
    return replace(ExperimentConfig(preset="small-pair"), **overrides)


def large_pair_config(**overrides) -> ExperimentConfig:
    """Desk-scale defaults for the 66-MZI pair sharing 45 sites."""
    base = ExperimentConfig(preset="large-pair", challenge_count=1000)
    return replace(base, **overrides)


@dataclass
class ExperimentReport:
    """Everything a pair run produced, including raw per-pair distances."""

    config: ExperimentConfig
    device_digests: tuple[str, str] = ("", "")
    shared_mzis: int = 0
    collision_count: int = 0
    uniqueness_by_looseness: dict = field(default_factory=dict)
    inter_lhd: DistanceStats | None = None
    inter_l2: DistanceStats | None = None
    intra_lhd: DistanceStats | None = None
    intra_l2: DistanceStats | None = None
    separation_sigma: float | None = None
    sweep: LoosenessSweep | None = None
    sweep_separations: tuple = ()
    optimal_looseness: int | None = None
    challenge_set_digest: str = ""
    # raw rows backing the CSV artifacts
    inter_rows: tuple = ()  # (index, challenge_digest, lhd, l2)
    intra_rows: tuple = ()  # (device, repeat_index, lhd, l2)


def _sweep_separations(sweep: LoosenessSweep):
    """Mean gap over repeated-population sigma, per looseness value.

    Reported only: once the repeated distribution collapses to zero spread
    the ratio is unbounded, recorded as None and treated as larger than any
    finite value when locating the optimum.
    """
    separations = []
    for rep, rand in zip(sweep.repeated, sweep.random):
        gap = rand.mean - rep.mean
        if rep.std_dev > 0.0:
            separations.append(gap / rep.std_dev)
        else:
            separations.append(None if gap > 0.0 else 0.0)
    return tuple(separations)


def _optimal_looseness(sweep: LoosenessSweep, separations) -> int:
    def rank(value):
        return np.inf if value is None else value

    best = max(separations, key=rank)
    for level, value in zip(sweep.looseness_values, separations):
        if rank(value) == rank(best):
            return level
    return sweep.looseness_values[0]


def run_pair_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run a mirrored pair experiment and aggregate every headline metric."""
    preset = preset_by_name(config.preset)
    chip_a = fabricate_chip(config.chip_seeds[0], preset.chip_spec())
    device_a, device_b = preset.carve_pair(chip_a)
    if config.clone_devices:
        # degenerate control case: device B is the same carving as device A
        device_b = device_a
    elif len(config.chip_seeds) == 2:
        chip_b = fabricate_chip(config.chip_seeds[1], preset.chip_spec())
        device_b = preset.carve_pair(chip_b)[1]

    modes = device_a.layout.mode_count
    stream_a = stream_b = None
    if config.noise.enabled:
        stream_a = NoiseStream((config.seed, 1), modes, config.noise)
        stream_b = NoiseStream((config.seed, 2), modes, config.noise)

    challenge_rng = np.random.default_rng((config.seed, 0))
    challenges = [
        Challenge.random(challenge_rng, device_a.layout.mzi_count)
        for _ in range(config.challenge_count)
    ]

    headline = config.headline_looseness
    mode_total = modes
    inter_rows = []
    mirrored_pairs = []
    collisions = 0
    uniqueness_sums = {level: 0.0 for level in range(1, config.looseness_max + 1)}
    for index, challenge in enumerate(challenges):
        qa = quantize(measure(device_a, challenge, stream_a, index), config.bin_fraction)
        qb = quantize(measure(device_b, challenge, stream_b, index), config.bin_fraction)
        mirrored_pairs.append((qa, qb))
        if qa.bins == qb.bins:
            collisions += 1
        diff = np.abs(np.asarray(qa.bins) - np.asarray(qb.bins))
        for level in uniqueness_sums:
            uniqueness_sums[level] += int(np.count_nonzero(diff >= level)) / mode_total
        lhd = int(np.count_nonzero(diff >= headline))
        inter_rows.append((index, challenge.digest(), lhd, euclidean_distance(qa, qb)))

    uniqueness_by_l = {
        level: total / config.challenge_count * 100.0
        for level, total in uniqueness_sums.items()
    }

    # repeat one challenge on both devices; the first repeat is the typical
    # response the others are compared against
    repeat_challenge = challenges[0]
    intra_rows = []
    repeated_pairs = []
    for label, device, stream in (("A", device_a, stream_a), ("B", device_b, stream_b)):
        reps = []
        for k in range(config.repeat_count):
            index = config.challenge_count + k
            reps.append(
                quantize(measure(device, repeat_challenge, stream, index), config.bin_fraction)
            )
        reference = reps[0]
        for k, rep in enumerate(reps[1:], start=1):
            repeated_pairs.append((reference, rep))
            intra_rows.append(
                (
                    label,
                    k,
                    loose_hamming_distance(reference, rep, headline),
                    euclidean_distance(reference, rep),
                )
            )

    inter_l2 = distance_stats([row[3] for row in inter_rows])
    inter_lhd = distance_stats([row[2] for row in inter_rows])
    intra_l2 = distance_stats([row[3] for row in intra_rows])
    intra_lhd = distance_stats([row[2] for row in intra_rows])
    pooled = float(np.sqrt((inter_l2.std_dev**2 + intra_l2.std_dev**2) / 2.0))
    separation = (inter_l2.mean - intra_l2.mean) / pooled if pooled > 0 else None

    report = ExperimentReport(
        config=config,
        device_digests=(device_a.descriptor_digest(), device_b.descriptor_digest()),
        shared_mzis=shared_mzi_count(device_a, device_b),
        collision_count=collisions,
        uniqueness_by_looseness=uniqueness_by_l,
        inter_lhd=inter_lhd,
        inter_l2=inter_l2,
        intra_lhd=intra_lhd,
        intra_l2=intra_l2,
        separation_sigma=separation,
        challenge_set_digest=_digest_of_digests(row[1] for row in inter_rows),
        inter_rows=tuple(inter_rows),
        intra_rows=tuple(intra_rows),
    )

    if config.preset == "large-pair":
        sweep = looseness_sweep(repeated_pairs, mirrored_pairs, config.looseness_max)
        separations = _sweep_separations(sweep)
        report.sweep = sweep
        report.sweep_separations = separations
        report.optimal_looseness = _optimal_looseness(sweep, separations)

    if config.output_dir is not None:
        emit_artifacts(report, config.output_dir)
    return report


def run_small_pair(config: ExperimentConfig | None = None, **overrides) -> ExperimentReport:
    return run_pair_experiment(config if config is not None else small_pair_config(**overrides))


def run_large_pair(config: ExperimentConfig | None = None, **overrides) -> ExperimentReport:
    return run_pair_experiment(config if config is not None else large_pair_config(**overrides))


def _digest_of_digests(digests) -> str:
    rolled = hashlib.sha256()
    for digest in digests:
        rolled.update(digest.encode())
    return rolled.hexdigest()


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _summary_payload(report: ExperimentReport) -> dict:
    def stats_or_none(stats):
        return stats.as_dict() if stats is not None else None

    payload = {
        "format": SUMMARY_FORMAT,
        "preset": report.config.preset,
        "config": report.config.as_dict(),
        "device_digests": list(report.device_digests),
        "shared_mzis": report.shared_mzis,
        "collision_count": report.collision_count,
        "uniqueness_by_looseness": {
            str(level): value for level, value in report.uniqueness_by_looseness.items()
        },
        "inter_lhd": stats_or_none(report.inter_lhd),
        "inter_l2": stats_or_none(report.inter_l2),
        "intra_lhd": stats_or_none(report.intra_lhd),
        "intra_l2": stats_or_none(report.intra_l2),
        "separation_sigma": report.separation_sigma,
        "optimal_looseness": report.optimal_looseness,
        "challenge_set_digest": report.challenge_set_digest,
    }
    if report.sweep is not None:
        payload["looseness_sweep"] = {
            "looseness": list(report.sweep.looseness_values),
            "repeated": [s.as_dict() for s in report.sweep.repeated],
            "random": [s.as_dict() for s in report.sweep.random],
            "separation": list(report.sweep_separations),
        }
    else:
        payload["looseness_sweep"] = None
    return payload


def emit_artifacts(report: ExperimentReport, output_dir) -> dict:
    """Write config, raw distances, histograms, summary, and a manifest.

    Returns the manifest mapping of file name to sha256.  All content is a
    pure function of the report, so reruns produce identical bytes.
    """
    os.makedirs(output_dir, exist_ok=True)
    written = []

    def emit_json(name, payload):
        with open(os.path.join(output_dir, name), "w") as handle:
            json.dump(payload, handle, sort_keys=True, indent=2)
            handle.write("\n")
        written.append(name)

    def emit_csv(name, header, rows):
        _write_csv(os.path.join(output_dir, name), header, rows)
        written.append(name)

    emit_json("experiment_config.json", report.config.as_dict())
    emit_csv(
        "inter_distances.csv",
        ["challenge_index", "challenge_digest", "lhd", "l2"],
        [(i, d, lhd, repr(l2)) for i, d, lhd, l2 in report.inter_rows],
    )
    emit_csv(
        "intra_distances.csv",
        ["device", "repeat_index", "lhd", "l2"],
        [(dev, k, lhd, repr(l2)) for dev, k, lhd, l2 in report.intra_rows],
    )
    for name, stats in (
        ("hist_inter_lhd.csv", report.inter_lhd),
        ("hist_inter_l2.csv", report.inter_l2),
        ("hist_intra_lhd.csv", report.intra_lhd),
        ("hist_intra_l2.csv", report.intra_l2),
    ):
        rows = (
            [(repr(lo), repr(hi), count) for lo, hi, count in stats.histogram]
            if stats is not None
            else []
        )
        emit_csv(name, ["bin_low", "bin_high", "count"], rows)
    if report.sweep is not None:
        emit_csv(
            "looseness_sweep.csv",
            ["looseness", "repeated_mean", "repeated_std", "random_mean",
             "random_std", "separation"],
            [
                (
                    level,
                    repr(rep.mean),
                    repr(rep.std_dev),
                    repr(rand.mean),
                    repr(rand.std_dev),
                    "" if sep is None else repr(sep),
                )
                for level, rep, rand, sep in zip(
                    report.sweep.looseness_values,
                    report.sweep.repeated,
                    report.sweep.random,
                    report.sweep_separations,
                )
            ],
        )
    emit_json("summary.json", _summary_payload(report))

    manifest = {}
    for name in sorted(written):
        with open(os.path.join(output_dir, name), "rb") as handle:
            manifest[name] = hashlib.sha256(handle.read()).hexdigest()
    emit_json("manifest.json", {"format": MANIFEST_FORMAT, "files": manifest})
    return manifest
