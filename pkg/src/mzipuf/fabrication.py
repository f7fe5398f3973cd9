"""Fabrication randomness, device carving, and noisy measurement.

A chip is fabricated once: every MZI site receives a heater resistance
factor (about 15.43 % relative spread, which sets its 2-pi voltage), two
directional-coupler ratios near 0.5, and a static phase offset from
uncontrolled arm-length differences (the device is operated uncalibrated).
Electrically adjacent heaters additionally share weak ground-loop couplings
around the -45 dB scale, so the voltage seen by one phase shifter leaks a
little onto its neighbours.

Devices are carved from a chip by mapping mesh slots (column-major) onto
global MZI ids; two devices may intentionally share sites.  Measurement
models detector noise, fast per-mode coupling jitter, and a slow bounded
per-mode drift of the output coupling, averaged over many samples per
response.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import TWO_PI, CouplerPair, MeshLayout, MziSettings, build_mesh, propagate

V2PI_NOMINAL = 7.0
HEATER_SIGMA = 0.1543
COUPLER_SIGMA = 0.02
GROUND_LOOP_DB = -45.0
GROUND_LOOP_SCALE = 10.0 ** (GROUND_LOOP_DB / 20.0)

CHIP_FORMAT = "mzipuf-chip/1"
DEVICE_FORMAT = "mzipuf-device/1"


def chain_adjacency(mzi_count: int) -> tuple[tuple[int, int], ...]:
    """Nearest-neighbour electrical adjacency along the global id order."""
    return tuple((i, i + 1) for i in range(mzi_count - 1))


@dataclass(frozen=True)
class ChipLayoutSpec:
    """Global chip description: MZI sites, electrical adjacency, and the
    distributions fabrication draws from.

    adjacency is a tuple of unordered global-id pairs sharing a ground
    lead; None selects the default chain over consecutive ids.  Setting
    phase_offset_span to 0 models a perfectly calibrated chip whose arms
    carry no static phase.
    """

    mzi_count: int
    adjacency: tuple[tuple[int, int], ...] | None = None
    v2pi_nominal: float = V2PI_NOMINAL
    heater_sigma: float = HEATER_SIGMA
    coupler_sigma: float = COUPLER_SIGMA
    phase_offset_span: float = TWO_PI
    ground_loop_scale: float = GROUND_LOOP_SCALE

    def __post_init__(self):
        if self.mzi_count < 1:
            raise ValueError(f"mzi_count must be >= 1, got {self.mzi_count}")
        if self.adjacency is None:
            object.__setattr__(self, "adjacency", chain_adjacency(self.mzi_count))
        else:
            pairs = tuple((int(a), int(b)) for a, b in self.adjacency)
            for a, b in pairs:
                if a == b or not (0 <= a < self.mzi_count and 0 <= b < self.mzi_count):
                    raise ValueError(f"bad adjacency pair ({a}, {b})")
            object.__setattr__(self, "adjacency", pairs)


@dataclass(frozen=True)
class HeaterParams:
    """Per-site heater lottery: resistance factor, resulting V_2pi, and the
    static arm phase present at zero drive."""

    resistance_factor: float
    v2pi: float
    phase_offset: float


@dataclass(frozen=True)
class ChipFingerprint:
    """Complete fabrication outcome of one chip, reproducible from its seed."""

    seed: int
    spec: ChipLayoutSpec
    heaters: tuple[HeaterParams, ...]
    couplers: tuple[CouplerPair, ...]
    ground_loops: tuple[tuple[int, int, float], ...]

    def digest(self) -> str:
        payload = json.dumps(_chip_payload(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def fabricate_chip(seed: int, spec: ChipLayoutSpec) -> ChipFingerprint:
    """Sample one chip's fabrication lottery.

    Draw order is fixed (resistance factors, coupler ratios, phase offsets,
    ground-loop coefficients) so a seed plus a layout spec reproduces the
    fingerprint bit-exactly.
    """
    rng = np.random.default_rng(seed)
    n = spec.mzi_count
    factors = np.clip(rng.normal(1.0, spec.heater_sigma, n), 0.05, None)
    etas = np.clip(rng.normal(0.5, spec.coupler_sigma, (n, 2)), 0.01, 0.99)
    offsets = rng.uniform(0.0, spec.phase_offset_span, n) % TWO_PI
    loop_values = rng.normal(
        spec.ground_loop_scale, spec.ground_loop_scale / 4.0, len(spec.adjacency)
    )
    heaters = tuple(
        HeaterParams(
            resistance_factor=float(f),
            v2pi=float(spec.v2pi_nominal * np.sqrt(f)),
            phase_offset=float(p),
        )
        for f, p in zip(factors, offsets)
    )
    couplers = tuple(CouplerPair(float(e1), float(e2)) for e1, e2 in etas)
    ground_loops = tuple(
        (a, b, float(c)) for (a, b), c in zip(spec.adjacency, loop_values)
    )
    return ChipFingerprint(
        seed=int(seed), spec=spec, heaters=heaters, couplers=couplers, ground_loops=ground_loops
    )


def _chip_payload(chip: ChipFingerprint) -> dict:
    return {
        "format": CHIP_FORMAT,
        "seed": chip.seed,
        "layout": {
            "mzi_count": chip.spec.mzi_count,
            "adjacency": [list(pair) for pair in chip.spec.adjacency],
            "v2pi_nominal": chip.spec.v2pi_nominal,
            "heater_sigma": chip.spec.heater_sigma,
            "coupler_sigma": chip.spec.coupler_sigma,
            "phase_offset_span": chip.spec.phase_offset_span,
            "ground_loop_scale": chip.spec.ground_loop_scale,
        },
        "heaters": [
            {
                "resistance_factor": h.resistance_factor,
                "v2pi": h.v2pi,
                "phase_offset": h.phase_offset,
            }
            for h in chip.heaters
        ],
        "couplers": [[c.eta1, c.eta2] for c in chip.couplers],
        "ground_loops": [[a, b, c] for a, b, c in chip.ground_loops],
    }


def save_chip(chip: ChipFingerprint, path) -> None:
    """Write the fingerprint as versioned JSON; floats round-trip exactly."""
    with open(path, "w") as handle:
        json.dump(_chip_payload(chip), handle, sort_keys=True, indent=2)
        handle.write("\n")


def load_chip(path) -> ChipFingerprint:
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("format") != CHIP_FORMAT:
        raise ValueError(f"not a chip fingerprint file: format={payload.get('format')!r}")
    layout = payload["layout"]
    spec = ChipLayoutSpec(
        mzi_count=int(layout["mzi_count"]),
        adjacency=tuple((int(a), int(b)) for a, b in layout["adjacency"]),
        v2pi_nominal=float(layout["v2pi_nominal"]),
        heater_sigma=float(layout["heater_sigma"]),
        coupler_sigma=float(layout["coupler_sigma"]),
        phase_offset_span=float(layout["phase_offset_span"]),
        ground_loop_scale=float(layout["ground_loop_scale"]),
    )
    heaters = tuple(
        HeaterParams(
            resistance_factor=float(h["resistance_factor"]),
            v2pi=float(h["v2pi"]),
            phase_offset=float(h["phase_offset"]),
        )
        for h in payload["heaters"]
    )
    couplers = tuple(CouplerPair(float(e1), float(e2)) for e1, e2 in payload["couplers"])
    loops = tuple((int(a), int(b), float(c)) for a, b, c in payload["ground_loops"])
    return ChipFingerprint(
        seed=int(payload["seed"]),
        spec=spec,
        heaters=heaters,
        couplers=couplers,
        ground_loops=loops,
    )


@dataclass(frozen=True)
class DeviceInstance:
    """One carved mesh: a layout plus the chip sites its slots map onto.

    local_ground_loops lists (slot_a, slot_b, coefficient) for adjacency
    pairs whose ends both fall inside this device; couplings to sites
    outside the device do not act, modelling electrical separation of
    carved regions.
    """

    chip: ChipFingerprint
    layout: MeshLayout
    slot_to_global: tuple[int, ...]
    local_ground_loops: tuple[tuple[int, int, float], ...] = field(repr=False)

    def heater(self, slot: int) -> HeaterParams:
        return self.chip.heaters[self.slot_to_global[slot]]

    def slot_couplers(self) -> tuple[CouplerPair, ...]:
        return tuple(self.chip.couplers[g] for g in self.slot_to_global)

    def descriptor_digest(self) -> str:
        payload = json.dumps(
            {
                "chip": self.chip.digest(),
                "columns": self.layout.columns,
                "slots": list(self.slot_to_global),
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()


def carve_device(chip: ChipFingerprint, columns: int, slot_to_global) -> DeviceInstance:
    """Bind a pyramid layout to chip sites.

    slot_to_global lists one global id per mesh slot in column-major order;
    ids must be valid and distinct within the device.
    """
    layout = build_mesh(columns)
    slots = tuple(int(g) for g in slot_to_global)
    if len(slots) != layout.mzi_count:
        raise ValueError(
            f"{columns}-column mesh needs {layout.mzi_count} slots, got {len(slots)}"
        )
    if len(set(slots)) != len(slots):
        raise ValueError("slot map must be injective within a device")
    for g in slots:
        if not 0 <= g < chip.spec.mzi_count:
            raise ValueError(f"global MZI id {g} outside chip with {chip.spec.mzi_count} sites")
    global_to_slot = {g: s for s, g in enumerate(slots)}
    local = tuple(
        (global_to_slot[a], global_to_slot[b], c)
        for a, b, c in chip.ground_loops
        if a in global_to_slot and b in global_to_slot
    )
    return DeviceInstance(
        chip=chip, layout=layout, slot_to_global=slots, local_ground_loops=local
    )


def shared_mzi_count(a: DeviceInstance, b: DeviceInstance) -> int:
    """Number of chip sites two carved devices have in common."""
    if a.chip.digest() != b.chip.digest():
        return 0
    return len(set(a.slot_to_global) & set(b.slot_to_global))


def save_device(device: DeviceInstance, path) -> None:
    """Write a device descriptor (references its chip by digest)."""
    with open(path, "w") as handle:
        json.dump(
            {
                "format": DEVICE_FORMAT,
                "chip_digest": device.chip.digest(),
                "columns": device.layout.columns,
                "slots": list(device.slot_to_global),
            },
            handle,
            sort_keys=True,
            indent=2,
        )
        handle.write("\n")


def load_device(path, chip: ChipFingerprint) -> DeviceInstance:
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("format") != DEVICE_FORMAT:
        raise ValueError(f"not a device descriptor: format={payload.get('format')!r}")
    if payload["chip_digest"] != chip.digest():
        raise ValueError("device descriptor does not match the supplied chip")
    return carve_device(chip, int(payload["columns"]), payload["slots"])


@dataclass(frozen=True)
class Challenge:
    """Drive voltages for every device slot, on a 2**bits uniform grid.

    Levels are exact integers in [0, 2**bits); the physical voltage of
    level q is q * v2pi_nominal / 2**bits.
    """

    levels: tuple[int, ...]
    bits: int = 10
    v2pi_nominal: float = V2PI_NOMINAL

    def __post_init__(self):
        levels = tuple(int(q) for q in self.levels)
        object.__setattr__(self, "levels", levels)
        if self.bits < 1:
            raise ValueError(f"bits must be >= 1, got {self.bits}")
        top = 2**self.bits
        for q in levels:
            if not 0 <= q < top:
                raise ValueError(f"level {q} outside [0, {top})")

    @property
    def voltages(self) -> np.ndarray:
        step = self.v2pi_nominal / float(2**self.bits)
        return np.asarray(self.levels, dtype=float) * step

    def digest(self) -> str:
        payload = json.dumps(
            {"levels": list(self.levels), "bits": self.bits, "v2pi": self.v2pi_nominal},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    @classmethod
    def random(cls, rng: np.random.Generator, mzi_count: int, bits: int = 10,
               v2pi_nominal: float = V2PI_NOMINAL) -> "Challenge":
        levels = rng.integers(0, 2**bits, size=mzi_count)
        return cls(levels=tuple(int(q) for q in levels), bits=bits, v2pi_nominal=v2pi_nominal)

    @classmethod
    def from_voltages(cls, volts, bits: int = 10,
                      v2pi_nominal: float = V2PI_NOMINAL) -> "Challenge":
        step = v2pi_nominal / float(2**bits)
        levels = []
        for v in np.asarray(volts, dtype=float):
            q = v / step
            nearest = round(q)
            if abs(q - nearest) > 1e-9:
                raise ValueError(f"voltage {v} is not on the {bits}-bit challenge grid")
            levels.append(int(nearest))
        return cls(levels=tuple(levels), bits=bits, v2pi_nominal=v2pi_nominal)


def effective_voltages(device: DeviceInstance, voltages) -> np.ndarray:
    """Applied voltages plus ground-loop leakage from in-device neighbours."""
    v = np.asarray(voltages, dtype=float)
    if v.shape != (device.layout.mzi_count,):
        raise ValueError(
            f"expected {device.layout.mzi_count} voltages, got shape {v.shape}"
        )
    v_eff = v.copy()
    for sa, sb, c in device.local_ground_loops:
        v_eff[sa] += c * v[sb]
        v_eff[sb] += c * v[sa]
    return v_eff


def voltages_to_phases(device: DeviceInstance, challenge):
    """Map drive voltages to per-slot MZI settings via the thermo-optic law.

    theta_slot = (phase_offset + 2 pi (V_eff / V_2pi)^2) mod 2 pi, with
    V_eff including ground-loop leakage.  Accepts a Challenge or a bare
    voltage vector (the latter is handy for probing the law off-grid).
    """
    volts = getattr(challenge, "voltages", challenge)
    v_eff = effective_voltages(device, volts)
    settings = []
    for slot, v in enumerate(v_eff):
        h = device.heater(slot)
        theta = (h.phase_offset + TWO_PI * (v / h.v2pi) ** 2) % TWO_PI
        settings.append(MziSettings(theta=theta))
    return settings


@dataclass(frozen=True)
class NoiseConfig:
    """Measurement noise model parameters.

    Per response, samples_per_response intensity snapshots are averaged.
    Each snapshot sees per-mode multiplicative coupling jitter (fast, iid),
    a slow per-mode coupling drift shared by all snapshots of a measurement
    index (bounded random walk, reflected at +-drift bound), and additive
    detector noise; negative snapshot values clip to zero.
    """

    enabled: bool = True
    detector_sigma: float = 1e-5
    coupling_jitter_sigma: float = 0.14
    coupling_drift_step: float = 0.005
    coupling_drift_bound: float = 0.05
    samples_per_response: int = 1000

    def __post_init__(self):
        if self.samples_per_response < 1:
            raise ValueError("samples_per_response must be >= 1")
        for name in ("detector_sigma", "coupling_jitter_sigma",
                     "coupling_drift_step", "coupling_drift_bound"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def disabled(cls) -> "NoiseConfig":
        return cls(enabled=False)

    @classmethod
    def quiet(cls) -> "NoiseConfig":
        """Noise enabled but with drift frozen; useful in calibration tests."""
        return cls(coupling_drift_step=0.0)


def _seed_key(seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def _reflect(values: np.ndarray, bound: float) -> np.ndarray:
    if bound == 0.0:
        return np.zeros_like(values)
    period = 4.0 * bound
    folded = np.mod(values + bound, period)
    folded = np.where(folded > 2.0 * bound, period - folded, folded)
    return folded - bound


class NoiseStream:
    """Seeded noise source for one detector array.

    Every measurement index gets an independent substream derived from
    (seed, index), so replaying any single measurement is deterministic
    regardless of the order measurements are taken in.  The slow drift walk
    is generated once per stream and cached, which keeps it consistent
    across out-of-order queries.
    """

    def __init__(self, seed, mode_count: int, config: NoiseConfig | None = None):
        self.seed = _seed_key(seed)
        self.mode_count = int(mode_count)
        self.config = config if config is not None else NoiseConfig()
        if self.mode_count < 1:
            raise ValueError("mode_count must be >= 1")
        self._drift_rng = np.random.default_rng((*self.seed, 1))
        self._drift_walk = [np.zeros(self.mode_count)]

    def drift_factors(self, measurement_index: int) -> np.ndarray:
        """Per-mode coupling drift multiplier at a measurement index."""
        if measurement_index < 0:
            raise ValueError("measurement_index must be >= 0")
        cfg = self.config
        while len(self._drift_walk) <= measurement_index:
            step = self._drift_rng.normal(0.0, cfg.coupling_drift_step, self.mode_count)
            self._drift_walk.append(
                _reflect(self._drift_walk[-1] + step, cfg.coupling_drift_bound)
            )
        return 1.0 + self._drift_walk[measurement_index]

    def measurement_rng(self, measurement_index: int) -> np.random.Generator:
        return np.random.default_rng((*self.seed, 0, int(measurement_index)))


@dataclass(eq=False)
class RawResponse:
    """Sample-averaged output intensities of one measurement."""

    intensities: np.ndarray
    total_power: float
    measurement_index: int = 0


def measure(
    device: DeviceInstance,
    challenge,
    noise: NoiseStream | None = None,
    measurement_index: int = 0,
) -> RawResponse:
    """Drive the device with a challenge and read averaged output power.

    With noise=None (or a stream whose config is disabled) this returns the
    ideal propagation result.  Otherwise each of the configured snapshots
    sees drift, jitter, and detector noise before averaging.
    """
    settings = voltages_to_phases(device, challenge)
    ideal = propagate(device.layout, settings, device.slot_couplers())
    if noise is None or not noise.config.enabled:
        return RawResponse(
            intensities=ideal,
            total_power=float(ideal.sum()),
            measurement_index=measurement_index,
        )
    if noise.mode_count != device.layout.mode_count:
        raise ValueError(
            f"noise stream built for {noise.mode_count} modes, device has "
            f"{device.layout.mode_count}"
        )
    cfg = noise.config
    rng = noise.measurement_rng(measurement_index)
    drift = noise.drift_factors(measurement_index)
    shape = (cfg.samples_per_response, noise.mode_count)
    jitter = rng.normal(0.0, cfg.coupling_jitter_sigma, shape)
    detector = rng.normal(0.0, cfg.detector_sigma, shape)
    snapshots = np.clip(drift * (1.0 + jitter) * ideal + detector, 0.0, None)
    mean = snapshots.mean(axis=0)
    return RawResponse(
        intensities=mean,
        total_power=float(mean.sum()),
        measurement_index=measurement_index,
    )


@dataclass(frozen=True)
class PairPreset:
    """A named way of carving two related devices from one chip."""

    name: str
    columns: int
    chip_mzi_count: int
    slot_maps: tuple[tuple[int, ...], tuple[int, ...]]

    def chip_spec(self, **overrides) -> ChipLayoutSpec:
        spec = ChipLayoutSpec(mzi_count=self.chip_mzi_count)
        return replace(spec, **overrides) if overrides else spec

    def carve_pair(self, chip: ChipFingerprint) -> tuple[DeviceInstance, DeviceInstance]:
        return (
            carve_device(chip, self.columns, self.slot_maps[0]),
            carve_device(chip, self.columns, self.slot_maps[1]),
        )


# Two electrically separated 10-MZI pyramids with no shared sites.
SMALL_PAIR = PairPreset(
    name="small-pair",
    columns=4,
    chip_mzi_count=20,
    slot_maps=(tuple(range(10)), tuple(range(10, 20))),
)

# Two 66-MZI pyramids sharing all 45 sites of columns 7-11 and differing in
# the 21 sites of columns 1-6 (slot order is column-major).
_LARGE_SHARED = tuple(range(0, 45))
LARGE_PAIR = PairPreset(
    name="large-pair",
    columns=11,
    chip_mzi_count=87,
    slot_maps=(
        tuple(range(45, 66)) + _LARGE_SHARED,
        tuple(range(66, 87)) + _LARGE_SHARED,
    ),
)

PAIR_PRESETS = {preset.name: preset for preset in (SMALL_PAIR, LARGE_PAIR)}


def preset_by_name(name: str) -> PairPreset:
    try:
        return PAIR_PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; available: {sorted(PAIR_PRESETS)}"
        ) from None
