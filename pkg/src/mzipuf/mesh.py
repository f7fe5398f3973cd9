"""Optical core: 2x2 Mach-Zehnder unitaries and pyramid mesh propagation.

A programmable Mach-Zehnder interferometer (MZI) is modelled as an outer
phase shifter, a directional coupler, an inner phase shifter, and a second
directional coupler:

    U = diag(e^{j phi}, 1) @ B(eta2) @ diag(e^{j theta}, 1) @ B(eta1)

with the coupler transfer matrix

    B(eta) = [[sqrt(1 - eta), j sqrt(eta)],
              [j sqrt(eta),   sqrt(1 - eta)]]

At the ideal splitting ratio eta = 0.5 this reduces (up to global phase)
to the familiar sine/cosine form: theta = 0 routes all power to the cross
port, theta = pi to the bar port, theta = pi/2 splits 50/50.

Meshes are right-angled triangles ("pyramids") of MZIs: column c (1-based)
holds c devices, light enters a single input port, and a mesh with C
columns terminates in 2C output modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class MziSettings:
    """Programmed phases of one MZI, reduced modulo 2*pi.

    theta is the inner (differential arm) phase and phi the outer phase.
    Only theta affects output power splitting; phi is retained for
    completeness of the unitary model.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)


@dataclass(frozen=True)
class CouplerPair:
    """Power splitting ratios of the two directional couplers in one MZI.

    Both ratios must lie strictly inside (0, 1); 0.5 is the design target.
    """

    eta1: float = 0.5
    eta2: float = 0.5

    def __post_init__(self):
        for name in ("eta1", "eta2"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")


IDEAL_COUPLERS = CouplerPair(0.5, 0.5)


def coupler_matrix(eta: float) -> np.ndarray:
    """Transfer matrix of a lossless directional coupler with power ratio eta."""
    t = np.sqrt(1.0 - eta)
    k = 1j * np.sqrt(eta)
    return np.array([[t, k], [k, t]], dtype=complex)


def mzi_unitary(settings: MziSettings, couplers: CouplerPair = IDEAL_COUPLERS) -> np.ndarray:
    """2x2 transfer matrix of a single MZI.

    Parameters
    ----------
    settings : MziSettings
        Inner phase theta and outer phase phi.
    couplers : CouplerPair
        Splitting ratios of the input and output couplers.

    Returns
    -------
    numpy.ndarray
        Complex 2x2 matrix, unitary for any valid coupler pair.
    """
    phase_inner = np.array([[np.exp(1j * settings.theta), 0.0], [0.0, 1.0]], dtype=complex)
    phase_outer = np.array([[np.exp(1j * settings.phi), 0.0], [0.0, 1.0]], dtype=complex)
    return phase_outer @ coupler_matrix(couplers.eta2) @ phase_inner @ coupler_matrix(couplers.eta1)


def ideal_mzi_sine_cosine(settings: MziSettings) -> np.ndarray:
    """Closed sine/cosine form of the MZI unitary at eta1 = eta2 = 0.5.

    Algebraically identical to mzi_unitary with ideal couplers:

        j e^{j theta/2} [[e^{j phi} sin(theta/2), e^{j phi} cos(theta/2)],
                         [cos(theta/2),          -sin(theta/2)        ]]
    """
    half = settings.theta / 2.0
    ephi = np.exp(1j * settings.phi)
    return (
        1j
        * np.exp(1j * half)
        * np.array(
            [[ephi * np.sin(half), ephi * np.cos(half)], [np.cos(half), -np.sin(half)]],
            dtype=complex,
        )
    )


def _pyramid_mode_pairs(columns: int) -> tuple[tuple[int, int], ...]:
    # Column c (1-based) holds c MZIs; device i of column c acts on final-space
    # modes (2i + columns - c, 2i + columns - c + 1).  The offset accounts for
    # the one-mode shift each later column introduces at the top of the pyramid.
    pairs = []
    for c in range(1, columns + 1):
        for i in range(c):
            top = 2 * i + columns - c
            pairs.append((top, top + 1))
    return tuple(pairs)


@dataclass(frozen=True)
class MeshLayout:
    """Geometry of a triangular MZI mesh with a given number of columns.

    MZIs are indexed in column-major order (all of column 1, then column 2,
    and so on); mode_pairs gives, for each MZI, the pair of final-space
    optical modes it couples.
    """

    columns: int
    mode_pairs: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def mzi_count(self) -> int:
        return self.columns * (self.columns + 1) // 2

    @property
    def mode_count(self) -> int:
        return 2 * self.columns

    @property
    def input_mode(self) -> int:
        # The single illuminated input of the pyramid.
        return self.columns - 1

    def column_of(self, index: int) -> int:
        """1-based column containing the MZI at the given column-major index."""
        c = 1
        while index >= c:
            index -= c
            c += 1
        return c


def build_mesh(columns: int) -> MeshLayout:
    """Construct the layout of a pyramid mesh with the given column count."""
    if columns < 1:
        raise ValueError(f"columns must be >= 1, got {columns}")
    return MeshLayout(columns=columns, mode_pairs=_pyramid_mode_pairs(columns))


def _check_programming(layout: MeshLayout, settings, couplers) -> None:
    if len(settings) != layout.mzi_count or len(couplers) != layout.mzi_count:
        raise ValueError(
            f"mesh with {layout.mzi_count} MZIs got {len(settings)} settings "
            f"and {len(couplers)} coupler pairs"
        )


def mesh_transfer_matrix(layout: MeshLayout, settings, couplers) -> np.ndarray:
    """Full transfer matrix of a programmed mesh.

    settings and couplers are sequences in the layout's column-major MZI
    order.  The result is (2C x 2C) and unitary because every constituent
    block is.
    """
    _check_programming(layout, settings, couplers)
    n = layout.mode_count
    transfer = np.eye(n, dtype=complex)
    for (top, bottom), s, cp in zip(layout.mode_pairs, settings, couplers):
        block = mzi_unitary(s, cp)
        # Left-multiply by the embedded 2x2 block; only two rows change.
        rows = transfer[[top, bottom], :]
        transfer[[top, bottom], :] = block @ rows
    return transfer


def propagate(layout: MeshLayout, settings, couplers) -> np.ndarray:
    """Output intensity distribution for unit power on the mesh input mode.

    Applies each MZI block to the evolving field vector instead of forming
    the full matrix, which is what measurement paths use.  Returns a length
    2C vector of non-negative intensities summing to 1 (lossless model).
    """
    _check_programming(layout, settings, couplers)
    field_vec = np.zeros(layout.mode_count, dtype=complex)
    field_vec[layout.input_mode] = 1.0
    for (top, bottom), s, cp in zip(layout.mode_pairs, settings, couplers):
        block = mzi_unitary(s, cp)
        a, b = field_vec[top], field_vec[bottom]
        field_vec[top] = block[0, 0] * a + block[0, 1] * b
        field_vec[bottom] = block[1, 0] * a + block[1, 1] * b
    return np.abs(field_vec) ** 2
