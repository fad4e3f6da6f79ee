"""Multiport circuit algebra for reconfigurable pixel antennas.

A geometry is a pair (active feed-port set, binary pixel-connection
vector).  Muted feed ports are open-circuited and drop out of the network
in the infinite-impedance limit; switched pixel links are short (0 ohm,
bit 0) or quasi-open (z_oc, bit 1) loads that are eliminated through a
Schur complement.  The module produces the effective feed impedance
matrix, loaded open-circuit patterns, coupled patterns including source
mismatch, per-port radiation efficiencies, and the overall patterns used
by the CRLB engine.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .emdata import EMDataset, PatternSet, ETA0, pattern_gram
from .errors import ConfigError, NonPhysicalConfigError, NumericalError

CONDITION_WARN_THRESHOLD = 1e12


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryConfig:
    """One antenna geometry: ordered active feed ports + connection bits.

    feed_ports holds 0-based indices into the M potential feed ports.
    connections[q] = 1 opens the q-th pixel link (switch off), 0 shorts it
    (switch on); entry q maps to network port M + q.
    """

    feed_ports: tuple[int, ...]
    connections: tuple[int, ...]

    def __post_init__(self):
        fp = tuple(int(i) for i in self.feed_ports)
        g = tuple(int(b) for b in self.connections)
        if len(fp) == 0:
            raise ConfigError("at least one active feed port is required")
        if len(set(fp)) != len(fp):
            raise ConfigError(f"duplicate feed-port indices in {fp}")
        if any(i < 0 for i in fp):
            raise ConfigError(f"negative feed-port index in {fp}")
        if any(b not in (0, 1) for b in g):
            raise ConfigError("connection vector must be binary")
        object.__setattr__(self, "feed_ports", fp)
        object.__setattr__(self, "connections", g)

    @property
    def n_active(self) -> int:
        return len(self.feed_ports)

    def validate_against(self, M: int, Q: int) -> None:
        if any(i >= M for i in self.feed_ports):
            raise ConfigError(f"feed-port index out of range 0..{M - 1}: {self.feed_ports}")
        if len(self.connections) != Q:
            raise ConfigError(f"connection vector has {len(self.connections)} bits, expected {Q}")

    def connection_bitstring(self) -> str:
        return "".join(str(b) for b in self.connections)


@dataclass(frozen=True)
class FeedNetworkConfig:
    """Source impedances of the active RF chains and the quasi-open load value."""

    source_impedance_ohm: complex = 50.0 + 0.0j
    z_open_ohm: float = 1e9

    def __post_init__(self):
        if not (complex(self.source_impedance_ohm).real > 0):
            raise ConfigError("source impedance must have positive real part")
        if not (self.z_open_ohm >= 1e6):
            raise ConfigError("quasi-open load impedance must be at least 1e6 ohm")

    def source_matrix(self, n: int) -> np.ndarray:
        return np.eye(n, dtype=np.complex128) * complex(self.source_impedance_ohm)


@dataclass(frozen=True)
class PortPermutation:
    """Index lists realising the active/muted/loaded port reordering."""

    active: np.ndarray
    muted: np.ndarray
    loaded: np.ndarray

    @property
    def order(self) -> np.ndarray:
        return np.concatenate([self.active, self.muted, self.loaded])


@dataclass(frozen=True)
class ImpedanceBlocks:
    Z_AA: np.ndarray
    Z_AM: np.ndarray
    Z_AL: np.ndarray
    Z_MM: np.ndarray
    Z_ML: np.ndarray
    Z_LL: np.ndarray


@dataclass(frozen=True, eq=False)
class ActiveNetwork:
    """All derived quantities of one geometry on one dataset."""

    config: GeometryConfig
    feednet: FeedNetworkConfig
    z_feed: np.ndarray                # (N, N) effective feed impedance
    oc_feed_patterns: PatternSet      # loaded open-circuit patterns of active ports
    coupled_patterns: PatternSet      # including source mismatch/coupling
    efficiencies: np.ndarray          # (N,) radiation efficiencies
    patterns: PatternSet              # overall = coupled * sqrt(efficiency)
    provenance: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# permutation and partition
# ---------------------------------------------------------------------------

def build_permutation(feed_ports, M: int, Q: int) -> PortPermutation:
    """Active (in stated order) / muted (ascending) / loaded port index lists.

    The concatenated lists are a permutation of 0..M+Q-1, which is the
    index-level statement of P^T P = I.
    """
    cfgiter = tuple(int(i) for i in feed_ports)
    if len(set(cfgiter)) != len(cfgiter):
        raise ConfigError(f"duplicate feed-port indices: {cfgiter}")
    if any(i < 0 or i >= M for i in cfgiter):
        raise ConfigError(f"feed-port index out of range 0..{M - 1}: {cfgiter}")
    active = np.array(cfgiter, dtype=np.int64)
    muted = np.array(sorted(set(range(M)) - set(cfgiter)), dtype=np.int64)
    loaded = np.arange(M, M + Q, dtype=np.int64)
    return PortPermutation(active=active, muted=muted, loaded=loaded)


def partition_impedance(Z: np.ndarray, perm: PortPermutation) -> ImpedanceBlocks:
    """Sub-blocks of the reordered impedance matrix."""
    Z = np.asarray(Z)
    n = Z.shape[0]
    if Z.shape != (n, n) or perm.order.size != n:
        raise ConfigError(f"permutation of size {perm.order.size} does not match Z {Z.shape}")
    a, m, l = perm.active, perm.muted, perm.loaded
    return ImpedanceBlocks(
        Z_AA=Z[np.ix_(a, a)],
        Z_AM=Z[np.ix_(a, m)],
        Z_AL=Z[np.ix_(a, l)],
        Z_MM=Z[np.ix_(m, m)],
        Z_ML=Z[np.ix_(m, l)],
        Z_LL=Z[np.ix_(l, l)],
    )


def load_matrix(connections, z_open_ohm: float) -> np.ndarray:
    """Diagonal load matrix z_oc * diag(g): open where the bit is 1, short where 0."""
    g = np.asarray([int(b) for b in connections], dtype=np.float64)
    if g.size and not np.all((g == 0) | (g == 1)):
        raise ConfigError("connection vector must be binary")
    return np.diag(z_open_ohm * g).astype(np.complex128)


# ---------------------------------------------------------------------------
# loaded-port elimination
# ---------------------------------------------------------------------------

def _loaded_solve(Z: np.ndarray, n_feed: int, n_loaded: int, config: GeometryConfig,
                  feednet: FeedNetworkConfig, rhs: np.ndarray, context: str) -> np.ndarray:
    """Solve (Z_LL + Z_L) x = rhs by factorisation, with conditioning checks."""
    if n_loaded == 0:
        return np.zeros((0,) + rhs.shape[1:], dtype=np.complex128)
    perm = build_permutation(config.feed_ports, n_feed, n_loaded)
    S = Z[np.ix_(perm.loaded, perm.loaded)] + load_matrix(config.connections, feednet.z_open_ohm)
    try:
        cond = np.linalg.cond(S)
        if not np.isfinite(cond) or cond > CONDITION_WARN_THRESHOLD:
            warnings.warn(
                f"{context}: loaded-port system condition number {cond:.3g} exceeds "
                f"{CONDITION_WARN_THRESHOLD:.0e} for config {config.feed_ports}/"
                f"{config.connection_bitstring()}",
                RuntimeWarning, stacklevel=3,
            )
        return np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"{context}: singular loaded-port system for config feed_ports={config.feed_ports}, "
            f"connections={config.connection_bitstring()}"
        ) from exc


def load_correction(Z: np.ndarray, n_feed: int, n_loaded: int, config: GeometryConfig,
                    feednet: FeedNetworkConfig,
                    context: str = "load_correction") -> np.ndarray:
    """W = (Z_LL + Z_L)^-1 Z_LA, the (Q, N) loaded-port current coupling."""
    config.validate_against(n_feed, n_loaded)
    perm = build_permutation(config.feed_ports, n_feed, n_loaded)
    Z_LA = Z[np.ix_(perm.loaded, perm.active)]
    return _loaded_solve(Z, n_feed, n_loaded, config, feednet, Z_LA, context)


def feed_impedance_matrix(Z: np.ndarray, n_feed: int, n_loaded: int, config: GeometryConfig,
                          feednet: FeedNetworkConfig = FeedNetworkConfig()) -> np.ndarray:
    """Z_F = Z_AA - Z_AL (Z_LL + Z_L)^-1 Z_LA on a raw impedance matrix."""
    config.validate_against(n_feed, n_loaded)
    perm = build_permutation(config.feed_ports, n_feed, n_loaded)
    Z_AA = Z[np.ix_(perm.active, perm.active)]
    if n_loaded == 0:
        return Z_AA.copy()
    Z_AL = Z[np.ix_(perm.active, perm.loaded)]
    W = load_correction(Z, n_feed, n_loaded, config, feednet, "feed_impedance")
    return Z_AA - Z_AL @ W


def feed_impedance(dataset: EMDataset, config: GeometryConfig,
                   feednet: FeedNetworkConfig = FeedNetworkConfig()) -> np.ndarray:
    """Effective impedance among the N active feed ports.

    Muted feed ports are eliminated entirely (open-circuit limit); the
    loaded ports fold in through the Schur complement.
    """
    return feed_impedance_matrix(dataset.Z, dataset.n_feed, dataset.n_loaded, config, feednet)


def exact_port_currents_matrix(Z: np.ndarray, n_feed: int, n_loaded: int,
                               config: GeometryConfig, finite_muted_impedance: float,
                               i_active: np.ndarray,
                               feednet: FeedNetworkConfig = FeedNetworkConfig()):
    """Currents at muted and loaded ports for a *finite* muted-port impedance.

    Solves the full block system
        [Z_MM + zeta I, Z_ML; Z_LM, Z_LL + Z_L] [i_M; i_L] = -[Z_MA; Z_LA] i_A
    and is the oracle against which the infinite-impedance elimination is
    checked (for zeta -> inf, i_M -> 0 and i_L -> -(Z_LL + Z_L)^-1 Z_LA i_A).
    """
    if not (finite_muted_impedance > 0):
        raise ConfigError("finite muted impedance must be positive")
    config.validate_against(n_feed, n_loaded)
    perm = build_permutation(config.feed_ports, n_feed, n_loaded)
    i_A = np.asarray(i_active, dtype=np.complex128).reshape(-1)
    if i_A.size != config.n_active:
        raise ConfigError("i_active length must equal the number of active ports")

    m, l = perm.muted, perm.loaded
    nm, nl = m.size, l.size
    if nm + nl == 0:
        return np.zeros(0, dtype=np.complex128), np.zeros(0, dtype=np.complex128)

    big = np.zeros((nm + nl, nm + nl), dtype=np.complex128)
    big[:nm, :nm] = Z[np.ix_(m, m)] + finite_muted_impedance * np.eye(nm)
    big[:nm, nm:] = Z[np.ix_(m, l)]
    big[nm:, :nm] = Z[np.ix_(l, m)]
    big[nm:, nm:] = Z[np.ix_(l, l)] + load_matrix(config.connections, feednet.z_open_ohm)
    rhs = -np.concatenate([Z[np.ix_(m, perm.active)] @ i_A, Z[np.ix_(l, perm.active)] @ i_A])
    try:
        sol = np.linalg.solve(big, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("exact_port_currents: singular block system") from exc
    return sol[:nm], sol[nm:]


def exact_port_currents(dataset: EMDataset, config: GeometryConfig,
                        finite_muted_impedance: float, i_active: np.ndarray,
                        feednet: FeedNetworkConfig = FeedNetworkConfig()):
    return exact_port_currents_matrix(dataset.Z, dataset.n_feed, dataset.n_loaded,
                                      config, finite_muted_impedance, i_active, feednet)


def approx_loaded_currents_matrix(Z: np.ndarray, n_feed: int, n_loaded: int,
                                  config: GeometryConfig, i_active: np.ndarray,
                                  feednet: FeedNetworkConfig = FeedNetworkConfig()) -> np.ndarray:
    """i_L = -(Z_LL + Z_L)^-1 Z_LA i_A, the infinite-muted-impedance limit."""
    i_A = np.asarray(i_active, dtype=np.complex128).reshape(-1)
    W = load_correction(Z, n_feed, n_loaded, config, feednet, "approx_loaded_currents")
    return -(W @ i_A)


def approx_loaded_currents(dataset: EMDataset, config: GeometryConfig, i_active: np.ndarray,
                           feednet: FeedNetworkConfig = FeedNetworkConfig()) -> np.ndarray:
    return approx_loaded_currents_matrix(dataset.Z, dataset.n_feed, dataset.n_loaded,
                                         config, i_active, feednet)


# ---------------------------------------------------------------------------
# patterns, efficiency, composition
# ---------------------------------------------------------------------------

def open_circuit_feed_patterns(dataset: EMDataset, config: GeometryConfig,
                               feednet: FeedNetworkConfig = FeedNetworkConfig()) -> PatternSet:
    """Open-circuit patterns of the active ports with the pixel loads in place.

    E_ocF = E_oc (P_A - P_L (Z_LL + Z_L)^-1 Z_LA): the selected feed columns
    minus the field re-radiated by the loaded-port currents.
    """
    config.validate_against(dataset.n_feed, dataset.n_loaded)
    e_active = dataset.e_oc[:, list(config.feed_ports), :, :]
    if dataset.n_loaded == 0:
        return PatternSet(dataset.grid, np.array(e_active))
    W = load_correction(dataset.Z, dataset.n_feed, dataset.n_loaded, config, feednet,
                        "open_circuit_feed_patterns")
    e_loaded = dataset.e_oc[:, dataset.n_feed:, :, :]
    corr = np.tensordot(W.T, e_loaded, axes=([1], [1]))      # (N, 2, nt, np)
    corr = np.moveaxis(corr, 0, 1)
    return PatternSet(dataset.grid, e_active - corr)


def coupled_patterns(oc_feed: PatternSet, z_feed: np.ndarray,
                     feednet: FeedNetworkConfig = FeedNetworkConfig()) -> PatternSet:
    """Patterns per unit source EMF: E_F = E_ocF (Z_0 + Z_F)^-1."""
    N = oc_feed.n_ports
    A = feednet.source_matrix(N) + np.asarray(z_feed, dtype=np.complex128)
    d = oc_feed.data
    flat = d.reshape(2, N, -1)
    try:
        # right-multiplication by the inverse, done as a transposed solve
        out = np.linalg.solve(A.T, flat.transpose(1, 0, 2).reshape(N, -1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("coupled_patterns: singular source+feed impedance matrix") from exc
    out = out.reshape(N, 2, d.shape[2], d.shape[3]).transpose(1, 0, 2, 3)
    return PatternSet(oc_feed.grid, out)


def source_currents(z_feed: np.ndarray, feednet: FeedNetworkConfig) -> np.ndarray:
    """Port currents for canonical unit excitations: columns of (Z_0 + Z_F)^-1."""
    N = z_feed.shape[0]
    A = feednet.source_matrix(N) + np.asarray(z_feed, dtype=np.complex128)
    try:
        return np.linalg.solve(A, np.eye(N, dtype=np.complex128))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("source_currents: singular source+feed impedance matrix") from exc


def radiation_efficiency(coupled: PatternSet, z_feed: np.ndarray,
                         feednet: FeedNetworkConfig, quadrature: np.ndarray) -> np.ndarray:
    """Per-port radiation efficiency: radiated power over accepted power.

    Port n is driven by a unit source EMF (the canonical excitation) while
    the other sources are passive.  The numerator integrates the coupled
    pattern of port n over the grid quadrature; the denominator is the real
    power accepted by the antenna network at port n,
    Re{conj(i_n) [Z_F i]_n} with i the n-th column of (Z_0 + Z_F)^-1.  The
    2*eta0 normalisation matches the dataset convention R = Gram/(2*eta0),
    which makes a lossless single port come out at exactly 1.
    """
    N = coupled.n_ports
    z_feed = np.asarray(z_feed, dtype=np.complex128)
    I = source_currents(z_feed, feednet)
    V_port = z_feed @ I
    accepted = np.real(np.conj(np.diagonal(I)) * np.diagonal(V_port))
    radiated = pattern_power(coupled, quadrature)
    lam = np.empty(N)
    for n in range(N):
        if accepted[n] <= 0.0:
            raise NonPhysicalConfigError(
                f"non-positive accepted power {accepted[n]:.3g} at active port {n}"
            )
        lam[n] = radiated[n] / (2.0 * ETA0 * accepted[n])
    return lam


def pattern_power(patterns: PatternSet, quadrature: np.ndarray) -> np.ndarray:
    """Per-port quadrature integral of |e|^2 over both polarizations."""
    d = patterns.data
    w = np.asarray(quadrature)
    return np.einsum("pnij,ij->n", (d.conj() * d).real, w)


def overall_patterns(dataset: EMDataset, config: GeometryConfig,
                     feednet: FeedNetworkConfig = FeedNetworkConfig(),
                     normalize_before_scaling: bool = False) -> ActiveNetwork:
    """Full pipeline: feed impedance, loaded patterns, coupling, efficiency scaling.

    The overall patterns are E = E_F diag(sqrt(lambda)).  With
    normalize_before_scaling each coupled pattern is first rescaled to unit
    integrated power (off by default).
    """
    z_feed = feed_impedance(dataset, config, feednet)
    oc_feed = open_circuit_feed_patterns(dataset, config, feednet)
    coupled = coupled_patterns(oc_feed, z_feed, feednet)
    w = dataset.quadrature()
    lam = radiation_efficiency(coupled, z_feed, feednet, w)

    base = coupled.data
    if normalize_before_scaling:
        power = pattern_power(coupled, w)
        scale = np.where(power > 0, 1.0 / np.sqrt(np.where(power > 0, power, 1.0)), 0.0)
        base = base * scale[None, :, None, None]
    overall = PatternSet(dataset.grid, base * np.sqrt(lam)[None, :, None, None])
    return ActiveNetwork(
        config=config, feednet=feednet, z_feed=z_feed,
        oc_feed_patterns=oc_feed, coupled_patterns=coupled,
        efficiencies=lam, patterns=overall,
        provenance={"dataset": dataset.metadata.get("provenance", "unknown")},
    )
