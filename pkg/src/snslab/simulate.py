"""Session simulation for the four-intensity sending-or-not-sending protocol.

Both senders emit phase-randomized weak coherent pulses toward the middle
station, which interferes them on a balanced beam splitter and announces
which single detector fired. Decoy windows (both sides chose the decoy role)
carry announced phases and feed the yield analysis; signal windows (both
sides chose the signal role) carry the raw key; mixed windows are discarded.

Two views of a session are provided with identical bookkeeping:

* expected_tallies: exact expectations by deterministic quadrature,
* monte_carlo_session: sampled counts, reproducible and partitionable.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import DetectorModel, LinkModel, SourceParams, channel_transmittance

PHASE_GRID_POINTS = 2048
DEFAULT_SLICE_HALF_WIDTH_RAD = 0.3
MC_CHUNK = 1 << 17

DECOY = "decoy"
SIGNAL = "signal"

VAC = "vac"
MU1 = "mu1"
MU2 = "mu2"
MUZ = "muz"

_DECOY_LABELS = (VAC, MU1, MU2)
_SIGNAL_COMBOS = ((MUZ, VAC), (VAC, MUZ), (MUZ, MUZ), (VAC, VAC))

RowKey = tuple[str, str, str]


def row_keys() -> list[RowKey]:
    """Canonical ordering of all tally rows."""
    keys = [(DECOY, la, lb) for la in _DECOY_LABELS for lb in _DECOY_LABELS]
    keys += [(SIGNAL, la, lb) for la, lb in _SIGNAL_COMBOS]
    return keys


def z_bit_assignment(alice_sent, bob_sent):
    """Key-bit convention for a heralded signal-window event.

    Alice's bit is 1 iff she sent; Bob's bit is 0 iff he sent, so the bits
    agree exactly when one and only one side sent. Accepts scalars or
    boolean arrays.

    Returns:
        (bit_alice, bit_bob, is_error)
    """
    a = np.asarray(alice_sent, dtype=bool)
    b = np.asarray(bob_sent, dtype=bool)
    bit_a = a.astype(np.uint8)
    bit_b = (~b).astype(np.uint8)
    err = bit_a != bit_b
    if np.ndim(alice_sent) == 0 and np.ndim(bob_sent) == 0:
        return int(bit_a), int(bit_b), bool(err)
    return bit_a, bit_b, err


@dataclass(frozen=True)
class WindowOutcome:
    """One time slot seen end to end (simulator internal ground truth)."""

    window_kind: str
    intensity_a: float
    intensity_b: float
    alice_sent: bool
    bob_sent: bool
    detector_click: str  # "left" | "right" | "both" | "none"
    true_photon_count_total: int


@dataclass
class TallyRow:
    """Counters for one (window kind, intensity pair) cell.

    accepted_events and error_events are only populated for decoy rows with
    light on both sides (phase-slice post-selection) and for signal rows
    (key-bit errors). single_photon_events counts heralded events whose
    total emitted photon number was exactly one.
    """

    pulses_sent: float = 0.0
    one_detector_events: float = 0.0
    error_events: float = 0.0
    accepted_events: float = 0.0
    single_photon_events: float = 0.0

    def add(self, other: "TallyRow") -> None:
        self.pulses_sent += other.pulses_sent
        self.one_detector_events += other.one_detector_events
        self.error_events += other.error_events
        self.accepted_events += other.accepted_events
        self.single_photon_events += other.single_photon_events

    def validate(self) -> None:
        if self.one_detector_events > self.pulses_sent + 1e-9:
            raise ValueError("one_detector_events exceeds pulses_sent")
        if self.error_events > self.one_detector_events + 1e-9:
            raise ValueError("error_events exceeds one_detector_events")
        limit = self.accepted_events if self.accepted_events > 0 else self.one_detector_events
        if self.error_events > limit + 1e-9:
            raise ValueError("error_events exceeds their parent count")


@dataclass
class SessionTally:
    """Aggregated session statistics plus the ordered signal-window bits."""

    n_pulses: float
    rows: dict[RowKey, TallyRow] = field(default_factory=dict)
    z_bits_alice: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    z_bits_bob: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))

    def row(self, kind: str, label_a: str, label_b: str) -> TallyRow:
        return self.rows.setdefault((kind, label_a, label_b), TallyRow())

    def merge(self, other: "SessionTally") -> None:
        self.n_pulses += other.n_pulses
        for key, row in other.rows.items():
            self.row(*key).add(row)
        self.z_bits_alice = np.concatenate([self.z_bits_alice, other.z_bits_alice])
        self.z_bits_bob = np.concatenate([self.z_bits_bob, other.z_bits_bob])

    def validate(self) -> None:
        total = 0.0
        for row in self.rows.values():
            row.validate()
            total += row.pulses_sent
        # mixed-role windows are discarded, so tallied pulses undershoot n_pulses
        if total > self.n_pulses + 1e-6:
            raise ValueError("tallied pulses exceed the session length")

    def total_one_detector_events(self) -> float:
        return sum(r.one_detector_events for r in self.rows.values())

    def signal_heralded(self) -> float:
        return sum(r.one_detector_events for (k, _, _), r in self.rows.items() if k == SIGNAL)

    def pre_pairing_qber(self) -> float:
        """Raw key error rate before pairing, from the signal rows."""
        heralded = self.signal_heralded()
        if heralded == 0:
            return 0.0
        errors = sum(r.error_events for (k, _, _), r in self.rows.items() if k == SIGNAL)
        return errors / heralded


def _intensity(label: str, src: SourceParams) -> float:
    return {VAC: 0.0, MU1: src.mu1, MU2: src.mu2, MUZ: src.muz}[label]


def click_probabilities(
    intensity_a: float,
    intensity_b: float,
    eta_a: float,
    eta_b: float,
    phase_sigma: float = 0.0,
    noise: float = 0.0,
) -> tuple[float, float, float]:
    """Single-side and coincidence click probabilities of the interferometer.

    For arriving intensities x = intensity_a * eta_a and y = intensity_b *
    eta_b and relative phase theta, the two output ports see mean photon
    numbers (x + y +- 2 sqrt(x y) cos theta) / 2, and each threshold
    detector fires with probability 1 - (1 - noise) exp(-port intensity).
    The return values are averaged over theta uniform on [0, 2 pi)
    convolved with N(0, phase_sigma^2); the uniform circular measure is
    invariant under that convolution, so a single fixed quadrature over the
    circle evaluates the average exactly.

    Returns:
        (p_left_only, p_right_only, p_both): the two exclusive one-detector
        probabilities and the discarded coincidence probability.
    """
    for name, v in (("intensity_a", intensity_a), ("intensity_b", intensity_b)):
        if v < 0.0:
            raise ValueError(f"{name} must be >= 0")
    for name, v in (("eta_a", eta_a), ("eta_b", eta_b)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must lie in [0, 1)")
    if phase_sigma < 0.0:
        raise ValueError("phase_sigma must be >= 0")

    x = intensity_a * eta_a
    y = intensity_b * eta_b
    theta = (np.arange(PHASE_GRID_POINTS) + 0.5) * (2.0 * np.pi / PHASE_GRID_POINTS)
    cross = 2.0 * math.sqrt(x * y) * np.cos(theta)
    p_l = 1.0 - (1.0 - noise) * np.exp(-0.5 * (x + y + cross))
    p_r = 1.0 - (1.0 - noise) * np.exp(-0.5 * (x + y - cross))
    p_left_only = float(np.mean(p_l * (1.0 - p_r)))
    p_right_only = float(np.mean(p_r * (1.0 - p_l)))
    p_both = float(np.mean(p_l * p_r))
    return p_left_only, p_right_only, p_both


_SLICE_DELTA_POINTS = 201
_SLICE_HERMITE_POINTS = 41


def _slice_statistics(
    intensity_a: float,
    intensity_b: float,
    eta_a: float,
    eta_b: float,
    sigma: float,
    half_width: float,
    noise: float,
) -> tuple[float, float]:
    """Expected herald and wrong-port fractions inside the accepted slice.

    Conditioned on the announced relative phase delta falling within
    half_width of 0 (constructive port on the left), with actual phase
    delta + jitter. The slice around pi contributes identically with ports
    swapped, so callers only scale by the total acceptance fraction.

    Returns:
        (p_one_detector, p_wrong_port) conditioned on an accepted window.
    """
    x = intensity_a * eta_a
    y = intensity_b * eta_b
    delta = (np.arange(_SLICE_DELTA_POINTS) + 0.5) / _SLICE_DELTA_POINTS
    delta = (2.0 * delta - 1.0) * half_width
    nodes, weights = np.polynomial.hermite_e.hermegauss(_SLICE_HERMITE_POINTS)
    weights = weights / math.sqrt(2.0 * math.pi)
    theta = delta[:, None] + sigma * nodes[None, :]
    cross = 2.0 * math.sqrt(x * y) * np.cos(theta)
    p_l = 1.0 - (1.0 - noise) * np.exp(-0.5 * (x + y + cross))
    p_r = 1.0 - (1.0 - noise) * np.exp(-0.5 * (x + y - cross))
    lone_l = (p_l * (1.0 - p_r)) @ weights
    lone_r = (p_r * (1.0 - p_l)) @ weights
    herald = float(np.mean(lone_l + lone_r))
    wrong = float(np.mean(lone_r))
    return herald, wrong


def _single_photon_herald_prob(
    intensity_a: float, intensity_b: float, eta_a: float, eta_b: float, noise: float
) -> float:
    """P(exactly one detector fires | total emitted photon number is 1)."""
    total = intensity_a + intensity_b
    if total <= 0.0:
        return 0.0
    arrive = (intensity_a * eta_a + intensity_b * eta_b) / total
    return arrive * (1.0 - noise) + (1.0 - arrive) * 2.0 * noise * (1.0 - noise)


def expected_tallies(
    link: LinkModel,
    det: DetectorModel,
    src: SourceParams,
    n_pulses: float,
    slice_half_width_rad: float = DEFAULT_SLICE_HALF_WIDTH_RAD,
) -> SessionTally:
    """Exact expected counters for every tally row.

    All values are expectations of the Monte Carlo counters, computed by
    the same fixed quadratures used elsewhere in the package. The bit
    arrays stay empty; error expectations live in the row counters.
    """
    if n_pulses < 0:
        raise ValueError("n_pulses must be >= 0")
    if not 0.0 < slice_half_width_rad < math.pi / 2.0:
        raise ValueError("slice_half_width_rad must lie in (0, pi/2)")
    eta_a, eta_b = channel_transmittance(link, det)
    nu = link.noise_per_pulse
    sigma = src.jitter_sigma_rad
    accept_frac = 2.0 * slice_half_width_rad / math.pi

    tally = SessionTally(n_pulses=float(n_pulses))
    decoy_probs = {VAC: src.p_vac, MU1: src.p_mu1, MU2: src.p_mu2}
    w_decoy = src.p_decoy_window**2
    for la in _DECOY_LABELS:
        for lb in _DECOY_LABELS:
            ia, ib = _intensity(la, src), _intensity(lb, src)
            pulses = n_pulses * w_decoy * decoy_probs[la] * decoy_probs[lb]
            lone_l, lone_r, _ = click_probabilities(ia, ib, eta_a, eta_b, sigma, nu)
            row = tally.row(DECOY, la, lb)
            row.pulses_sent = pulses
            row.one_detector_events = pulses * (lone_l + lone_r)
            if ia > 0.0 and ib > 0.0:
                herald, wrong = _slice_statistics(
                    ia, ib, eta_a, eta_b, sigma, slice_half_width_rad, nu
                )
                row.accepted_events = pulses * accept_frac * herald
                row.error_events = pulses * accept_frac * wrong
            p1 = _single_photon_herald_prob(ia, ib, eta_a, eta_b, nu)
            row.single_photon_events = pulses * math.exp(-(ia + ib)) * (ia + ib) * p1

    eps = src.epsilon_send
    w_signal = src.p_signal_window**2
    combo_probs = {
        (MUZ, VAC): eps * (1.0 - eps),
        (VAC, MUZ): eps * (1.0 - eps),
        (MUZ, MUZ): eps * eps,
        (VAC, VAC): (1.0 - eps) ** 2,
    }
    for la, lb in _SIGNAL_COMBOS:
        ia, ib = _intensity(la, src), _intensity(lb, src)
        pulses = n_pulses * w_signal * combo_probs[(la, lb)]
        lone_l, lone_r, _ = click_probabilities(ia, ib, eta_a, eta_b, sigma, nu)
        row = tally.row(SIGNAL, la, lb)
        row.pulses_sent = pulses
        row.one_detector_events = pulses * (lone_l + lone_r)
        # bit errors happen exactly when both or neither side sent
        if la == lb:
            row.error_events = row.one_detector_events
        p1 = _single_photon_herald_prob(ia, ib, eta_a, eta_b, nu)
        row.single_photon_events = pulses * math.exp(-(ia + ib)) * (ia + ib) * p1
    return tally


def _chunk_bounds(n_pulses: int) -> list[tuple[int, int, int]]:
    """Fixed chunk partition (index, start, size), independent of job count."""
    bounds = []
    start = 0
    idx = 0
    while start < n_pulses:
        size = min(MC_CHUNK, n_pulses - start)
        bounds.append((idx, start, size))
        start += size
        idx += 1
    return bounds


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,)))
    )


def _simulate_chunk(
    rng: np.random.Generator,
    n: int,
    src: SourceParams,
    eta_a: float,
    eta_b: float,
    nu: float,
    half_width: float,
) -> dict[str, np.ndarray]:
    """Sample one block of time slots. Draw order is part of the contract."""
    sigma = src.jitter_sigma_rad
    signal_a = rng.random(n) < src.p_signal_window
    signal_b = rng.random(n) < src.p_signal_window
    pick_a = rng.random(n)
    pick_b = rng.random(n)
    send_a = rng.random(n) < src.epsilon_send
    send_b = rng.random(n) < src.epsilon_send
    delta = rng.random(n) * (2.0 * np.pi)
    jitter = rng.standard_normal(n) * sigma
    theta_signal = rng.random(n) * (2.0 * np.pi)

    both_signal = signal_a & signal_b
    both_decoy = ~signal_a & ~signal_b

    # decoy intensity codes 0/1/2 for vac/mu1/mu2
    code_a = np.where(pick_a < src.p_vac, 0, np.where(pick_a < src.p_vac + src.p_mu1, 1, 2))
    code_b = np.where(pick_b < src.p_vac, 0, np.where(pick_b < src.p_vac + src.p_mu1, 1, 2))
    levels = np.array([0.0, src.mu1, src.mu2])
    ia = np.where(both_decoy, levels[code_a], np.where(both_signal & send_a, src.muz, 0.0))
    ib = np.where(both_decoy, levels[code_b], np.where(both_signal & send_b, src.muz, 0.0))

    theta = np.where(both_decoy, delta + jitter, theta_signal)

    emitted_a = rng.poisson(ia)
    emitted_b = rng.poisson(ib)
    arrived = rng.binomial(emitted_a, eta_a) + rng.binomial(emitted_b, eta_b)

    x = ia * eta_a
    y = ib * eta_b
    total = x + y
    with np.errstate(invalid="ignore", divide="ignore"):
        p_left_port = np.where(
            total > 0.0, (0.5 * total + np.sqrt(x * y) * np.cos(theta)) / total, 0.5
        )
    p_left_port = np.clip(p_left_port, 0.0, 1.0)
    n_left = rng.binomial(arrived, p_left_port)
    n_right = arrived - n_left
    click_l = (n_left > 0) | (rng.random(n) < nu)
    click_r = (n_right > 0) | (rng.random(n) < nu)

    lone = click_l ^ click_r
    left = lone & click_l

    # row codes: decoy pairs 0..8, signal combos 9..12, discarded -1
    row = np.full(n, -1, dtype=np.int64)
    row[both_decoy] = (3 * code_a + code_b)[both_decoy]
    signal_code = np.select(
        [send_a & ~send_b, ~send_a & send_b, send_a & send_b],
        [9, 10, 11],
        default=12,
    )
    row[both_signal] = signal_code[both_signal]

    wrapped0 = np.abs((delta + np.pi) % (2.0 * np.pi) - np.pi)
    wrappedpi = np.abs(delta - np.pi)
    in0 = wrapped0 <= half_width
    inpi = wrappedpi <= half_width
    both_lit = both_decoy & (ia > 0.0) & (ib > 0.0)
    accepted = both_lit & lone & (in0 | inpi)
    wrong = accepted & ((in0 & ~left) | (inpi & left))

    single = lone & ((emitted_a + emitted_b) == 1)
    z_herald = both_signal & lone
    bit_a, bit_b, _ = z_bit_assignment(send_a, send_b)
    z_error = z_herald & (send_a == send_b)
    return {
        "row": row,
        "lone": lone,
        "left": left,
        "accepted": accepted,
        "wrong": wrong,
        "single": single,
        "z_herald": z_herald,
        "z_error": z_error,
        "bit_a": bit_a,
        "bit_b": bit_b,
        "signal_code": signal_code,
        "ia": ia,
        "ib": ib,
        "send_a": send_a,
        "send_b": send_b,
        "click_l": click_l,
        "click_r": click_r,
        "emitted_a": emitted_a,
        "emitted_b": emitted_b,
    }


_N_ROWS = 13


def _tally_chunk(data: dict[str, np.ndarray], n: int) -> SessionTally:
    row = data["row"]
    active = row >= 0
    tally = SessionTally(n_pulses=float(n))

    def counts(mask: np.ndarray) -> np.ndarray:
        return np.bincount(row[mask & active], minlength=_N_ROWS)

    pulses = counts(np.ones_like(active))
    heralds = counts(data["lone"])
    accepted = counts(data["accepted"])
    wrong = counts(data["wrong"])
    single = counts(data["single"])
    z_err = counts(data["z_error"])
    for idx, key in enumerate(row_keys()):
        r = tally.row(*key)
        r.pulses_sent = float(pulses[idx])
        r.one_detector_events = float(heralds[idx])
        r.single_photon_events = float(single[idx])
        if key[0] == DECOY:
            r.accepted_events = float(accepted[idx])
            r.error_events = float(wrong[idx])
        else:
            r.error_events = float(z_err[idx])
    keep = data["z_herald"]
    tally.z_bits_alice = data["bit_a"][keep].astype(np.uint8)
    tally.z_bits_bob = data["bit_b"][keep].astype(np.uint8)
    return tally


def monte_carlo_session(
    link: LinkModel,
    det: DetectorModel,
    src: SourceParams,
    n_pulses: int,
    seed: int,
    n_jobs: int = 1,
    slice_half_width_rad: float = DEFAULT_SLICE_HALF_WIDTH_RAD,
) -> SessionTally:
    """Sample a full session of n_pulses time slots.

    The pulse range is cut into fixed-size chunks, each driven by a
    substream derived from (seed, chunk index), so the result is
    bit-identical for any n_jobs and any partitioning of chunks over
    workers. Ground-truth photon numbers are recorded per row so the decoy
    analysis can be audited against the simulator.
    """
    if n_pulses < 0:
        raise ValueError("n_pulses must be >= 0")
    if n_jobs < 1:
        raise ValueError("n_jobs must be >= 1")
    eta_a, eta_b = channel_transmittance(link, det)
    nu = link.noise_per_pulse
    bounds = _chunk_bounds(int(n_pulses))

    def run(job: tuple[int, int, int]) -> SessionTally:
        idx, _, size = job
        rng = _chunk_rng(seed, idx)
        data = _simulate_chunk(rng, size, src, eta_a, eta_b, nu, slice_half_width_rad)
        return _tally_chunk(data, size)

    if n_jobs == 1 or len(bounds) <= 1:
        partials = [run(job) for job in bounds]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            partials = list(pool.map(run, bounds))

    tally = SessionTally(n_pulses=0.0)
    for part in partials:  # merge in chunk order to keep bit streams stable
        tally.merge(part)
    tally.validate()
    return tally


def iter_events(
    link: LinkModel,
    det: DetectorModel,
    src: SourceParams,
    n_pulses: int,
    seed: int,
    slice_half_width_rad: float = DEFAULT_SLICE_HALF_WIDTH_RAD,
) -> list[WindowOutcome]:
    """Materialize per-slot outcomes for small diagnostic runs.

    Reuses the exact chunk sampler, so a prefix of iter_events agrees with
    monte_carlo_session run at the same seed. Intended for n_pulses small
    enough to hold every outcome in memory.
    """
    if n_pulses > MC_CHUNK:
        raise ValueError(f"iter_events is limited to {MC_CHUNK} slots")
    eta_a, eta_b = channel_transmittance(link, det)
    rng = _chunk_rng(seed, 0)
    data = _simulate_chunk(
        rng, int(n_pulses), src, eta_a, eta_b, link.noise_per_pulse, slice_half_width_rad
    )
    outcomes = []
    kinds = {True: SIGNAL, False: DECOY}
    for i in range(int(n_pulses)):
        code = data["row"][i]
        if code < 0:
            kind = "mixed"
        else:
            kind = kinds[code >= 9]
        if data["click_l"][i] and data["click_r"][i]:
            click = "both"
        elif data["click_l"][i]:
            click = "left"
        elif data["click_r"][i]:
            click = "right"
        else:
            click = "none"
        outcomes.append(
            WindowOutcome(
                window_kind=kind,
                intensity_a=float(data["ia"][i]),
                intensity_b=float(data["ib"][i]),
                alice_sent=bool(data["send_a"][i]) if kind == SIGNAL else bool(data["ia"][i] > 0),
                bob_sent=bool(data["send_b"][i]) if kind == SIGNAL else bool(data["ib"][i] > 0),
                detector_click=click,
                true_photon_count_total=int(data["emitted_a"][i] + data["emitted_b"][i]),
            )
        )
    return outcomes
