import numpy as np
import pytest

from snslab import SourceParams, expected_tallies, monte_carlo_session
from snslab.presets import (
    desk_detector,
    desk_link,
    desk_security,
    desk_source,
    reference_detector,
    reference_link,
    reference_security,
    reference_source,
)

REFERENCE_PULSES = 1.007e13


@pytest.fixture
def ref_link():
    return reference_link()


@pytest.fixture
def ref_det():
    return reference_detector()


@pytest.fixture
def ref_src():
    return reference_source()


@pytest.fixture
def ref_sec():
    return reference_security()


@pytest.fixture
def desk():
    return desk_link(), desk_detector(), desk_source(), desk_security()


def balanced_source() -> SourceParams:
    """Decoy mix with enough weight on every row for tight statistics."""
    return SourceParams(
        mu1=0.1,
        mu2=0.4,
        muz=0.45,
        p_signal_window=0.5,
        p_mu1=0.4,
        p_mu2=0.3,
        p_vac=0.3,
        epsilon_send=0.2717,
        misalignment=0.028,
    )


@pytest.fixture(scope="session")
def ref_expected():
    return expected_tallies(
        reference_link(), reference_detector(), reference_source(), REFERENCE_PULSES
    )


@pytest.fixture(scope="session")
def big_desk_session():
    """One large sampled session shared by the statistics-hungry tests."""
    src = balanced_source()
    tally = monte_carlo_session(
        desk_link(), desk_detector(), src, 20_000_000, seed=101, n_jobs=4
    )
    return tally, src


@pytest.fixture(scope="session")
def big_desk_expected():
    return expected_tallies(desk_link(), desk_detector(), balanced_source(), 20_000_000)
