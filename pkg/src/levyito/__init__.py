"""Levy processes from their characteristic triplet.

``measure`` holds triplets and the characteristic exponent, ``simulate``
draws cadlag paths through the Levy-Ito decomposition, ``jumpmeasure`` reads
the jump measure off those paths, ``verify`` checks the laws they must obey
and ``recover`` rebuilds a one-dimensional triplet from its exponent.
"""
__version__ = "0.1.0"

from .measure import (
    AtomicMeasure,
    CharacteristicExponent,
    DensityMeasure,
    InvalidExponentError,
    InvalidTripletError,
    LevyTriplet,
    NonIntegrableError,
    bump_density,
    char_fn,
    check_triplet,
    nu_integral,
    power_density,
    psi,
    tempered_stable_density,
    uniform_density,
    validate_triplet,
)
from .regions import abs_at_least, at_least, at_most, interval, intersect, overlaps, point, shell, union
from .serialize import triplet_from_json, triplet_hash, triplet_to_json
from .simulate import PathBatch, PathSample, SimConfig, sample_levy_path, simulate_paths
from .jumpmeasure import compensated_jump_process, count_jumps, jump_integral, jump_times_in
from .verify import CHECK_NAMES, CheckReport, run_battery
from .recover import RecoveryConfig, recover_triplet, roundtrip_report

__all__ = [name for name in dir() if not name.startswith("_")]
