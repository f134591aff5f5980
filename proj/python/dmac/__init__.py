"""Distributed multiple access channel toolkit.

Thin re-export of the compiled core plus a couple of dict helpers. All
structured arguments and results are plain dicts/lists in the same
shapes the JSON file formats use; rates are in nats throughout.
"""

from dmac._core import (
    Channel,
    Ensemble,
    UsageError,
    channel_from_json,
    decoder_gep_bound,
    ensemble_from_json,
    enumerate_vectors,
    gaussian_region_check,
    in_cd_all,
    in_cd_subset,
    in_cd_user,
    load_channel,
    load_ensemble,
    maximize_exponent,
    mutual_information,
    oracle,
    shannon_polymatroid_check,
    simulate,
    single_user_gep_bound,
    tune_policy,
    uniform_weights,
    __version__,
)

__all__ = [
    "Channel",
    "Ensemble",
    "UsageError",
    "channel_from_json",
    "decoder_gep_bound",
    "ensemble_from_json",
    "enumerate_vectors",
    "gaussian_region_check",
    "in_cd_all",
    "in_cd_subset",
    "in_cd_user",
    "load_channel",
    "load_ensemble",
    "maximize_exponent",
    "mutual_information",
    "oracle",
    "shannon_polymatroid_check",
    "simulate",
    "single_user_gep_bound",
    "tune_policy",
    "uniform_weights",
    "vec",
    "__version__",
]


def vec(options, g0=0):
    """Code index vector dict: one option index per user plus the
    interfering user's option."""
    return {"options": list(options), "g0": g0}
