from ._sspn import (
    Model,
    dft,
    dyadic_cover,
    idft,
    location_hash,
    oracle,
    rdc,
    sign_hash,
    train,
)

__all__ = [
    "Model",
    "dft",
    "dyadic_cover",
    "idft",
    "location_hash",
    "oracle",
    "rdc",
    "sign_hash",
    "train",
]
