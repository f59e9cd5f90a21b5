"""Bundled parameter presets (angular frequencies in rad/ns, times in ns).

Values follow the canonical operating point of the modeled device: Raman
coupling eta = 2*pi*0.05 rad/ns (50 MHz), drive detuning delta = 2*eta,
microwave Rabi frequency Omega = 6*delta, three-level parameters
G = 2*pi*1.0, Omega_L = 2*pi*0.5, Delta = 2*pi*20, cavity frequency from a
637 nm transition, zero-field splitting 2.88 GHz, excited-state decay
2*pi*0.083 rad/ns, cavity quality factor 1e9.
"""

from __future__ import annotations

import math

TWO_PI = 2.0 * math.pi

SPEED_OF_LIGHT_NM_PER_NS = 2.99792458e8
WAVELENGTH_NM = 637.0
OMEGA_C = TWO_PI * SPEED_OF_LIGHT_NM_PER_NS / WAVELENGTH_NM  # rad/ns

_BASE = {
    "eta": TWO_PI * 0.05,
    "delta": TWO_PI * 0.10,       # 2 * eta
    "Omega": TWO_PI * 0.60,       # 6 * delta
    "phi": 0.0,
    "n_max": 12,
    "n_bar": 0.0,
    "k": 1,
    "source": "full",
    "fidelity_mode": "trace",
    "n_time_samples": 201,
    "seed": 0,
    # keeps the norm-defect diagnostic comfortably below its 1e-8 alarm
    "settings": {"rel_tol": 1.0e-10},
    "lambda_params": {
        "G": TWO_PI * 1.0,
        "Omega_L": TWO_PI * 0.5,
        "Delta": TWO_PI * 20.0,
        "delta": TWO_PI * 0.10,
        "omega_c": OMEGA_C,
        "omega_10": TWO_PI * 2.88,
        "gamma0": TWO_PI * 0.083,
        "q_factor": 1.0e9,
    },
}


def _with(base: dict, **overrides) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    out.update(overrides)
    return out


PRESETS: dict[str, dict] = {
    "paper_n2": _with(_BASE, N=2),
    "paper_n4": _with(_BASE, N=4),
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset '{name}'; available: {sorted(PRESETS)}")
    base = PRESETS[name]
    return {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
