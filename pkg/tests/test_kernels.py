"""Numeric kernel backends must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np

from duplexnet import kernels
from duplexnet.scenario import derive

from helpers import random_interior_state, random_scenario


def test_both_backends_available():
    backs = kernels.backends()
    assert set(backs) == {"numpy", "numba"}
    assert kernels.backend_name() in backs


def test_backends_agree_on_random_scenarios():
    rng = np.random.default_rng(21)
    backs = kernels.backends()
    for trial in range(10):
        scen = random_scenario(rng)
        st = random_interior_state(scen, rng)
        lay = scen.layout
        der = derive(scen, st)
        outs = {}
        for name, (phys, cost) in backs.items():
            p = phys(scen.gains, scen.noise, scen.power_budget, st.rho,
                     lay.ent_tx, lay.ent_rx, lay.ent_band, st.eta)
            c = cost(p[3], der.flows.band_flow, scen.cost.bandwidth, scen.cost.gain_factor)
            outs[name] = (*p, *c)
        for a, b in zip(outs["numpy"], outs["numba"]):
            np.testing.assert_array_equal(np.asarray(a), np.asarray(b))


def test_backends_agree_on_infinite_cost():
    # a loaded entry past capacity must be infinite in both backends
    sinr = np.array([1e-3, 1e-3, 10.0, 10.0])
    flow = np.array([0.0, 0.2, 0.0, 9.0])
    results = []
    for name, (_, cost) in kernels.backends().items():
        c, total = cost(sinr, flow, 1.0, 50.0)
        results.append((tuple(c), total))
    assert results[0] == results[1]
    assert results[0][1] == np.inf


def test_interference_includes_noise():
    rng = np.random.default_rng(24)
    for trial in range(5):
        scen = random_scenario(rng)
        st = random_interior_state(scen, rng)
        lay = scen.layout
        _, _, interference, sinr = kernels.physical_terms(
            scen.gains, scen.noise, scen.power_budget, st.rho,
            lay.ent_tx, lay.ent_rx, lay.ent_band, st.eta)
        noise_at_rx = scen.noise[lay.ent_band, lay.ent_rx]
        assert np.all(interference >= noise_at_rx - 1e-15)
        assert np.all(sinr >= 0)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, DUPLEXNET_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from duplexnet import kernels; print(kernels.backend_name())"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "numpy"
    env.pop("DUPLEXNET_NO_NUMBA")
    out = subprocess.run(
        [sys.executable, "-c", "from duplexnet import kernels; print(kernels.backend_name())"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "numba"
