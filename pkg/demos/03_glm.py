"""Logit and probit fits on simulated data with known coefficients."""

from __future__ import annotations

import numpy as np

from limitlens.features import BASE_COLUMNS
from limitlens.glm import GlmSpec, fit, odds_effect
from limitlens.synth import SynthConfig, gen_glm_dataset

cfg = SynthConfig(seed=3, n_obs=4000)
for link in ("logit", "probit"):
    X, y, beta = gen_glm_dataset(cfg, link=link)
    res = fit(GlmSpec(link, BASE_COLUMNS), X, y)
    print(f"\n{link}: converged={res.converged} in {res.iterations} iterations, "
          f"rho2={res.rho_square:.4f}, accuracy={res.accuracy:.3f}")
    print(f"{'name':16s} {'true':>10s} {'estimate':>10s} {'z':>8s} sig")
    for name, b, est, z, sig in zip(res.names, beta, res.coefficients, res.z_stats, res.significance):
        print(f"{name:16s} {b:10.4f} {est:10.4f} {z:8.2f} {sig}")
    inside = np.abs(res.coefficients - beta) <= 1.96 * res.std_errors
    print(f"true value inside 95% interval for {inside.sum()}/{inside.size} coefficients")

yield_beta = res.coefficients[res.names.index("yield_k-1")]
print(f"\nrelative change in odds for a 0.1% yield move: {odds_effect(yield_beta, 0.001):+.2%}")
