import time

import numpy as np

from wcontract.harness import ExperimentConfig, run_experiment
from wcontract.kalman import GaussianBelief, filter_run, gaussian_w2
from wcontract.likelihood import LikelihoodModel, strong_logconcavity_parameter
from wcontract.rates import cumulative_bound
from wcontract.signal_model import ModelParams
from wcontract.harness import generate_observations

# --- criterion 2 timing: 20 random kalman models, k=50
t0 = time.perf_counter()
rng = np.random.default_rng(2024)
count = 0
worst_margin = np.inf
for p in (1, 2, 5, 10):
    for i in range(5):
        shift = 0.6 if i < 3 else -0.1
        beta = 0.35 * rng.normal(size=(p, p)) - shift * np.eye(p)
        params = ModelParams(alpha=0.2 * rng.normal(size=p), beta=beta,
                             sigma=rng.uniform(0.4, 1.2), delta=rng.uniform(0.3, 1.0))
        H = rng.normal(size=(p, p))
        R = np.diag(rng.uniform(0.5, 1.5, size=p))
        lik = LikelihoodModel.gaussian(H, R)
        theta0 = np.ones(p) / np.sqrt(p)
        obs = generate_observations(params, lik, theta0, 50, rng.integers(1 << 31))
        ra = filter_run(GaussianBelief.dirac(theta0), params, lik, obs)
        rb = filter_run(GaussianBelief.dirac(-theta0), params, lik, obs)
        lam_g = strong_logconcavity_parameter(lik)
        factors = cumulative_bound(params, [lam_g] * 50).factors()
        for k in range(51):
            dist = gaussian_w2(ra[k], rb[k])
            margin = factors[k] * 2.0 + 1e-10 - dist
            worst_margin = min(worst_margin, margin / (factors[k] * 2.0))
            assert dist <= factors[k] * 2.0 + 1e-10, (p, i, k, dist, factors[k] * 2.0)
        count += 1
print(f"criterion2: {count} models OK in {time.perf_counter()-t0:.2f}s, "
      f"worst relative margin {worst_margin:.3e}")

# --- criterion 6 prototype: pf contraction 1-D and 2-D
for dim, cov in ((1, [[1.0]]), (2, [[0.6, 0.2], [-0.1, 0.5]])):
    t0 = time.perf_counter()
    config = ExperimentConfig(
        scenario="pf_logistic_contraction",
        model=ModelParams(alpha=np.zeros(dim), beta=-0.5 * np.eye(dim), sigma=1.0, delta=1.0),
        likelihood=LikelihoodModel.logistic(np.array(cov)),
        horizon=30,
        replicates=32,
        n_particles=2**14,
        q=1.0,
        seed=99,
        threads=0,
    )
    report = run_experiment(config)
    ratios = [r.distance / (np.exp(-0.5 * r.k) * report.rows[0].distance)
              for r in report.rows]
    print(f"pf dim={dim}: all_passed={report.all_passed} "
          f"time={time.perf_counter()-t0:.1f}s")
    print("  normalized ratios:", " ".join(f"{r:.3f}" for r in ratios))
