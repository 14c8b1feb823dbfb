import numpy as np
import pytest

from sdlr.diagnostics import moment_ode_oracle
from sdlr.ensemble import em_step, noise_for_step, stream_generator
from sdlr.linalg import hermitize, hs_norm
from sdlr.models import make_gbm, measure_moments, sample_initial


@pytest.fixture
def rng():
    return np.random.default_rng(20240911)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def em_oracle_gap(lam, theta, measure, n_samples, dt, t_final, seed):
    """Brute-force Euler-Maruyama check of the closed moment equations.

    Returns the HS gaps of the empirical mean / second moment against the
    moment-ODE values at ``t_final``, together with their aggregated Monte
    Carlo standard errors estimated from the final ensemble.
    """
    model = make_gbm(lam, theta)
    x = sample_initial(measure, n_samples, stream_generator(seed, 77))
    n_steps = int(round(t_final / dt))
    for k in range(n_steps):
        noise = noise_for_step(seed, 78, k + 1, n_samples, model.num_channels)
        x = em_step(x, model, k * dt, dt, noise)
    emp_mean = x.mean(axis=0)
    emp_second = hermitize(x.T @ x.conj() / n_samples)
    mean0, second0 = measure_moments(measure)
    _, means, seconds = moment_ode_oracle(lam, theta, mean0, second0, t_final, dt / 4)
    gap_mean = hs_norm(emp_mean - means[-1])
    gap_second = hs_norm(emp_second - seconds[-1])
    se_mean = np.sqrt(x.var(axis=0).sum() / n_samples)
    prods = x[:, :, None] * x.conj()[:, None, :]
    se_second = np.sqrt(prods.var(axis=0).sum() / n_samples)
    return gap_mean, se_mean, gap_second, se_second
