"""
Sample SRBM instances shared by the test suites
Worked three- and four-dimensional instances plus seeded random corpora
"""

from typing import Iterator, Tuple

import numpy as np

# Three-station tandem with c = (0, 1, 2, 1), beta = (2, 5/2, 4, 5/2)
EXAMPLE2_R = [[1.0, 0.0, 0.0], [-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]]
EXAMPLE2_SIGMA = [[1.0, -1.0, 0.0], [-1.0, 3.0, -2.0], [0.0, -2.0, 3.0]]
EXAMPLE2_MU = [-0.5, -1.5, 1.5]

# Nonnegative completely-S matrix that is not a P-matrix
EXAMPLE1_R = [[1.0, 0.5, 1.0, 0.0],
              [2.0, 1.0, 0.0, 1.0],
              [1.0, 0.0, 1.0, 0.0],
              [0.0, 1.0, 0.0, 1.0]]
EXAMPLE1_R_INV = [[0.0, 0.5, 0.0, -0.5],
                  [2.0, 0.0, -2.0, 0.0],
                  [0.0, -0.5, 1.0, 0.5],
                  [-2.0, 0.0, 2.0, 1.0]]
EXAMPLE1_MU = [-1.1, -1.1, -1.0, -1.0]

TANDEM_BETA = [1.0, 2.0, 3.0, 4.0]
TANDEM_C = [1.0, 1.0, 1.0, 1.0]
TANDEM_R = [[1.0, 0.0, 0.0], [-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]]
TANDEM_SIGMA = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]
TANDEM_MU = [-1.0, -1.0, -1.0]


def example2():
    from srbm_model import SrbmData
    return SrbmData(EXAMPLE2_SIGMA, EXAMPLE2_MU, EXAMPLE2_R)


def example1():
    # No covariance is given for this instance; c_34 = 0 for any sigma
    from srbm_model import SrbmData
    return SrbmData(np.eye(4), EXAMPLE1_MU, EXAMPLE1_R)


def tandem_product_form():
    from srbm_model import SrbmData
    return SrbmData(TANDEM_SIGMA, TANDEM_MU, TANDEM_R)


def one_dimensional(sigma2: float = 1.0, mu: float = -1.0):
    from srbm_model import SrbmData
    return SrbmData([[sigma2]], [mu], [[1.0]])


def random_p_matrix(rng: np.random.Generator, d: int) -> np.ndarray:
    """I plus small off-diagonal noise; strictly diagonally dominant"""
    r = np.eye(d)
    off = rng.uniform(-0.2, 0.2, size=(d, d)) / d
    np.fill_diagonal(off, 0.0)
    return r + off


def random_instance(rng: np.random.Generator, d: int, product_form: bool):
    """Random valid instance with a P-matrix R and R^{-1} mu < 0.

    Product-form instances take sigma from the skew symmetry identity
    with a random positive diagonal.
    """
    from srbm_model import SrbmData
    r = random_p_matrix(rng, d)
    if product_form:
        diag_sigma = rng.uniform(1.0, 2.0, size=d)
        dr_inv = np.diag(1.0 / np.diag(r))
        dsig = np.diag(diag_sigma)
        sigma = 0.5 * (r @ dr_inv @ dsig + dsig @ dr_inv @ r.T)
    else:
        m = rng.normal(size=(d, d))
        sigma = m @ m.T + 0.5 * np.eye(d)
    b = rng.uniform(0.5, 2.0, size=d)
    mu = -r @ b
    return SrbmData(sigma, mu, r)


def random_corpus(seed: int, count: int, dims=(2, 3, 4, 5)) -> Iterator[Tuple[object, bool]]:
    """Alternating product-form / generic instances over the given dimensions"""
    rng = np.random.default_rng(seed)
    for k in range(count):
        d = dims[k % len(dims)]
        product_form = (k // len(dims)) % 2 == 0
        yield random_instance(rng, d, product_form), product_form


def random_tandem_spec(rng: np.random.Generator, d: int, product_form: bool):
    from tandem import TandemSpec
    beta = [1.0] + list(1.0 + rng.uniform(0.5, 3.0, size=d))
    c = list(rng.uniform(0.2, 2.0, size=d + 1))
    if product_form:
        for i in range(1, d):
            c[i] = c[0]
    else:
        # guarantee at least one mismatch among c_1..c_{d-1}
        c[1] = c[0] + rng.uniform(0.3, 1.0)
    return TandemSpec(beta, c)
