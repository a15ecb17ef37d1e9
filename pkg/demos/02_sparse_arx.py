"""From a transfer matrix to a sparse ARX model.

The mismatch estimator works on an ARX description of the column, so the
commissioned transfer matrix is first converted by fitting an L1-penalized
ARX model to its response to white excitation.  This demo uses a short
model (40 lags) so it finishes in seconds; the full conversion uses 150.
"""

import numpy as np

from modellife import arx, bench
from modellife.lasso import LassoProblem, lasso_fit
from modellife.plant import wood_berry_nominal

# a toy lasso first: only two of eight predictors matter
rng = np.random.default_rng(0)
X = rng.normal(size=(8, 400))
y = 2.0 * X[0] - 1.0 * X[3] + 0.1 * rng.normal(size=400)
for lam in (0.0, 0.01, 0.1, 0.5):
    sol = lasso_fit(LassoProblem(X, y, lam, standardize=False))
    print(f"lambda={lam:<5} coef={np.round(sol.coefficients, 3)}  KKT={sol.kkt_residual:.1e}")

# the conversion itself
nominal = wood_berry_nominal()
short = arx.ConversionConfig(excitation_length=3000, order=40, lam0=1e-5)
model = arx.convert_from_plant(nominal, short)
nonzero = np.count_nonzero(model.coefficients) / model.coefficients.size
print(f"\nconverted: order {model.order}, {100 * nonzero:.0f}% nonzero coefficients")
print(f"step-response error E against the transfer matrix: "
      f"{bench.step_benchmark(nominal, model).E:.3g}")

# an exact ARX realization exists too (common denominator per output),
# useful as a reference when conversion error would blur a comparison
exact = arx.exact_from_fopdt(nominal, 0.2, order=150)
print(f"exact realization: E = {bench.step_benchmark(nominal, exact).E:.2g}")
