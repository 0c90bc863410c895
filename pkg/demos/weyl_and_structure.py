# %% [markdown]
# Weyl sum maxima, sum sets and longest gaps for f = 1/2

# %%
import numpy as np

from stationary_dpp import bernoulli_symbol, build_kernel, sample_batch, sumset_coverage
from stationary_dpp.inequalities import salem_littlewood_bound, weyl_max_batch
from stationary_dpp.kernel import interval
from stationary_dpp.structure import max_gap_prefixes

half = bernoulli_symbol(0.5)
batch = sample_batch(build_kernel(half, 4096), 11, 200)

# %%
for N in (256, 1024, 4096):
    m, _ = weyl_max_batch(batch.bits[:, :N], [0, 1], 0.5)
    print(f"N={N:5d} median max={np.median(m):7.2f}  sqrt(N log N)={np.sqrt(N * np.log(N)):7.2f}  "
          f"bound={salem_littlewood_bound(N):9.1f}")

# %%
Ns = [2 ** 10, 2 ** 14, 2 ** 18]
gaps = max_gap_prefixes(sample_batch(build_kernel(half, Ns[-1]), 12, 50).bits, Ns)
print("median longest gap:", dict(zip(Ns, np.median(gaps, axis=0))))

# %%
sym = sample_batch(build_kernel(half, interval(4001, -2000)), 13, 10)
print("coverage of [-50, 50] by X + X:", [sumset_coverage(c, 50) for c in sym])
