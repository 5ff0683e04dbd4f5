"""Where the history-free depth fails and the adaptive depth still works.

For p_h(i, i) = (1 - 1/sqrt(h + 1)) / 2 the global bounds are
a_k = 1 - 1/(2 sqrt(k + 1)). Their products are summable, so the depth K
built from them gives no finite coalescence time in general. The adaptive
depth K' reads the letters already pinned by earlier uniforms: two different
pinned letters certify a sign change, after which the bound is 1.

Run: python3 demos/hard_instance.py
"""
import numpy as np

from perfectsim.coupling import AkSequence, check_conditions
from perfectsim.depth import regeneration_diagnostic, tau0_adaptive
from perfectsim.errors import DepthCapExceeded
from perfectsim.kernels import AlternatingRenewalKernel

kernel = AlternatingRenewalKernel.sqrt_rule()
a_seq = AkSequence(kernel)
print("a_0..a_5:", np.round(a_seq.values(5), 4).tolist())

report = check_conditions(a_seq, 100_000)
print(f"sum of products up to n = 1e5: {report.sum_products:.4f} "
      f"(second-half growth {report.increment_ratio:.2e}) -> {report.divergence}")

# a single uniform close to 1 already needs a very deep K
try:
    print("K(0.9999) =", a_seq.depth(0.9999))
except DepthCapExceeded as exc:
    print("K(0.9999):", exc)

taus = np.array([tau0_adaptive(kernel, seed, max_back=10**6, a_seq=a_seq).tau
                 for seed in range(10_000)])
print(f"adaptive coalescence on 10000 seeds: mean tau {taus.mean():.2f}, "
      f"deepest {taus.min()}, 1% of seeds below {np.percentile(taus, 1):.0f}")

for algorithm in ("cff", "adaptive"):
    rep = regeneration_diagnostic(kernel, algorithm, 20_000, 200)
    print(f"regeneration q_200 with {algorithm:>8}: {rep.q[-1]:.4f} "
          f"(95% lower bound {rep.lower_bound:.4f})")
