"""The three inner searches, run directly against the synthetic backend.

Each optimizer maximizes compression subject to an accuracy-loss budget
measured from its own starting point: bisection for the pruning rate, a
geometric schedule for the scaling factor, and grouped bit-width descent
with sensitivity blocking for quantization.
"""

from flowforge import Benchmark, SyntheticBackend, auto_prune, auto_scale, qhs
from flowforge.netmodel import PRECISION_KINDS, Fixed, make_kernel

backend = SyntheticBackend(Benchmark.builtin("jetdnn-synth"))
net = backend.network()

print("== auto-pruning (binary search) ==")
prune = auto_prune(net, tolerance=0.02, rate_threshold=0.02, backend=backend)
for probe in prune.trace:
    flag = "feasible" if probe.feasible else "too lossy"
    print(f"  rate {probe.value:.6f}  accuracy {probe.accuracy:.4f}  {flag}")
print(f"  -> rate {prune.rate} in {prune.evaluations} evaluations "
      f"(bound: 1 + log2(1/0.02) ~= {1 + 6})")

print("\n== auto-scaling (geometric schedule) ==")
scale = auto_scale(net, tolerance=0.02, max_trials=6, backend=backend)
for probe in scale.trace:
    flag = "feasible" if probe.feasible else "too lossy"
    print(f"  factor {probe.value:.4f}  accuracy {probe.accuracy:.4f}  {flag}")
print(f"  -> factor {scale.factor} in {scale.evaluations} evaluations")

print("\n== quantization heuristic search ==")
kernel = make_kernel(net, Fixed(18, 8), "u250-a", 5.0, source_network_version=1)
for budget in (0.001, 0.01, 0.05):
    result = qhs(net, kernel, budget, backend)
    widths = {
        vl.id: "/".join(str(vl.precisions[k].total_bits) for k in PRECISION_KINDS)
        for vl in result.kernel.virtual_layers
    }
    print(f"  budget {budget:<6} -> bits (w/b/r) {widths}")
    print(f"    accuracy {result.accuracy:.4f}  evaluations {result.evaluations}  "
          f"blocked {len(result.blocked)}  dsp {result.metrics.dsp_used}")
