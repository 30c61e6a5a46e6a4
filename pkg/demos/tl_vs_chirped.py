"""One transform-limited and one chirped 10 ns pulse at 1 kW/cm^2.

The TL pulse is narrow-band and sits on the intermediate resonance, so the
764 MHz Raman step is far outside its bandwidth and almost nothing binds.
Sweeping the carrier at 100 MHz/ns carries both steps through resonance.
"""

import numpy as np

from photoalign.ensemble import run_ensemble
from photoalign.pulse import PulseSpec

for label, pulse in (("TL", PulseSpec(1000.0, 10.0)), ("chirped", PulseSpec(1000.0, 10.0, chirp_mhz_per_ns=100.0))):
    # TL populations are ~1e-17, so lower the floor below which alignment is undefined
    r = run_ensemble(pulse, stride_ns=0.1, record_pulse=False, floor=1e-30)
    post = r.times >= r.analysis_window[0]
    trace = r.alignment["total"][post]
    print(f"{label:8s} P = {r.final_population:.3e}  static = {r.static_alignment:.3f}  "
          f"dynamic = {r.dynamic_amplitude:.3f}  trace range {np.nanmin(trace):.3f}-{np.nanmax(trace):.3f}")
