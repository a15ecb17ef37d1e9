"""Reading a model's health off its step and impulse responses.

E adds up squared step-response differences over every channel; the final
value of a long step response gives the static gain; the impulse peak gives
the delay.  Here the readouts are taken for the commissioned model, both
aged columns, and an ARX realization of the commissioned model.
"""

from modellife import arx, bench
from modellife.plant import apply_mismatch, delay_mismatch, gain_mismatch, wood_berry_nominal

nominal = wood_berry_nominal()
models = {
    "commissioned": nominal,
    "gain-aged": apply_mismatch(nominal, gain_mismatch()),
    "delay-aged": apply_mismatch(nominal, delay_mismatch()),
    "ARX of commissioned": arx.exact_from_fopdt(nominal, 0.2, order=150),
}

print(f"{'model':20s} {'E vs commissioned':>18s}  gains K11 K21 K12 K22   peaks (min) 12 22")
for name, model in models.items():
    E = bench.step_benchmark(nominal, model).E
    gains = [bench.final_gain(bench.response_curve(model, i, j, 300.0))
             for (i, j) in ((1, 1), (2, 1), (1, 2), (2, 2))]
    peaks = [bench.peak_delay(bench.response_curve(model, i, 2, kind="impulse"))
             for i in (1, 2)]
    print(f"{name:20s} {E:18.2f}  " + " ".join(f"{g:6.1f}" for g in gains)
          + "   " + " ".join(f"{p:4.1f}" for p in peaks))

# The ARX model is driven by a one-sample pulse that acts over the next
# sampling interval, so its impulse peak lands one sample after the pure
# delay; the continuous formula peaks exactly at the delay.
